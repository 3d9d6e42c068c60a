//! Read-only importer for the subset of the MATPOWER case format needed by
//! the DC model: `baseMVA`, `bus`, `gen`, `branch` and polynomial `gencost`.
//! Every other field of the file is ignored.

use std::collections::HashMap;
use std::path::Path;

use super::{Generator, Grid, GridError, Line};

// Column indices (zero-based) of the MATPOWER tables.
const BUS_I: usize = 0;
const PD: usize = 2;
const GEN_BUS: usize = 0;
const GEN_STATUS: usize = 7;
const PMAX: usize = 8;
const PMIN: usize = 9;
const F_BUS: usize = 0;
const T_BUS: usize = 1;
const BR_X: usize = 3;
const RATE_A: usize = 5;
const BR_STATUS: usize = 10;

#[derive(Debug, Clone, Default)]
pub struct MatpowerOptions {
    /// Store negative branch reactances (series capacitors) by magnitude
    /// instead of rejecting the case.
    pub flip_negative_reactance: bool,
}

struct Table {
    rows: Vec<Vec<f64>>,
    first_line: usize,
}

pub fn load_matpower_file(
    path: impl AsRef<Path>,
    options: &MatpowerOptions,
) -> Result<Grid, GridError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut grid = load_matpower(&text, options)?;
    if grid.name.is_empty() {
        grid.name = name;
    }
    Ok(grid)
}

pub fn load_matpower(source: &str, options: &MatpowerOptions) -> Result<Grid, GridError> {
    let (scalars, tables) = parse(source)?;
    let base = *scalars.get("baseMVA").ok_or(GridError::Matpower {
        line: 0,
        message: "missing mpc.baseMVA".into(),
    })?;
    if !(base > 0.0) {
        return Err(GridError::Matpower {
            line: 0,
            message: format!("baseMVA must be positive, got {base}"),
        });
    }
    let table = |name: &str| {
        tables.get(name).ok_or_else(|| GridError::Matpower {
            line: 0,
            message: format!("missing mpc.{name}"),
        })
    };
    let bus = table("bus")?;
    let gen = table("gen")?;
    let branch = table("branch")?;
    let gencost = tables.get("gencost");

    let width = |t: &Table, row: usize, need: usize| -> Result<(), GridError> {
        if t.rows[row].len() <= need {
            Err(GridError::Matpower {
                line: t.first_line + row,
                message: format!("expected at least {} columns", need + 1),
            })
        } else {
            Ok(())
        }
    };

    let mut ids = Vec::with_capacity(bus.rows.len());
    let mut demand = Vec::with_capacity(bus.rows.len());
    for (r, row) in bus.rows.iter().enumerate() {
        width(bus, r, PD)?;
        ids.push(row[BUS_I] as i64);
        demand.push(-row[PD] / base);
    }
    let position: HashMap<i64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let lookup = |element: &'static str, index: usize, id: f64| {
        position
            .get(&(id as i64))
            .copied()
            .ok_or(GridError::UnknownBus {
                element,
                index,
                bus: id as i64,
            })
    };

    let mut lines = Vec::new();
    for (r, row) in branch.rows.iter().enumerate() {
        width(branch, r, BR_STATUS)?;
        if row[BR_STATUS] == 0.0 {
            continue;
        }
        let mut x = row[BR_X];
        if x < 0.0 && options.flip_negative_reactance {
            x = -x;
        }
        let limits = if row[RATE_A] > 0.0 {
            (-row[RATE_A] / base, row[RATE_A] / base)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        };
        lines.push(Line {
            from: lookup("line", lines.len(), row[F_BUS])?,
            to: lookup("line", lines.len(), row[T_BUS])?,
            reactance: x,
            limits,
        });
    }

    let mut generators = Vec::new();
    for (r, row) in gen.rows.iter().enumerate() {
        width(gen, r, PMIN)?;
        if row[GEN_STATUS] <= 0.0 {
            continue;
        }
        let (quadratic, linear) = match gencost {
            Some(costs) => polynomial_cost(costs, r)?,
            None => (0.0, 0.0),
        };
        generators.push(Generator {
            bus: lookup("generator", generators.len(), row[GEN_BUS])?,
            u_min: row[PMIN] / base,
            u_max: row[PMAX] / base,
            cost_linear: linear * base,
            cost_quadratic: 2.0 * quadratic * base * base,
        });
    }

    Grid::new(String::new(), ids, demand, lines, generators, None)
}

/// Returns `(c2, c1)` of a polynomial cost row in MW units.
fn polynomial_cost(costs: &Table, row: usize) -> Result<(f64, f64), GridError> {
    let line = costs.first_line + row;
    let c = costs.rows.get(row).ok_or(GridError::Matpower {
        line,
        message: format!("no gencost row for generator {row}"),
    })?;
    if c.len() < 4 || c[0] != 2.0 {
        return Err(GridError::Matpower {
            line,
            message: "only polynomial (model 2) costs are supported".into(),
        });
    }
    let n = c[3] as usize;
    if n > 3 || c.len() < 4 + n {
        return Err(GridError::Matpower {
            line,
            message: format!("unsupported polynomial cost with {n} coefficients"),
        });
    }
    let coeffs = &c[4..4 + n];
    let get = |power: usize| {
        if power < n {
            coeffs[n - 1 - power]
        } else {
            0.0
        }
    };
    Ok((get(2), get(1)))
}

fn parse(source: &str) -> Result<(HashMap<String, f64>, HashMap<String, Table>), GridError> {
    let mut scalars = HashMap::new();
    let mut tables = HashMap::new();
    let mut current: Option<(String, Table)> = None;

    for (k, raw) in source.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('%').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((_, table)) = current.as_mut() {
            let (body, closes) = match line.find(']') {
                Some(pos) => (&line[..pos], true),
                None => (line, false),
            };
            for chunk in body.split(';') {
                let row = parse_row(chunk, line_no)?;
                if !row.is_empty() {
                    table.rows.push(row);
                }
            }
            if closes {
                let (name, table) = current.take().unwrap();
                tables.insert(name, table);
            }
            continue;
        }
        let Some(rest) = line.strip_prefix("mpc.") else {
            continue;
        };
        let Some((name, value)) = rest.split_once('=') else {
            continue;
        };
        let name = name.trim().to_string();
        let value = value.trim().trim_end_matches(';').trim();
        if let Some(open) = value.strip_prefix('[') {
            let mut table = Table {
                rows: Vec::new(),
                first_line: line_no,
            };
            let (body, closes) = match open.find(']') {
                Some(pos) => (&open[..pos], true),
                None => (open, false),
            };
            for chunk in body.split(';') {
                let row = parse_row(chunk, line_no)?;
                if !row.is_empty() {
                    table.rows.push(row);
                }
            }
            if table.rows.is_empty() {
                table.first_line = line_no + 1;
            }
            if closes {
                tables.insert(name, table);
            } else {
                current = Some((name, table));
            }
        } else if let Ok(v) = value.parse::<f64>() {
            scalars.insert(name, v);
        }
    }
    if let Some((name, _)) = current {
        return Err(GridError::Matpower {
            line: source.lines().count(),
            message: format!("unterminated matrix mpc.{name}"),
        });
    }
    Ok((scalars, tables))
}

fn parse_row(chunk: &str, line: usize) -> Result<Vec<f64>, GridError> {
    chunk
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>().map_err(|_| GridError::Matpower {
                line,
                message: format!("cannot parse number '{t}'"),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "function mpc = small
mpc.version = '2';
mpc.baseMVA = 100;
%% bus data
mpc.bus = [
\t1\t3\t0\t0\t0\t0\t1\t1\t0\t135\t1\t1.05\t0.95;
\t2\t1\t150\t0\t0\t0\t1\t1\t0\t135\t1\t1.05\t0.95;
];
mpc.gen = [
\t1\t0\t0\t300\t-300\t1\t100\t1\t250\t10\t0\t0\t0\t0\t0\t0\t0\t0\t0\t0\t0;
];
mpc.branch = [
\t1\t2\t0.01\t0.1\t0\t200\t0\t0\t0\t0\t1\t-360\t360;
\t1\t2\t0.01\t0.1\t0\t0\t0\t0\t0\t0\t0\t-360\t360;
];
mpc.gencost = [
\t2\t0\t0\t3\t0.01\t20\t0;
];
";

    #[test]
    fn converts_to_per_unit() {
        let g = load_matpower(SMALL, &MatpowerOptions::default()).unwrap();
        assert_eq!(g.n_bus(), 2);
        assert_eq!(g.n_line(), 1, "out-of-service branch skipped");
        assert_eq!(g.nominal_demand, vec![0.0, -1.5]);
        assert_eq!(g.lines[0].limits, (-2.0, 2.0));
        let u = &g.generators[0];
        assert_eq!((u.u_min, u.u_max), (0.1, 2.5));
        assert!((u.cost_quadratic - 200.0).abs() < 1e-12);
        assert!((u.cost_linear - 2000.0).abs() < 1e-12);
    }

    #[test]
    fn negative_reactance_needs_opt_in() {
        let src = SMALL.replacen("0.01\t0.1\t0\t200", "0.01\t-0.1\t0\t200", 1);
        let err = load_matpower(&src, &MatpowerOptions::default()).unwrap_err();
        assert!(matches!(err, GridError::NonpositiveReactance { index: 0, .. }));
        let g = load_matpower(
            &src,
            &MatpowerOptions {
                flip_negative_reactance: true,
            },
        )
        .unwrap();
        assert_eq!(g.lines[0].reactance, 0.1);
    }

    #[test]
    fn missing_table_is_an_error() {
        let src = SMALL.replace("mpc.branch", "mpc.branches");
        assert!(matches!(
            load_matpower(&src, &MatpowerOptions::default()),
            Err(GridError::Matpower { .. })
        ));
    }
}
