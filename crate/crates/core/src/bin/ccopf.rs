use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = ccopf::cli::Cli::parse();
    match ccopf::cli::run(&cli) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("ccopf: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
