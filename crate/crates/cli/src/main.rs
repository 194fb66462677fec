use clap::Parser;
use exportscore_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(f) = run(&cli) {
        eprintln!("{f}");
        std::process::exit(f.code);
    }
}
