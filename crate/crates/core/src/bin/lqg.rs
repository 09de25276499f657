use clap::Parser;
use lqg_core::cli::{exit_status, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    std::process::exit(exit_status(&cli));
}
