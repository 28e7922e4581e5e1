use clap::Parser;

use affect_align::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level())
        .parse_default_env()
        .init();
    std::process::exit(run(&cli));
}
