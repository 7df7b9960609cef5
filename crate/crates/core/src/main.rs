use clap::Parser;
use fpmul::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
