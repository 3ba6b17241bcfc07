use clap::Parser;
use tnsdp_bench::commands::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
