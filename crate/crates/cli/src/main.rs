use clap::Parser;

fn main() {
    std::process::exit(logergodic_cli::run(logergodic_cli::Cli::parse()));
}
