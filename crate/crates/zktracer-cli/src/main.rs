use clap::Parser;

fn main() {
    let cli = zktracer_cli::Cli::parse();
    std::process::exit(zktracer_cli::run(cli));
}
