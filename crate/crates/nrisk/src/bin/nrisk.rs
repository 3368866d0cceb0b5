use clap::Parser;

fn main() {
    let cli = nrisk::cli::Cli::parse();
    std::process::exit(nrisk::cli::run(cli));
}
