use clap::Parser;

fn main() {
    let cli = relbelief::cli::Cli::parse();
    std::process::exit(relbelief::cli::main_with(cli));
}
