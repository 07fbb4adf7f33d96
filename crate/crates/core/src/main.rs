use clap::Parser;

fn main() {
    let cli = nhxy::cli::Cli::parse();
    std::process::exit(nhxy::cli::run(&cli));
}
