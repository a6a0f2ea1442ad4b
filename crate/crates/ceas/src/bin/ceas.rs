use clap::Parser;

fn main() {
    let cli = ceas::cli::Cli::parse();
    std::process::exit(ceas::cli::execute(cli));
}
