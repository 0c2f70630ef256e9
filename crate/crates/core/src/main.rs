use clap::Parser;

fn main() {
    qlattice::cli::init_threads();
    let cli = qlattice::cli::Cli::parse();
    std::process::exit(qlattice::cli::main_with(cli));
}
