use clap::Parser;

fn main() {
    std::process::exit(mscale::cli::run(mscale::cli::Cli::parse()));
}
