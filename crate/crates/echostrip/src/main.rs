use clap::Parser;

fn main() {
    let cli = echostrip::cli::Cli::parse();
    std::process::exit(echostrip::cli::run(cli));
}
