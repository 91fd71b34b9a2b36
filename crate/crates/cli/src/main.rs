use clap::Parser;

fn main() {
    let cli = histosr_cli::cli::Cli::parse();
    if let Err(e) = histosr_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
