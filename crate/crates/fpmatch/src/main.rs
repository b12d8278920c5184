use clap::Parser;

fn main() {
    let cli = fpmatch::cli::Cli::parse();
    if let Err(e) = fpmatch::cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
