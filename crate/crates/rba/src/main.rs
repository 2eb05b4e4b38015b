use clap::Parser;

fn main() {
    let cli = rba::cli::Cli::parse();
    if let Err(e) = rba::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
