use clap::Parser;

fn main() {
    let cli = tdshift_cli::Cli::parse();
    if let Err(e) = tdshift_cli::run(&cli) {
        std::process::exit(tdshift_cli::report_error(&e));
    }
}
