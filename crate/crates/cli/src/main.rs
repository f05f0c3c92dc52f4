use clap::Parser;
use cjt_cli::cli::{run, Args};

fn main() {
    let args = Args::parse();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    if let Err(e) = run(&args, &mut stdout.lock(), &mut stderr.lock()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
