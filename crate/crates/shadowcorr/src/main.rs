use clap::Parser;

fn main() {
    let cli = shadowcorr::cli::Cli::parse();
    match shadowcorr::cli::run(cli) {
        Ok(out) => print!("{out}"),
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}
