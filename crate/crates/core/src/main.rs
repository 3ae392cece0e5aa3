use clap::Parser;

fn main() {
    let cli = crowdlabel::cli::Cli::parse();
    if let Err(err) = crowdlabel::cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
