use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COMAZE_LOG", "info")).init();
    let cli = comaze::cli::Cli::parse();
    if let Err(e) = comaze::cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
