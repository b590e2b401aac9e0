use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NOLACE_LOG", "warn")).init();
    std::process::exit(nolace::cli::run(nolace::cli::Cli::parse()));
}
