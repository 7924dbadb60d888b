use clap::Parser;

fn main() {
    let cli = beatnls::cli::Cli::parse();
    let workers = cli.workers.unwrap_or(beatnls::cli::DEFAULT_WORKERS);
    // Pool size is taken from the config for reproducible wall-clock
    // behavior; estimator determinism itself comes from indexed chunking.
    rayon::ThreadPoolBuilder::new().num_threads(workers).build_global().ok();
    let config = match beatnls::cli::build_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(beatnls::cli::EXIT_VALIDATION);
        }
    };
    std::process::exit(beatnls::cli::run_to_completion(&config));
}
