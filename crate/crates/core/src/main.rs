use mindiss::cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(v) = std::env::var(cli::THREADS_ENV) {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size the thread pool: {e}");
                }
            }
            _ => {
                eprintln!("{}: expected a positive integer, got `{v}`", cli::THREADS_ENV);
                std::process::exit(cli::EXIT_VALIDATION);
            }
        }
    }
    std::process::exit(cli::run(std::env::args_os()));
}
