use clap::Parser;

use birr::cli::{describe, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if let Err(err) = run(cli, &mut out) {
        eprintln!("{}", describe(&err));
        std::process::exit(err.exit_code());
    }
}
