use clap::Parser;

fn main() {
    let cli = dpmpqp::cli::Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(cli.log_level())).init();
    std::process::exit(dpmpqp::cli::run(cli));
}
