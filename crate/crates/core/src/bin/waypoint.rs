use std::io;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WAYPOINT_LOG", "warn")).init();
    let code = waypoint::cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
