fn main() {
    if let Err(err) = graphmvp::cli::run() {
        eprintln!("error: {err}");
        std::process::exit(graphmvp::cli::exit_code(&err));
    }
}
