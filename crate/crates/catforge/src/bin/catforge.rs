fn main() {
    if let Err(e) = catforge::cli::run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
