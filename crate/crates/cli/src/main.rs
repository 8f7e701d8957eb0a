fn main() {
    std::process::exit(chirikov_cli::run_cli(std::env::args_os()));
}
