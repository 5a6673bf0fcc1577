fn main() {
    std::process::exit(unravel_cli::run(std::env::args_os()));
}
