fn main() {
    std::process::exit(movdet_cli::run_command(std::env::args_os()));
}
