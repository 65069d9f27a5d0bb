fn main() {
    std::process::exit(altsp::cli::run_command(std::env::args_os()));
}
