fn main() {
    std::process::exit(optosqueeze::cli::main_with_args(std::env::args_os().collect()));
}
