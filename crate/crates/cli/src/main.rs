fn main() {
    std::process::exit(resilience_cli::main_with_args(std::env::args_os()));
}
