fn main() {
    std::process::exit(ceq_cli::commands::main_with_args(std::env::args_os()));
}
