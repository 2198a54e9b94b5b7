fn main() {
    std::process::exit(genflow_cli::cli::main_with_args(std::env::args_os()));
}
