fn main() {
    std::process::exit(drg::cli::main_with_args(std::env::args_os()));
}
