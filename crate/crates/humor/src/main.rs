fn main() {
    std::process::exit(humor::cli::main_with_args(std::env::args_os()));
}
