fn main() {
    std::process::exit(xnec::cli::main_with_args(std::env::args_os()));
}
