fn main() {
    std::process::exit(distleak::cli::main_with_args(std::env::args_os()));
}
