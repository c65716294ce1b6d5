fn main() {
    std::process::exit(tomosar::cli::main_with_args(std::env::args_os()));
}
