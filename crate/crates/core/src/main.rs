fn main() {
    std::process::exit(avstyle::cli::main_with_args(std::env::args_os()));
}
