fn main() {
    std::process::exit(upsc_cli::main_with_args(std::env::args_os()));
}
