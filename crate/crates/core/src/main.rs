fn main() {
    std::process::exit(quasicontinuum::cli::main_with_args(std::env::args_os()));
}
