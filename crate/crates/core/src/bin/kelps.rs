fn main() {
    std::process::exit(kelps::cli::main_with_args(std::env::args_os()));
}
