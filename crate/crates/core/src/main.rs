fn main() {
    std::process::exit(cffcm::cli::main_with_args(std::env::args_os()));
}
