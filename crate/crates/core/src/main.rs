fn main() {
    std::process::exit(brwre::cli::main_with_args(std::env::args_os()));
}
