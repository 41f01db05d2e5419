fn main() {
    std::process::exit(fbhm::cli::main_with(std::env::args_os()));
}
