fn main() {
    std::process::exit(unravel::cli::main_with(std::env::args_os()));
}
