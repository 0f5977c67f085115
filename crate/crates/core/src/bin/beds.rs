fn main() {
    std::process::exit(beds::cli::main_with(std::env::args_os()));
}
