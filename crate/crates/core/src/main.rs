fn main() {
    std::process::exit(deltafield::cli::run(std::env::args_os()));
}
