fn main() {
    std::process::exit(squish_core::cli::run(std::env::args_os()));
}
