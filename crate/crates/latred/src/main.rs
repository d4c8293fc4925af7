fn main() {
    std::process::exit(latred::cli::run(std::env::args_os()));
}
