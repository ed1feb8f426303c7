fn main() {
    std::process::exit(fastmap::cli::run(std::env::args_os()));
}
