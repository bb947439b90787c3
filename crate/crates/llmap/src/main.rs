fn main() {
    std::process::exit(llmap::cli::run(std::env::args_os()));
}
