fn main() {
    std::process::exit(kellystop::cli::run_from(std::env::args_os()));
}
