fn main() {
    std::process::exit(ramimo::cli::run_from_args(std::env::args_os()));
}
