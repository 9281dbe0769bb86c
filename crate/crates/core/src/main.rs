fn main() {
    std::process::exit(zenocomm::cli::run_from_args(std::env::args_os()));
}
