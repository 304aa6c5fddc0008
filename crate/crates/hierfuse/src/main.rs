fn main() {
    std::process::exit(hierfuse::cli::run(std::env::args_os()));
}
