fn main() {
    std::process::exit(fortag::cli::run(std::env::args_os()));
}
