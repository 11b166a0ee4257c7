fn main() {
    std::process::exit(qbek::cli::run(std::env::args_os()));
}
