fn main() {
    std::process::exit(lsacm::cli::run(std::env::args_os()));
}
