fn main() {
    std::process::exit(coalkit::cli::run(std::env::args_os()));
}
