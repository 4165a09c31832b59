fn main() {
    std::process::exit(ridgewave::cli::run(std::env::args_os()));
}
