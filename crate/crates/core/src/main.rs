fn main() {
    std::process::exit(histbayes::cli::run(std::env::args_os()));
}
