fn main() {
    std::process::exit(causalflow::cli::run(std::env::args_os()));
}
