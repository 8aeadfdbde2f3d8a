fn main() {
    std::process::exit(durrmeyer::cli::run(std::env::args_os()));
}
