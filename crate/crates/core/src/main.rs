fn main() {
    std::process::exit(kr_morse::cli::run(std::env::args_os()));
}
