fn main() {
    std::process::exit(hodgeflow::cli::run(std::env::args_os()));
}
