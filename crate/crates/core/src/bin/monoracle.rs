fn main() {
    std::process::exit(monoracle::cli::run(std::env::args_os()));
}
