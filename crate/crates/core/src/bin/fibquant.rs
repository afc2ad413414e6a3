fn main() {
    std::process::exit(fibquant::cli::run(std::env::args_os()));
}
