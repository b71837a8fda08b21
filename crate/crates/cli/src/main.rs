fn main() {
    std::process::exit(covdet_cli::run(std::env::args_os()));
}
