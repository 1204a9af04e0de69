fn main() {
    std::process::exit(alsi::cli::run_cli(std::env::args_os()));
}
