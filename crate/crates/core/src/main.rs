fn main() {
    std::process::exit(walklab::cli::run_cli(std::env::args_os()));
}
