fn main() {
    std::process::exit(xlel::cli::run_from_args(std::env::args_os()));
}
