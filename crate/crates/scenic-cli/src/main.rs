fn main() {
    std::process::exit(scenic_cli::cli_dispatch(std::env::args_os()));
}
