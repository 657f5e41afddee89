fn main() {
    std::process::exit(subshot::cli::cli_main(std::env::args_os()));
}
