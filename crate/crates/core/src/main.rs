fn main() {
    std::process::exit(strokepaint::cli::cli_main(std::env::args_os()));
}
