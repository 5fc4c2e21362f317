fn main() {
    std::process::exit(memvos::cli::cli_main(std::env::args_os()));
}
