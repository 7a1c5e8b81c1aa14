fn main() {
    std::process::exit(bclm_cli::commands::run(std::env::args_os()));
}
