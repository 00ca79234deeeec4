fn main() {
    std::process::exit(mimotrain_cli::run_cli(std::env::args_os()));
}
