fn main() {
    std::process::exit(orlicz_cli::dispatch(std::env::args_os()));
}
