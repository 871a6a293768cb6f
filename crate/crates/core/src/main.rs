fn main() {
    std::process::exit(canmt::cli::dispatch(std::env::args_os()));
}
