fn main() {
    std::process::exit(aeromag::cli::dispatch(std::env::args_os()));
}
