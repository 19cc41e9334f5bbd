fn main() {
    std::process::exit(siwalk::cli::parse_and_dispatch(std::env::args_os()));
}
