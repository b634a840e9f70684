fn main() {
    std::process::exit(laionc_cli::run(std::env::args_os()));
}
