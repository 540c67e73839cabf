fn main() {
    std::process::exit(acgan_cli::run(std::env::args_os()));
}
