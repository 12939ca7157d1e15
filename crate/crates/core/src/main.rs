fn main() {
    std::process::exit(disco_isac::cli::run(std::env::args_os()));
}
