fn main() {
    std::process::exit(srdft::cli::run(std::env::args_os()));
}
