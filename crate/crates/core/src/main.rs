fn main() {
    std::process::exit(splitdev::cli::run(std::env::args_os()));
}
