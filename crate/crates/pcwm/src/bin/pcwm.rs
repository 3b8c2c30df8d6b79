fn main() {
    std::process::exit(pcwm::cli::run(std::env::args_os()));
}
