fn main() {
    std::process::exit(lipschitz_lr::cli::run(std::env::args_os()));
}
