fn main() {
    std::process::exit(pcvae::cli::run(std::env::args_os()));
}
