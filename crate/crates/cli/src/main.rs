fn main() {
    std::process::exit(ergolab_cli::run(std::env::args_os()));
}
