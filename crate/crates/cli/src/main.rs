fn main() {
    std::process::exit(pclab_cli::run(std::env::args_os()));
}
