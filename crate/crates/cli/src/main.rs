fn main() {
    std::process::exit(admitlab_cli::run(std::env::args_os()));
}
