fn main() {
    std::process::exit(cornerlab_cli::run(std::env::args_os()));
}
