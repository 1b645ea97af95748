fn main() {
    std::process::exit(noisereg_cli::run(std::env::args_os()));
}
