fn main() {
    std::process::exit(ushift_cli::run(std::env::args_os()));
}
