fn main() {
    std::process::exit(shforge_cli::run(std::env::args_os()));
}
