fn main() {
    std::process::exit(ordibound_cli::run(std::env::args_os()));
}
