fn main() {
    std::process::exit(tvlogit_cli::run(std::env::args_os()));
}
