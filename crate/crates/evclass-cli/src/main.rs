fn main() {
    std::process::exit(evclass_cli::run(std::env::args_os()));
}
