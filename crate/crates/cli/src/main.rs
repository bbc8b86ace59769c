fn main() {
    std::process::exit(ssblow_cli::run(std::env::args_os()));
}
