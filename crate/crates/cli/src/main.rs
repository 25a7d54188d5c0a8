fn main() {
    std::process::exit(tmr_cli::run(std::env::args_os()));
}
