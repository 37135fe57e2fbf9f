fn main() {
    std::process::exit(hsflow::harness::cli::run(std::env::args_os()));
}
