fn main() {
    std::process::exit(msdn_core::cli::run(std::env::args_os()));
}
