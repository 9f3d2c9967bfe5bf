fn main() {
    std::process::exit(quadinfer::cli::run(std::env::args_os()));
}
