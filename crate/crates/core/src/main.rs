fn main() {
    std::process::exit(contextnet::cli::run(std::env::args_os()));
}
