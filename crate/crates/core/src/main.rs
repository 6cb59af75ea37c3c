fn main() {
    std::process::exit(indexcode::cli::run(std::env::args_os()));
}
