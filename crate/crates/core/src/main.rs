fn main() {
    std::process::exit(flatflow2d::cli::run(std::env::args_os()));
}
