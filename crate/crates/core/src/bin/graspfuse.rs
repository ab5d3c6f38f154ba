fn main() {
    std::process::exit(graspfuse::cli::run(std::env::args_os()));
}
