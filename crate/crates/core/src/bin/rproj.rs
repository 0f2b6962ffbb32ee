fn main() {
    std::process::exit(rproj::cli::main_with_args(std::env::args_os()));
}
