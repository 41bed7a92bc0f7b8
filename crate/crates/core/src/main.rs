fn main() {
    std::process::exit(vem2d::cli::main_with_args(std::env::args_os()));
}
