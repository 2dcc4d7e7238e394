fn main() {
    std::process::exit(rough_imager::cli::main_with_args(std::env::args_os()));
}
