fn main() {
    std::process::exit(flowgnn::cli::main_with_args(std::env::args_os()));
}
