fn main() {
    std::process::exit(cbf_core::cli::main_with_args(std::env::args_os()));
}
