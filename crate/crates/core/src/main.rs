fn main() {
    std::process::exit(pex_core::cli::main_with_args(std::env::args_os()));
}
