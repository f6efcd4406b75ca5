fn main() {
    std::process::exit(inertia_core::cli::main_with_args(std::env::args_os()));
}
