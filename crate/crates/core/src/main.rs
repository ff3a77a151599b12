fn main() {
    std::process::exit(inertia_id::cli::main_with_args(std::env::args_os()));
}
