fn main() {
    std::process::exit(kcf_mot::cli::main_with_args(std::env::args_os()));
}
