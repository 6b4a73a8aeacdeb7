fn main() {
    std::process::exit(ldtm::cli::main_with_args(std::env::args_os()));
}
