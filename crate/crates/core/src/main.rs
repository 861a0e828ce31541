fn main() {
    std::process::exit(degenbranch::cli::main_from_args(std::env::args_os()));
}
