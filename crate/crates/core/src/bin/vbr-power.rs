fn main() {
    std::process::exit(vbr_power::cli::main_with_args(std::env::args_os()));
}
