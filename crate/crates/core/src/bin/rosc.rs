fn main() {
    std::process::exit(rosc::cli::main_with(std::env::args_os()));
}
