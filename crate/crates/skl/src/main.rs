fn main() {
    std::process::exit(skl::cli::main_with(std::env::args_os()));
}
