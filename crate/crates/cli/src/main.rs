fn main() {
    std::process::exit(convexjet_cli::main_with_args(std::env::args_os()));
}
