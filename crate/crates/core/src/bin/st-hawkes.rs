fn main() {
    std::process::exit(st_hawkes::cli::main_with_args(std::env::args_os()));
}
