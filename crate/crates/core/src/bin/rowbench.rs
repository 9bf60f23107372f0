fn main() {
    std::process::exit(row_pomdp::cli::main_with_args(std::env::args_os()));
}
