fn main() {
    std::process::exit(robust_gibbs::cli::main_with_args(std::env::args_os()));
}
