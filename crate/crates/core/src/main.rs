fn main() {
    std::process::exit(mimo_adc::cli::main_with_args(std::env::args_os()));
}
