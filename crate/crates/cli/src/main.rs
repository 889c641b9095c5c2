fn main() {
    std::process::exit(toeplitz_lab::cli_main(std::env::args_os()));
}
