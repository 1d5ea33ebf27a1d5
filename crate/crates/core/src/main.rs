fn main() {
    std::process::exit(mifgd::cli::cli_main(std::env::args_os()));
}
