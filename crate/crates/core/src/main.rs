fn main() {
    std::process::exit(duvn::harness::cli_main(std::env::args_os()));
}
