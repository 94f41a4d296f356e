fn main() {
    std::process::exit(detinfo_harness::cli_main(std::env::args_os()));
}
