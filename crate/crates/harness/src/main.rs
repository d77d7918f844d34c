fn main() {
    std::process::exit(elbench_harness::cli::cli_main(std::env::args_os()));
}
