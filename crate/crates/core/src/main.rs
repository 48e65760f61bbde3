fn main() {
    let code = dmim3d::harness::cli::cli_main(std::env::args_os());
    std::process::exit(code);
}
