fn main() {
    std::process::exit(bsvylab::harness::cli_main());
}
