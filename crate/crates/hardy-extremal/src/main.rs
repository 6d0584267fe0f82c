fn main() {
    std::process::exit(hardy_extremal::cli_main(std::env::args()));
}
