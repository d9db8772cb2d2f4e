fn main() {
    std::process::exit(zerobit::cli::main());
}
