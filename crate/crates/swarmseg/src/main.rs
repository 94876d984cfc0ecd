fn main() {
    std::process::exit(swarmseg::cli::run());
}
