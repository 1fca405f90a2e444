fn main() {
    std::process::exit(sedge::cli::run());
}
