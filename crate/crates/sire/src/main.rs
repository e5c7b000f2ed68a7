fn main() {
    std::process::exit(sire::cli::run());
}
