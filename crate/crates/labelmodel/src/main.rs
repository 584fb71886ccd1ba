fn main() {
    std::process::exit(labelmodel::cli::run());
}
