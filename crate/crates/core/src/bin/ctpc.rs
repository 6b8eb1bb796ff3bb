fn main() {
    std::process::exit(ctpc::cli::run());
}
