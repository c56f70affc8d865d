fn main() {
    std::process::exit(qslide::cli::main());
}
