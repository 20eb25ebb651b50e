fn main() {
    std::process::exit(gravcollapse::cli::main());
}
