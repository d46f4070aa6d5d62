fn main() {
    std::process::exit(hybrid_annot::cli::main());
}
