fn main() {
    std::process::exit(fpthermo::cli::main());
}
