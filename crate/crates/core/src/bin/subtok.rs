fn main() {
    subtok::cli::main()
}
