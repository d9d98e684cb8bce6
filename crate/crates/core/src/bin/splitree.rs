fn main() -> std::process::ExitCode {
    splitree::cli::main()
}
