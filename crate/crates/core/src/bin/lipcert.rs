fn main() -> std::process::ExitCode {
    lipcert::cli::main()
}
