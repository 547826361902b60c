fn main() -> std::process::ExitCode {
    qite_core::cli::main()
}
