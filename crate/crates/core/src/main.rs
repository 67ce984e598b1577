fn main() -> std::process::ExitCode {
    adsel::cli::main()
}
