fn main() -> std::process::ExitCode {
    ballistic::cli::main()
}
