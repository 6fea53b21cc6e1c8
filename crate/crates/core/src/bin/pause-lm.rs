fn main() -> std::process::ExitCode {
    pause_lm::cli::main()
}
