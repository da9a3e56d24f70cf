fn main() -> std::process::ExitCode {
    uiloop_service::cli::main()
}
