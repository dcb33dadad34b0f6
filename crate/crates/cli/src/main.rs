fn main() -> std::process::ExitCode {
    geomq_cli::main_with(std::env::args_os())
}
