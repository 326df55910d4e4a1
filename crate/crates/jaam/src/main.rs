fn main() -> std::process::ExitCode {
    jaam::cli::main_with_args(std::env::args_os())
}
