fn main() -> std::process::ExitCode {
    circulate_cli::main_with_args(std::env::args_os())
}
