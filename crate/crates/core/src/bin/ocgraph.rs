fn main() -> std::process::ExitCode {
    ocgraph::cli::main_with(std::env::args_os())
}
