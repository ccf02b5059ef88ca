fn main() -> std::process::ExitCode {
    armdyn::cli::main_entry()
}
