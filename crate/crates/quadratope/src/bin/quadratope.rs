fn main() -> std::process::ExitCode {
    quadratope::cli::main_entry()
}
