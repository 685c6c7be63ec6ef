use std::process::ExitCode;

fn main() -> ExitCode {
    growthlab::cli::main()
}
