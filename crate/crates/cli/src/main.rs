use std::process::ExitCode;

fn main() -> ExitCode {
    let code = gtruth_cli::run(
        std::env::args_os(),
        std::env::vars().collect(),
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    );
    ExitCode::from(code)
}
