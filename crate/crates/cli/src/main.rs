use std::io::IsTerminal;

fn main() {
    let stdout = std::io::stdout();
    let terminal = stdout.is_terminal();
    let mut out = stdout.lock();
    let mut err = std::io::stderr().lock();
    let code = drawdown_cli::run(
        std::env::args_os().skip(1),
        &mut drawdown_cli::Io {
            stdout: &mut out,
            stderr: &mut err,
            stdout_is_terminal: terminal,
        },
    );
    drop(out);
    std::process::exit(code);
}
