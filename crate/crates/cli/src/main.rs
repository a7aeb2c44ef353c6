use std::process::ExitCode;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let args = std::env::args().collect();
    let code = reelmind::cli::main_with(args, &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code)
}
