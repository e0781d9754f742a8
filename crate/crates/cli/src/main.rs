use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::new().filter_level(log::LevelFilter::Trace).parse_default_env().init();
    let stdin = io::stdin();
    let code = promptmine_cli::run(std::env::args_os(), &mut stdin.lock(), &mut io::stdout(), &mut io::stderr());
    ExitCode::from(code as u8)
}
