use std::process::ExitCode;

fn main() -> ExitCode {
    let config = match ctxpred::cli::parse_flags(std::env::args_os()) {
        Ok(config) => config,
        Err(e) => {
            // clap's error text includes usage; exit code 2 marks bad flags.
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match ctxpred::cli::run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
