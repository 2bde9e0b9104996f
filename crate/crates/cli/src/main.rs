use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use mgdeform::config::Command;

#[derive(Debug, Parser)]
#[command(name = "mgdeform", version, about = "Curvature-preserving deformations of convex surfaces")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // usage errors are configuration errors; --help and --version are not
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match mgdeform::run(cli.command, &cli.config, cli.out.as_deref()) {
        Ok(status) => {
            let code = status.exit_code();
            if code != 0 {
                eprintln!("mgdeform: {} finished with status {:?}", cli.command.name(), status);
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("mgdeform: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
