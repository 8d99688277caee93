use std::process::ExitCode;

use clap::Parser;
use sky3d_cli::{cmd_compare, cmd_run, cmd_scenario, Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SKY3D_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args).map(|rows| {
            for r in rows {
                println!(
                    "seed {}: rejections={} drops={} handovers={} peak_satellite_load={}",
                    r.seed, r.rejections, r.drops, r.handovers, r.peak_satellite_load
                );
            }
        }),
        Command::Compare { a, b } => cmd_compare(a, b).map(|report| print!("{report}")),
        Command::Scenario(source) => cmd_scenario(source).map(|toml| print!("{toml}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
