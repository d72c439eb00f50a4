use clap::{Parser, Subcommand};
use spikeforge_cli::config::Flags;
use spikeforge_cli::{error_json, execute, Command, Failure, EXIT_VALIDATION};

#[derive(Parser)]
#[command(
    name = "spikeforge",
    version,
    about = "Ground states, concentration prediction and spike solves for anisotropic Neumann systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Limit-system ground state, profile files and Pohozaev residuals.
    GroundState(Flags),
    /// Half-space moments of the ground state.
    Moments(Flags),
    /// Concentration functional along the radius.
    Lambda(Flags),
    /// Predicted concentration set.
    Predict(Flags),
    /// One epsilon solve from a spike planted on a boundary component.
    Solve(Flags),
    /// Epsilon sweep from every boundary component, with regime and expansion fit.
    Sweep(Flags),
    /// Run a named preset end to end.
    Reproduce {
        /// hopf-s1, hopf-s3, hopf-s7, annulus-regime-flip, annulus-degenerate,
        /// annulus-constant or ball-constant.
        #[arg(value_name = "PRESET")]
        id: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Pohozaev identities, energy scaling and the scalar oracle.
    VerifyIdentities(Flags),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                std::process::exit(0);
            }
            let _ = e.print();
            eprintln!(
                "{}",
                error_json(
                    &Failure::Error(spikeforge::Error::Format(e.kind().to_string())),
                    None
                )
            );
            std::process::exit(EXIT_VALIDATION);
        }
    };
    let (cmd, flags) = match cli.command {
        Sub::GroundState(f) => (Command::GroundState, f),
        Sub::Moments(f) => (Command::Moments, f),
        Sub::Lambda(f) => (Command::Lambda, f),
        Sub::Predict(f) => (Command::Predict, f),
        Sub::Solve(f) => (Command::Solve, f),
        Sub::Sweep(f) => (Command::Sweep, f),
        Sub::Reproduce { id, mut flags } => {
            flags.preset = Some(id);
            (Command::Reproduce, flags)
        }
        Sub::VerifyIdentities(f) => (Command::VerifyIdentities, f),
    };
    let code = match flags.into_config() {
        Ok(cfg) => execute(cmd, cfg),
        Err(e) => {
            let f = Failure::Error(e);
            eprintln!("{}", error_json(&f, None));
            f.exit_code()
        }
    };
    std::process::exit(code);
}
