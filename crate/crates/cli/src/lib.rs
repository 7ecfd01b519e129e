//! `shforge` command-line front end.
//!
//! Exit codes: 0 on success, 1 for bad arguments or unusable input, 2 when
//! output cannot be written.

use std::ffi::OsString;
use std::fmt;

use clap::{Parser, Subcommand};

mod commands;
mod preview;

pub use commands::{EvalArgs, GenerateArgs, PreviewArgs, SplitArgs, StatsArgs};
pub use preview::{depth_colors, flow_color, preview_panel, SEGM_PALETTE};

pub const EXIT_INPUT: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "shforge",
    version,
    about = "Synthetic human clips with per-pixel ground truth"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Render a dataset.
    Generate(GenerateArgs),
    /// Assign subjects of an existing dataset to train and test.
    Split(SplitArgs),
    /// Print subject, sequence, clip and frame counts.
    Stats(StatsArgs),
    /// Score predicted segmentation and depth labels against ground truth.
    Eval(EvalArgs),
    /// Write an RGB | segmentation | depth | flow panel for one frame.
    Preview(PreviewArgs),
}

/// Marks a failure to write output, reported with exit code 2.
#[derive(Debug)]
pub(crate) struct OutputError(pub String);

impl fmt::Display for OutputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    use shforge_core::dataset_io::DatasetError;
    use shforge_core::pipeline::GenerateError;
    if err.downcast_ref::<OutputError>().is_some() {
        return EXIT_IO;
    }
    for cause in err.chain() {
        if let Some(GenerateError::Dataset(DatasetError::Io { .. })) = cause.downcast_ref() {
            return EXIT_IO;
        }
    }
    EXIT_INPUT
}

/// The error chain joined with `: `, skipping causes whose text an outer
/// message already includes.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if msg.contains(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Split(a) => commands::split(a),
        Command::Stats(a) => commands::stats(a),
        Command::Eval(a) => commands::eval(a),
        Command::Preview(a) => commands::preview(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("SHFORGE_LOG", "warn"))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            exit_code(&err)
        }
    }
}
