//! Subcommand implementations. Every command reads one TOML configuration,
//! evaluates its grid or draw set (in deterministic row order, whatever the
//! worker count), and emits one self-describing CSV row per point.

pub mod capacity;
pub mod optimize;
pub mod robust;
pub mod surface;

use std::io::Write;
use std::path::PathBuf;

/// Failure classes mapped to process exit codes.
#[derive(Debug)]
pub enum CliFailure {
    /// Unreadable, unparsable, or inconsistent configuration (exit 2).
    Config(String),
    /// Empty feasible set in a search (exit 3).
    Infeasible(String),
    /// More than the tolerated share of points failed numerically (exit 4).
    FailureBudget(String),
}

impl CliFailure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Infeasible(_) => 3,
            Self::FailureBudget(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Config(m) | Self::Infeasible(m) | Self::FailureBudget(m) => m,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    /// Tri-state Monte Carlo switch: command default when `None`.
    pub mc: Option<bool>,
}

/// Writes header + rows to the output path (or stdout), comma-separated
/// with LF endings.
pub fn write_csv(
    out: &Option<PathBuf>,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliFailure> {
    let sink: Box<dyn Write> =
        match out {
            Some(path) => Box::new(std::fs::File::create(path).map_err(|e| {
                CliFailure::Config(format!("cannot create {}: {e}", path.display()))
            })?),
            None => Box::new(std::io::stdout().lock()),
        };
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    writer
        .write_record(header)
        .and_then(|_| {
            for row in rows {
                writer.write_record(row)?;
            }
            writer.flush().map_err(csv::Error::from)
        })
        .map_err(|e| CliFailure::Config(format!("csv write failed: {e}")))
}

/// Builds the bounded worker pool the point grid runs on.
pub fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliFailure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(count) = workers {
        builder = builder.num_threads(count.max(1));
    }
    builder
        .build()
        .map_err(|e| CliFailure::Config(format!("cannot build worker pool: {e}")))
}

/// Exit-code-4 budget: more than 10% of points carrying a numerical-failure
/// flag invalidates the run.
pub fn enforce_failure_budget(failures: usize, total: usize) -> Result<(), CliFailure> {
    if total > 0 && failures * 10 > total {
        return Err(CliFailure::FailureBudget(format!(
            "{failures} of {total} points failed numerically"
        )));
    }
    Ok(())
}

pub fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![min];
    }
    let step = (max - min) / (points - 1) as f64;
    (0..points).map(|i| min + step * i as f64).collect()
}
