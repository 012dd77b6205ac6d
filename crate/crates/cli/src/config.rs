//! Command-line arguments and the resolved run configuration.
//!
//! The clap argument structs double as the serialized configuration, so the
//! JSON report echoes exactly what was requested. Plan overrides are
//! resolved into a full [`QuadraturePlan`] before the run starts.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use etalab::eta::QuadraturePlan;
use etalab::group::{DEFAULT_BFS_BUDGET, DEFAULT_QUOTIENT_BUDGET};
use etalab::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "etalab", version, about = "Delocalized eta invariants on covering spaces and the group constants behind them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub json: Option<PathBuf>,

    /// Write the convergence table here (converge only).
    #[arg(long, global = true, value_name = "PATH")]
    pub csv: Option<PathBuf>,

    /// Error target; for eta runs it replaces the plan tolerance.
    #[arg(long, global = true, value_name = "REAL")]
    pub tol: Option<f64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Seed of the randomized checks.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    pub seed: u64,

    /// Element budget of each Cayley-ball enumeration.
    #[arg(long, global = true, value_name = "N", default_value_t = DEFAULT_BFS_BUDGET)]
    pub bfs_budget: usize,

    /// Element budget of each quotient enumeration.
    #[arg(long, global = true, value_name = "N", default_value_t = DEFAULT_QUOTIENT_BUDGET)]
    pub quotient_budget: usize,

    /// Wall-time budget in seconds, checked when the run completes.
    #[arg(long, global = true, value_name = "SECONDS")]
    pub wall_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    /// Group constants, distinguishing indices, separation rates, injective radii.
    #[command(subcommand)]
    Group(GroupCommand),
    /// Eigenvalues of the operator on a finite cover, sector by sector.
    Spectrum(SpectrumArgs),
    /// Delocalized eta invariant of one class on one cover.
    Eta(EtaArgs),
    /// Eta values along a tower of covers, compared with the line.
    Converge(ConvergeArgs),
    /// Dominating functions fitted to sampled kernel traces.
    Decay(DecayArgs),
    /// Quick end-to-end consistency checks.
    Selftest,
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupCommand {
    /// Growth rates and sigma thresholds.
    Constants(ConstantsArgs),
    /// First tower index that separates a class from a finite set.
    Distinguish(DistinguishArgs),
    /// Injective radii and the separation rate along a tower.
    #[command(visible_alias = "seprate")]
    Separate(SeparateArgs),
    /// Injective radius of each quotient of a tower.
    Radius(SeparateArgs),
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsArgs {
    /// Group: z, z2, z:3, f2, free:3, cyclic:6, heisenberg, sl2z.
    #[arg(long)]
    pub group: String,
    /// BFS radius.
    #[arg(long, default_value_t = 12)]
    pub radius: u32,
    /// Conjugacy class representative, as a word (e.g. `x`, `a b a^-1`).
    #[arg(long, allow_hyphen_values = true)]
    pub class: Option<String>,
    /// Quotient tower for the uniform growth rate and separation rate.
    #[arg(long)]
    pub tower: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub theta0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta1: f64,
    /// Radius cap of the injective radii in the separation fit.
    #[arg(long, default_value_t = 8)]
    pub cap: u32,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistinguishArgs {
    #[arg(long)]
    pub group: String,
    #[arg(long, allow_hyphen_values = true)]
    pub class: String,
    #[arg(long)]
    pub tower: String,
    /// Elements to separate from the class, as comma-separated words.
    #[arg(long, allow_hyphen_values = true)]
    pub elements: String,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparateArgs {
    #[arg(long)]
    pub group: String,
    #[arg(long, allow_hyphen_values = true)]
    pub class: String,
    #[arg(long)]
    pub tower: String,
    /// Word-length cap of the injective-radius search.
    #[arg(long, default_value_t = 8)]
    pub cap: u32,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumArgs {
    /// Operator, e.g. `comp=2,m=1,c=0.3,theta=0.25,v=0.2cos1`.
    #[arg(long = "op")]
    pub operator: String,
    /// Finite cover, `n=4` or `4`.
    #[arg(long)]
    pub cover: String,
    /// Fourier modes on each side of each sector.
    #[arg(long, default_value_t = 32)]
    pub kmax: usize,
}

/// Quadrature-plan overrides shared by `eta` and `converge`.
#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanArgs {
    /// JSON file with a complete quadrature plan; flags override it.
    #[arg(long, value_name = "PATH")]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_split: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<u32>,
    #[arg(long)]
    pub bloch_panels: Option<usize>,
    /// Envelope parameter of the small-t bound.
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub flag_tol: Option<f64>,
    /// Allow the identity class on the line (potential-free operators).
    #[arg(long)]
    pub line_identity: bool,
}

impl PlanArgs {
    pub fn resolve(&self, tol: Option<f64>) -> Result<QuadraturePlan> {
        let mut plan = match &self.plan {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Parse(format!("cannot read plan {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Parse(format!("bad plan {}: {e}", path.display())))?
            }
            None => QuadraturePlan::default(),
        };
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut plan.t_min, self.t_min);
        set(&mut plan.t_split, self.t_split);
        set(&mut plan.mu, self.mu);
        set(&mut plan.flag_tol, self.flag_tol);
        set(&mut plan.tol, tol);
        if self.t_max.is_some() {
            plan.t_max = self.t_max;
        }
        if let Some(o) = self.order {
            plan.order = o;
        }
        if let Some(d) = self.max_depth {
            plan.max_depth = d;
        }
        if let Some(p) = self.bloch_panels {
            plan.bloch_panels = p;
        }
        plan.line_identity |= self.line_identity;
        plan.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(plan)
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaArgs {
    #[arg(long = "op")]
    pub operator: String,
    /// `n=4`, `4` or `line`.
    #[arg(long)]
    pub cover: String,
    /// Deck-group class `a` (an integer, reduced mod n on finite covers).
    #[arg(long, allow_hyphen_values = true)]
    pub class: i64,
    #[command(flatten)]
    pub plan: PlanArgs,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeArgs {
    #[arg(long = "op")]
    pub operator: String,
    /// Cover degrees, e.g. `2,4,8,16,32,64` or `2..8`.
    #[arg(long)]
    pub tower: String,
    #[arg(long, allow_hyphen_values = true)]
    pub class: i64,
    #[command(flatten)]
    pub plan: PlanArgs,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayArgs {
    #[arg(long = "op")]
    pub operator: String,
    #[arg(long)]
    pub cover: String,
    /// Times, comma-separated.
    #[arg(long, default_value = "1,1.5,2,2.5,3,3.5,4,5,6")]
    pub t_grid: String,
    /// Classes, comma-separated.
    #[arg(long, default_value = "1,2")]
    pub classes: String,
    #[arg(long, default_value_t = 1.5)]
    pub mu: f64,
}

/// Budgets of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub bfs_elements: usize,
    pub quotient_elements: usize,
    pub wall_time_secs: Option<f64>,
}

/// Everything that determines a run's payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Resolved quadrature plan of eta and converge runs.
    pub plan: Option<QuadraturePlan>,
    pub tol: Option<f64>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub budget: Budget,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        if let Some(t) = cli.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Parse(format!("--tol must be positive, got {t}")));
            }
        }
        if cli.threads == Some(0) {
            return Err(Error::Parse("--threads must be positive".into()));
        }
        if cli.wall_time.is_some_and(|w| !(w > 0.0)) {
            return Err(Error::Parse("--wall-time must be positive".into()));
        }
        if cli.csv.is_some() && !matches!(cli.command, Command::Converge(_)) {
            return Err(Error::Parse("--csv applies to converge only".into()));
        }
        let plan = match &cli.command {
            Command::Eta(a) => Some(a.plan.resolve(cli.tol)?),
            Command::Converge(a) => Some(a.plan.resolve(cli.tol)?),
            _ => None,
        };
        Ok(RunConfig {
            command: cli.command,
            plan,
            tol: cli.tol,
            seed: cli.seed,
            threads: cli.threads,
            json: cli.json,
            csv: cli.csv,
            budget: Budget {
                bfs_elements: cli.bfs_budget,
                quotient_elements: cli.quotient_budget,
                wall_time_secs: cli.wall_time,
            },
        })
    }
}
