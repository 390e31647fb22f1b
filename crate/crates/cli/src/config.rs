//! Per-command parameter records shared by the command line and the TOML
//! config file. Keys in the file mirror the long flags; flags win.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Fields given on the command line replace those from the file.
macro_rules! overlay {
    ($ty:ident { $($f:ident),* $(,)? }) => {
        impl $ty {
            pub fn overlay(self, base: Option<Self>) -> Self {
                let base = base.unwrap_or_default();
                $ty { $($f: self.$f.or(base.$f)),* }
            }
        }
    };
}

fn required<T: Clone>(value: &Option<T>, name: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::Usage(format!("missing required parameter --{name}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sym,
    Asym,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Random,
    ChannelAligned,
}

impl From<Policy> for ccsched_core::decodability::CombinerPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Random => Self::Random,
            Policy::ChannelAligned => Self::ChannelAligned,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Case {
    All,
    Feasible,
    Example1,
    Example2,
    Region,
    Identities,
    Numeric,
    Negative,
    Rate,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FeasibleBetaArgs {
    /// Transmit antennas.
    #[arg(long = "L")]
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub tx: Option<usize>,
    /// Receive antennas per user.
    #[arg(long = "G")]
    #[serde(rename = "G", skip_serializing_if = "Option::is_none")]
    pub rx: Option<usize>,
    /// Coded-caching gain.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    /// Users served per transmission.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<usize>,
}
overlay!(FeasibleBetaArgs { tx, rx, t, omega, delta_max });

impl FeasibleBetaArgs {
    pub fn resolve(self) -> Result<Self, CliError> {
        Ok(FeasibleBetaArgs {
            tx: Some(required(&self.tx, "L")?),
            rx: Some(required(&self.rx, "G")?),
            t: Some(required(&self.t, "t")?),
            omega: Some(required(&self.omega, "omega")?),
            delta_max: Some(self.delta_max.unwrap_or(ccsched_core::symmetric::DEFAULT_DELTA_MAX)),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ScheduleArgs {
    #[arg(long = "L")]
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub tx: Option<usize>,
    #[arg(long = "G")]
    #[serde(rename = "G", skip_serializing_if = "Option::is_none")]
    pub rx: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<usize>,
    /// Symmetric per-user stream count.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// Groups added per retained column (asymmetric mode).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Pairwise overlap threshold; defaults to t.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
    /// Greedy iteration cap per set; defaults to 50·m.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i_max: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<usize>,
    #[arg(short, long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}
overlay!(ScheduleArgs { tx, rx, t, omega, beta, mode, m, tau, i_max, delta_max, output });

impl ScheduleArgs {
    pub fn resolve(self) -> Result<Self, CliError> {
        let t = required(&self.t, "t")?;
        let mode = self.mode.unwrap_or(Mode::Sym);
        let m = self.m.unwrap_or(0);
        if mode == Mode::Sym && m != 0 {
            return Err(CliError::Usage("--m requires --mode asym".into()));
        }
        let asym = mode == Mode::Asym;
        Ok(ScheduleArgs {
            tx: Some(required(&self.tx, "L")?),
            rx: Some(required(&self.rx, "G")?),
            t: Some(t),
            omega: Some(required(&self.omega, "omega")?),
            beta: Some(required(&self.beta, "beta")?),
            mode: Some(mode),
            m: Some(m),
            tau: asym.then(|| self.tau.unwrap_or(t)),
            i_max: asym.then(|| self.i_max.unwrap_or(50 * m)),
            delta_max: Some(self.delta_max.unwrap_or(ccsched_core::symmetric::DEFAULT_DELTA_MAX)),
            output: self.output,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct VerifyArgs {
    /// Table JSON to check.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    /// Also run the random-channel oracle.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Largest accepted interference leakage.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_leakage: Option<f64>,
    /// Smallest accepted singular value of an effective matrix.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_sigma: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<Policy>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<Precision>,
    #[arg(short, long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}
overlay!(VerifyArgs { table, numeric, trials, tol_leakage, tol_sigma, policy, precision, output });

impl VerifyArgs {
    pub fn resolve(self) -> Result<Self, CliError> {
        use ccsched_core::decodability::Tolerances;
        let precision = self.precision.unwrap_or(Precision::F64);
        let tol = match precision {
            Precision::F64 => Tolerances::default(),
            Precision::F32 => Tolerances::single(),
        };
        Ok(VerifyArgs {
            table: Some(required(&self.table, "table")?),
            numeric: Some(self.numeric.unwrap_or(false)),
            trials: Some(self.trials.unwrap_or(100)),
            tol_leakage: Some(self.tol_leakage.unwrap_or(tol.leakage)),
            tol_sigma: Some(self.tol_sigma.unwrap_or(tol.sigma)),
            policy: Some(self.policy.unwrap_or(Policy::Random)),
            precision: Some(precision),
            output: self.output,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DofRegionArgs {
    #[arg(long = "L")]
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub tx: Option<usize>,
    #[arg(long = "G")]
    #[serde(rename = "G", skip_serializing_if = "Option::is_none")]
    pub rx: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<usize>,
    /// Construction attempts across all (β, m) cells.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reseeds: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<usize>,
    /// Where witness tables go; defaults next to the CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_dir: Option<PathBuf>,
    #[arg(short, long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}
overlay!(DofRegionArgs { tx, rx, t, omega, budget, reseeds, delta_max, witness_dir, output });

impl DofRegionArgs {
    pub fn resolve(self) -> Result<Self, CliError> {
        let budget = ccsched_core::dof::SearchBudget::default();
        let witness_dir = self.witness_dir.clone().unwrap_or_else(|| match &self.output {
            Some(p) => sibling(p, "-witnesses"),
            None => PathBuf::from("witnesses"),
        });
        Ok(DofRegionArgs {
            tx: Some(required(&self.tx, "L")?),
            rx: Some(required(&self.rx, "G")?),
            t: Some(required(&self.t, "t")?),
            omega: Some(required(&self.omega, "omega")?),
            budget: Some(self.budget.unwrap_or(budget.max_cells)),
            reseeds: Some(self.reseeds.unwrap_or(budget.reseeds)),
            delta_max: Some(self.delta_max.unwrap_or(budget.delta_max)),
            witness_dir: Some(witness_dir),
            output: self.output,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RateSweepArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    /// `start:step:stop` in dB, or a comma-separated list.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_power: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<Policy>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<Precision>,
    #[arg(short, long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}
overlay!(RateSweepArgs { table, snr, trials, noise_power, policy, precision, output });

impl RateSweepArgs {
    pub fn resolve(self) -> Result<Self, CliError> {
        Ok(RateSweepArgs {
            table: Some(required(&self.table, "table")?),
            snr: Some(self.snr.unwrap_or_else(|| "0:5:35".into())),
            trials: Some(self.trials.unwrap_or(200)),
            noise_power: Some(self.noise_power.unwrap_or(1.0)),
            policy: Some(self.policy.unwrap_or(Policy::ChannelAligned)),
            precision: Some(self.precision.unwrap_or(Precision::F64)),
            output: self.output,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ReproduceArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<Case>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Channel draws per SNR point in the rate case.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Channel draws per witness table in the numeric case.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric_seeds: Option<usize>,
    /// Randomized plans in the identities case.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plans: Option<usize>,
}
overlay!(ReproduceArgs { case, out_dir, trials, numeric_seeds, plans });

impl ReproduceArgs {
    pub fn resolve(self) -> Result<Self, CliError> {
        Ok(ReproduceArgs {
            case: Some(self.case.unwrap_or(Case::All)),
            out_dir: Some(self.out_dir.unwrap_or_else(|| PathBuf::from("reproduce-out"))),
            trials: Some(self.trials.unwrap_or(200)),
            numeric_seeds: Some(self.numeric_seeds.unwrap_or(100)),
            plans: Some(self.plans.unwrap_or(500)),
        })
    }
}

/// The config document: a global seed plus one optional table per command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasible_beta: Option<FeasibleBetaArgs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleArgs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyArgs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dof_region: Option<DofRegionArgs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_sweep: Option<RateSweepArgs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reproduce: Option<ReproduceArgs>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// `dir/name.csv` → `dir/name{suffix}`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = ScheduleArgs {
            tx: Some(10),
            rx: Some(3),
            t: Some(1),
            omega: Some(5),
            beta: Some(2),
            ..Default::default()
        };
        let cli = ScheduleArgs {
            rx: Some(4),
            ..Default::default()
        };
        let merged = cli.overlay(Some(file)).resolve().unwrap();
        assert_eq!((merged.tx, merged.rx, merged.mode), (Some(10), Some(4), Some(Mode::Sym)));
        assert_eq!(merged.tau, None);
    }

    #[test]
    fn resolved_config_round_trips() {
        let config = ExperimentConfig {
            seed: Some(7),
            rate_sweep: Some(
                RateSweepArgs {
                    table: Some("t.json".into()),
                    ..Default::default()
                }
                .resolve()
                .unwrap(),
            ),
            dof_region: Some(
                DofRegionArgs {
                    tx: Some(11),
                    rx: Some(8),
                    t: Some(2),
                    omega: Some(6),
                    output: Some("r.csv".into()),
                    ..Default::default()
                }
                .resolve()
                .unwrap(),
            ),
            ..Default::default()
        };
        let text = config.to_toml();
        assert!(text.contains("[rate-sweep]") && text.contains("L = 11"), "{text}");
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), config);
        assert_eq!(config.dof_region.unwrap().witness_dir, Some("r-witnesses".into()));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::parse("[schedule]\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::parse("seed = 3\n[feasible-beta]\nL = 11\nG = 8\n").is_ok());
    }

    #[test]
    fn missing_required_parameter() {
        let err = FeasibleBetaArgs::default().resolve().unwrap_err();
        assert!(matches!(err, CliError::Usage(ref s) if s.contains("--L")));
    }
}
