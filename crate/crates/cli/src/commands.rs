use std::fs;
use std::path::{Path, PathBuf};

use ccsched_core::asymmetric::{build_asymmetric, dof_of_table, RetryLadder};
use ccsched_core::decodability::{numeric_trials, theorem1_check, Tolerances};
use ccsched_core::dof::{explore_region, DofRegion, RegionParams, SearchBudget};
use ccsched_core::model::Antennas;
use ccsched_core::rate::{parse_grid, snr_sweep, SweepConfig};
use ccsched_core::symmetric::{feasible_beta_set, symmetric_table, SymmetricPlan};
use ccsched_core::ScheduleTable;
use serde_json::json;

use crate::config::{sibling, DofRegionArgs, ExperimentConfig, FeasibleBetaArgs, Mode, Precision, RateSweepArgs, ScheduleArgs, VerifyArgs};
use crate::CliError;

/// Writes to `path`, creating parent directories, or to stdout.
pub(crate) fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            fs::write(p, text).map_err(|e| CliError::io(p, e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Data files (tables, CSV) carry their resolved config in `<stem>.config.toml`.
fn emit_with_config(path: Option<&Path>, text: &str, resolved: &ExperimentConfig) -> Result<(), CliError> {
    emit(path, text)?;
    if let Some(p) = path {
        emit(Some(&sibling(p, ".config.toml")), &resolved.to_toml())?;
    }
    Ok(())
}

pub(crate) fn load_table(path: &Path) -> Result<ScheduleTable, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(ScheduleTable::from_json(&text)?)
}

pub(crate) fn feasible_beta(args: &FeasibleBetaArgs) -> Result<(), CliError> {
    let set = feasible_beta_set(
        Antennas::new(args.tx.unwrap(), args.rx.unwrap()),
        args.t.unwrap(),
        args.omega.unwrap(),
        args.delta_max.unwrap(),
    )?;
    let line: Vec<String> = set.iter().map(|b| b.to_string()).collect();
    println!("{}", line.join(" "));
    Ok(())
}

pub(crate) fn build_schedule(args: &ScheduleArgs) -> Result<ScheduleTable, CliError> {
    let antennas = Antennas::new(args.tx.unwrap(), args.rx.unwrap());
    let (t, omega, beta) = (args.t.unwrap(), args.omega.unwrap(), args.beta.unwrap());
    let users: Vec<u32> = (1..=omega as u32).collect();
    let asym = args.mode == Some(Mode::Asym);
    let plan = SymmetricPlan::for_beta(antennas, t, omega, beta, args.delta_max.unwrap(), if asym { 2 } else { 1 })?;
    let baseline = symmetric_table(&plan, &users, t, antennas)?;
    if !asym {
        return Ok(baseline);
    }
    let ladder = RetryLadder {
        tau: args.tau,
        i_max: args.i_max,
        ..Default::default()
    };
    Ok(build_asymmetric(&baseline, beta, args.m.unwrap(), ladder)?.table)
}

pub(crate) fn schedule(args: &ScheduleArgs, resolved: &ExperimentConfig) -> Result<(), CliError> {
    let table = build_schedule(args)?;
    emit_with_config(args.output.as_deref(), &(table.to_json() + "\n"), resolved)
}

pub(crate) fn verify(args: &VerifyArgs, seed: u64, resolved: &ExperimentConfig) -> Result<(), CliError> {
    let table = load_table(args.table.as_deref().unwrap())?;
    let symbolic = theorem1_check(&table)?;
    let numeric = if args.numeric.unwrap() {
        let tol = Tolerances {
            leakage: args.tol_leakage.unwrap(),
            sigma: args.tol_sigma.unwrap(),
        };
        let (trials, policy) = (args.trials.unwrap(), args.policy.unwrap().into());
        Some(match args.precision.unwrap() {
            Precision::F64 => numeric_trials::<f64>(&table, trials, seed, policy, tol)?,
            Precision::F32 => numeric_trials::<f32>(&table, trials, seed, policy, tol)?,
        })
    } else {
        None
    };
    let pass = symbolic.pass && numeric.as_ref().is_none_or(|n| n.pass());
    let report = json!({
        "config": resolved,
        "table": {
            "omega": table.omega(),
            "t": table.t,
            "L": table.antennas.tx,
            "G": table.antennas.rx,
            "columns": table.columns.len(),
            "dof": dof_of_table(&table)?,
        },
        "symbolic": symbolic,
        "numeric": numeric,
        "pass": pass,
    });
    emit(args.output.as_deref(), &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Failed("table failed verification; see report".into()))
    }
}

/// Writes one JSON file per witness into `dir` and returns the region CSV.
/// Paths in the CSV are relative to `base`.
pub(crate) fn write_region(region: &DofRegion, dir: &Path, base: &Path) -> Result<String, CliError> {
    let p = region.params;
    let mut csv = String::from("scheme,omega,t,beta,m,dof,witness_file\n");
    for ((scheme, dof), w) in &region.witnesses {
        let scheme = match scheme {
            ccsched_core::dof::Scheme::Symmetric => "symmetric",
            ccsched_core::dof::Scheme::Asymmetric => "asymmetric",
        };
        let file = dir.join(format!("{scheme}-omega{}-t{}-dof{dof}.json", p.omega, p.t));
        emit(Some(&file), &(w.table.to_json() + "\n"))?;
        let shown: PathBuf = file.strip_prefix(base).map(Path::to_path_buf).unwrap_or(file.clone());
        csv.push_str(&format!(
            "{scheme},{},{},{},{},{dof},{}\n",
            p.omega,
            p.t,
            w.beta,
            w.m,
            shown.display()
        ));
    }
    Ok(csv)
}

pub(crate) fn dof_region(args: &DofRegionArgs, seed: u64, resolved: &ExperimentConfig) -> Result<(), CliError> {
    let params = RegionParams {
        antennas: Antennas::new(args.tx.unwrap(), args.rx.unwrap()),
        t: args.t.unwrap(),
        omega: args.omega.unwrap(),
    };
    let budget = SearchBudget {
        delta_max: args.delta_max.unwrap(),
        reseeds: args.reseeds.unwrap(),
        max_cells: args.budget.unwrap(),
        seed,
        ..Default::default()
    };
    let region = explore_region(params, budget)?;
    if region.budget_exhausted {
        eprintln!("{}", json!({"warning": "budget-exhausted", "cells": budget.max_cells}));
    }
    let base = args
        .output
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let csv = write_region(&region, args.witness_dir.as_deref().unwrap(), &base)?;
    emit_with_config(args.output.as_deref(), &csv, resolved)
}

pub(crate) fn rate_sweep(args: &RateSweepArgs, seed: u64, resolved: &ExperimentConfig) -> Result<(), CliError> {
    let table = load_table(args.table.as_deref().unwrap())?;
    if !theorem1_check(&table)?.pass {
        return Err(CliError::Failed("table is not linearly decodable".into()));
    }
    let grid = parse_grid(args.snr.as_deref().unwrap())?;
    let config = SweepConfig {
        trials: args.trials.unwrap(),
        seed,
        noise_power: args.noise_power.unwrap(),
        policy: args.policy.unwrap().into(),
    };
    let csv = match args.precision.unwrap() {
        Precision::F64 => snr_sweep::<f64>(&table, &grid, &config)?.to_csv(),
        Precision::F32 => snr_sweep::<f32>(&table, &grid, &config)?.to_csv(),
    };
    emit_with_config(args.output.as_deref(), &csv, resolved)
}
