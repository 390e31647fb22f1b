//! Reference cases: the two worked examples, the feasible-set values, the
//! DoF regions, the plan identities, the numeric oracle, negative cases and
//! the rate trends. Every artifact is a pure function of the resolved config.

use std::collections::BTreeSet;
use std::path::Path;

use ccsched_core::asymmetric::{
    assemble_table, build_asymmetric, dof_of_table, m_bound, solve_plan, CandidateCollection, RetryLadder, TableDof,
};
use ccsched_core::decodability::{
    build_beamformers, theorem1_check, numeric_trials, ChannelRealization, CombinerPolicy, Tolerances, Violation,
};
use ccsched_core::dof::{explore_region, DofRegion, RegionParams, SearchBudget};
use ccsched_core::model::{column_multiplicities, Antennas, MulticastGroup, Replication, ScheduleColumn};
use ccsched_core::rate::{snr_sweep, SweepConfig};
use ccsched_core::symmetric::{feasible_beta_set, symmetric_table, SymmetricPlan, DEFAULT_DELTA_MAX};
use ccsched_core::{seed, Error, ScheduleTable, Sweep};
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::commands::{emit, write_region};
use crate::config::{Case, ExperimentConfig, ReproduceArgs};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub case: &'static str,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(case: &'static str, name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            case,
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}/{}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.case,
            self.name,
            self.detail
        )
    }
}

pub const REFERENCE_REGIONS: [(usize, usize, &[usize], &[usize]); 3] = [
    (4, 1, &[4, 8, 12, 16], &[4, 6, 8, 10, 12, 14, 16, 18, 20]),
    (6, 2, &[6, 12, 18], &[6, 9, 12, 15, 18, 21, 24, 27, 30]),
    (8, 3, &[8, 16], &[8, 12, 16, 20, 24, 28, 32, 36, 40]),
];

fn users(omega: usize) -> Vec<u32> {
    (1..=omega as u32).collect()
}

fn column(groups: &[&str]) -> ScheduleColumn {
    ScheduleColumn::new(groups.iter().map(|g| digits(g)).collect())
}

fn digits(s: &str) -> MulticastGroup {
    MulticastGroup::new(s.chars().map(|c| c.to_digit(10).expect("digit") as u32).collect()).expect("group literal")
}

fn set_str(s: &BTreeSet<usize>) -> String {
    let v: Vec<String> = s.iter().map(|x| x.to_string()).collect();
    format!("{{{}}}", v.join(","))
}

/// The symmetric table of the second worked example, as printed.
pub fn example2_baseline() -> ScheduleTable {
    ScheduleTable {
        t: 2,
        antennas: Antennas::new(11, 6),
        users: users(5),
        columns: vec![
            column(&["123", "124", "345", "235", "145"]),
            column(&["125", "134", "234", "245", "135"]),
        ],
        replication: Replication::default(),
    }
}

/// The printed collections `C_1` (donor = column 2) and `C_2` (donor = column 1).
pub fn example2_collections() -> [(usize, [[&'static str; 3]; 5]); 2] {
    [
        (
            1,
            [
                ["125", "134", "234"],
                ["125", "234", "135"],
                ["134", "245", "125"],
                ["134", "245", "135"],
                ["234", "135", "245"],
            ],
        ),
        (
            0,
            [
                ["123", "345", "124"],
                ["123", "145", "235"],
                ["124", "345", "235"],
                ["124", "235", "145"],
                ["345", "123", "145"],
            ],
        ),
    ]
}

fn feasible() -> Result<Vec<Check>, CliError> {
    let cases: [(usize, usize, usize, usize, &[usize]); 4] = [
        (11, 8, 2, 4, &[3, 6]),
        (10, 3, 1, 3, &[2]),
        (10, 3, 1, 5, &[2]),
        (10, 3, 1, 10, &[1]),
    ];
    cases
        .iter()
        .map(|&(l, g, t, omega, want)| {
            let got = feasible_beta_set(Antennas::new(l, g), t, omega, DEFAULT_DELTA_MAX)?;
            let want: BTreeSet<usize> = want.iter().copied().collect();
            Ok(Check::new(
                "feasible",
                format!("L={l},G={g},t={t},omega={omega}"),
                got == want,
                format!("got {} expected {}", set_str(&got), set_str(&want)),
            ))
        })
        .collect()
}

fn example1(out: &Path) -> Result<Vec<Check>, CliError> {
    let a = Antennas::new(10, 3);
    let mut checks = Vec::new();
    let set = feasible_beta_set(a, 1, 5, DEFAULT_DELTA_MAX)?;
    checks.push(Check::new("example1", "feasible-set", set == BTreeSet::from([2]), set_str(&set)));
    let plan = SymmetricPlan::for_beta(a, 1, 5, 2, DEFAULT_DELTA_MAX, 2)?;
    let baseline = symmetric_table(&plan, &users(5), 1, a)?;
    let dof_ref = dof_of_table(&baseline)?;
    checks.push(Check::new("example1", "baseline-dof", dof_ref == TableDof::Uniform(10), format!("{dof_ref:?}")));
    let p = solve_plan(plan.b, plan.s, 2, a.rx, 2, 5, 1)?;
    checks.push(Check::new(
        "example1",
        "plan",
        (p.d, p.r, p.delta_tilde, p.s_tilde) == (5, 2, 7, 10),
        format!("d={} r={} delta_tilde={} S_tilde={}", p.d, p.r, p.delta_tilde, p.s_tilde),
    ));
    let built = build_asymmetric(&baseline, 2, 2, RetryLadder::default())?;
    let table = &built.table;
    let shape = table.columns.len() == 10 && table.columns.iter().all(|c| c.len() == 7);
    let profiles_ok = table.multiplicities()?.iter().all(|m| {
        let mut v: Vec<usize> = m.beta.values().copied().collect();
        v.sort_unstable();
        v == [2, 3, 3, 3, 3]
    });
    let dof = dof_of_table(table)?;
    let symbolic = theorem1_check(table)?.pass;
    checks.push(Check::new(
        "example1",
        "assembled",
        shape && profiles_ok && dof == TableDof::Uniform(14) && symbolic,
        format!(
            "{} columns of {} groups, profiles (3,3,3,3,2): {profiles_ok}, DoF {dof:?}, symbolic pass: {symbolic}",
            table.columns.len(),
            table.columns[0].len()
        ),
    ));
    emit(Some(&out.join("example1_baseline.json")), &(baseline.to_json() + "\n"))?;
    emit(Some(&out.join("example1_table.json")), &(table.to_json() + "\n"))?;
    Ok(checks)
}

fn example2(out: &Path) -> Result<Vec<Check>, CliError> {
    let baseline = example2_baseline();
    let mut checks = Vec::new();
    let set = feasible_beta_set(baseline.antennas, 2, 5, DEFAULT_DELTA_MAX)?;
    checks.push(Check::new("example2", "feasible-set", set.contains(&3), set_str(&set)));
    let dof_ref = dof_of_table(&baseline)?;
    checks.push(Check::new("example2", "baseline-dof", dof_ref == TableDof::Uniform(15), format!("{dof_ref:?}")));
    let plan = solve_plan(5, 2, 3, 6, 3, 5, 2)?;
    checks.push(Check::new(
        "example2",
        "plan",
        (plan.d, plan.r, plan.delta_tilde, plan.s_tilde) == (5, 3, 8, 10),
        format!("d={} r={} delta_tilde={} S_tilde={}", plan.d, plan.r, plan.delta_tilde, plan.s_tilde),
    ));
    let mut collections = Vec::new();
    for (i, (donor, sets)) in example2_collections().into_iter().enumerate() {
        let sets: Vec<Vec<MulticastGroup>> = sets.iter().map(|s| s.iter().map(|g| digits(g)).collect()).collect();
        let c = CandidateCollection::from_groups(donor, &baseline.columns[donor], &sets)?;
        let valid = c.validate(3, 3, 2);
        checks.push(Check::new(
            "example2",
            format!("collection-{}", i + 1),
            valid.is_ok(),
            valid.map_or_else(|e| e.to_string(), |_| "r=3, distinct 3-sets, overlap <= 2".into()),
        ));
        collections.push(c);
    }
    let table = assemble_table(&baseline, &collections, &plan)?;
    let report = theorem1_check(&table)?;
    let dof = dof_of_table(&table)?;
    let tight = report
        .columns
        .iter()
        .flat_map(|c| c.loads.iter().map(move |l| (c.column, l)))
        .find(|(_, l)| l.outside == 10 && l.theta == 1 && l.load() == 11);
    checks.push(Check::new(
        "example2",
        "assembled",
        dof == TableDof::Uniform(24) && report.pass && table.columns.len() == 10 && tight.is_some(),
        format!(
            "delta_tilde={} S_tilde={} DoF {dof:?}, symbolic pass: {}, 10+1 <= 11 at {}",
            table.replication.delta_tilde,
            table.columns.len(),
            report.pass,
            tight.map_or("none".into(), |(c, l)| format!("column {c}, {}", l.group))
        ),
    ));
    let built = build_asymmetric(&baseline, 3, 3, RetryLadder::default())?;
    let ok = dof_of_table(&built.table)? == TableDof::Uniform(24) && theorem1_check(&built.table)?.pass;
    checks.push(Check::new("example2", "greedy-build", ok, "balanced greedy reaches DoF 24"));
    emit(Some(&out.join("example2_table.json")), &(table.to_json() + "\n"))?;
    emit(Some(&out.join("example2_greedy_table.json")), &(built.table.to_json() + "\n"))?;
    Ok(checks)
}

fn regions(seed: u64) -> Result<Vec<DofRegion>, CliError> {
    REFERENCE_REGIONS.iter()
        .map(|&(omega, t, _, _)| {
            let params = RegionParams {
                antennas: Antennas::new(11, 8),
                t,
                omega,
            };
            let budget = SearchBudget {
                seed,
                ..Default::default()
            };
            Ok(explore_region(params, budget)?)
        })
        .collect()
}

fn region_sets(regions: &[DofRegion], out: &Path) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    for (region, &(omega, t, sym, asym)) in regions.iter().zip(REFERENCE_REGIONS.iter()) {
        let name = format!("omega={omega},t={t}");
        let sym: BTreeSet<usize> = sym.iter().copied().collect();
        let asym: BTreeSet<usize> = asym.iter().copied().collect();
        let witnessed = region.witnesses_pass()?;
        checks.push(Check::new(
            "region",
            format!("{name}/symmetric"),
            region.symmetric == sym && witnessed,
            format!("got {} expected {}", set_str(&region.symmetric), set_str(&sym)),
        ));
        let missing: BTreeSet<usize> = asym.difference(&region.asymmetric).copied().collect();
        checks.push(Check::new(
            "region",
            format!("{name}/asymmetric"),
            region.asymmetric == asym && witnessed,
            format!(
                "got {} expected {} (missing {})",
                set_str(&region.asymmetric),
                set_str(&asym),
                set_str(&missing)
            ),
        ));
        let dir = out.join(format!("region_omega{omega}_t{t}_witnesses"));
        let csv = write_region(region, &dir, out)?;
        emit(Some(&out.join(format!("region_omega{omega}_t{t}.csv"))), &csv)?;
    }
    Ok(checks)
}

/// Random accepted plans over Ω ≤ 8; every built table must satisfy the
/// replication identities and group conservation exactly.
fn identities(plans: usize, seed: u64) -> Result<Vec<Check>, CliError> {
    let mut rng = seed::rng(seed, "identities");
    let (mut accepted, mut attempts, mut violations) = (0, 0, Vec::new());
    while accepted < plans && attempts < 200 * plans {
        attempts += 1;
        let omega = rng.random_range(3..=8usize);
        let t = rng.random_range(1..=omega - 2);
        let a = Antennas::new(rng.random_range(t + 1..=16), rng.random_range(1..=8));
        let Ok(betas) = feasible_beta_set(a, t, omega, DEFAULT_DELTA_MAX) else { continue };
        let betas: Vec<usize> = betas.into_iter().collect();
        if betas.is_empty() {
            continue;
        }
        let beta = betas[rng.random_range(0..betas.len())];
        let Ok(plan) = SymmetricPlan::for_beta(a, t, omega, beta, DEFAULT_DELTA_MAX, 2) else { continue };
        let top = m_bound(a.rx, beta, omega, t).min(plan.b);
        if top == 0 {
            continue;
        }
        let m = rng.random_range(1..=top);
        let baseline = symmetric_table(&plan, &users(omega), t, a)?;
        let ladder = RetryLadder {
            reseeds: 1,
            seed: rng.random(),
            ..Default::default()
        };
        let Ok(built) = build_asymmetric(&baseline, beta, m, ladder) else { continue };
        accepted += 1;
        let p = built.plan.expect("m > 0 has a plan");
        let table = &built.table;
        let ok = p.m * p.d == p.b * p.r
            && p.delta_tilde * p.b == (p.b + p.m) * p.d
            && p.s_tilde == p.d * p.s
            && p.identities_hold()
            && table.columns.len() == p.s_tilde
            && table.columns.iter().all(|c| c.len() == p.b + p.m)
            && built.collections.iter().all(|c| c.validate(p.m, p.r, p.tau).is_ok())
            && table.conservation().ok() == Some(table.subpacketization_factor());
        if !ok {
            violations.push(format!("omega={omega} t={t} L={} G={} beta={beta} m={m}", a.tx, a.rx));
        }
    }
    Ok(vec![Check::new(
        "identities",
        "identities",
        accepted == plans && violations.is_empty(),
        format!(
            "{accepted} accepted plans in {attempts} draws, {} violations{}",
            violations.len(),
            violations.first().map_or(String::new(), |v| format!(" (first: {v})"))
        ),
    )])
}

fn numeric(regions: &[DofRegion], seeds: usize, seed: u64) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    for region in regions {
        let p = region.params;
        let (mut tables, mut failures, mut max_leak, mut min_sigma) = (0, 0, 0f64, f64::INFINITY);
        let mut first = None;
        for ((_, dof), w) in &region.witnesses {
            let s = seed::derive(seed, &format!("witness/{}/{}/{dof}", p.omega, p.t));
            let summary = numeric_trials::<f64>(&w.table, seeds, s, CombinerPolicy::Random, Tolerances::default())?;
            tables += 1;
            failures += summary.failures;
            max_leak = max_leak.max(summary.max_leakage);
            min_sigma = min_sigma.min(summary.min_sigma);
            if first.is_none() {
                first = summary.first_failure.map(|f| format!("DoF {dof}: {f}"));
            }
        }
        checks.push(Check::new(
            "numeric",
            format!("omega={},t={}", p.omega, p.t),
            failures == 0,
            format!(
                "{tables} witness tables x {seeds} seeds, {failures} failures, max leakage {max_leak:.2e}, min sigma {min_sigma:.3e}{}",
                first.map_or(String::new(), |f| format!(", first: {f}"))
            ),
        ));
    }
    Ok(checks)
}

/// One-unit C1 violation: groups {2,5} and {4,5} carry load L+1.
pub fn c1_violation_table() -> ScheduleTable {
    ScheduleTable {
        t: 1,
        antennas: Antennas::new(9, 3),
        users: users(5),
        columns: vec![column(&["12", "13", "14", "23", "25", "34", "45"])],
        replication: Replication::default(),
    }
}

fn negative(seed: u64) -> Result<Vec<Check>, CliError> {
    let table = c1_violation_table();
    let report = theorem1_check(&table)?;
    let witness = report.witnesses().find_map(|w| match w {
        Violation::C1 { group, outside, theta, limit, .. } if outside + theta == limit + 1 => Some(group.clone()),
        _ => None,
    });
    let mut checks = vec![Check::new(
        "negative",
        "c1-witness",
        !report.pass && witness.is_some(),
        format!("symbolic pass: {}, witness {}", report.pass, witness.as_ref().map_or("none".into(), |g| g.to_string())),
    )];
    let mult = column_multiplicities(&table.columns[0], &table.users)?;
    let mut deficient = 0;
    for trial in 0..100 {
        let ch = ChannelRealization::<f64>::draw(&table.users, table.antennas, 1.0, seed::derive(seed, &format!("negative/{trial}")));
        if let Err(Error::NullityDeficient { group, .. }) = build_beamformers(&table.columns[0], &table.users, &ch, CombinerPolicy::Random) {
            deficient += usize::from(mult.theta.contains_key(&group));
        }
    }
    checks.push(Check::new(
        "negative",
        "nullity-deficiency",
        deficient >= 99,
        format!("{deficient}/100 seeds deficient"),
    ));
    let rejected = solve_plan(5, 2, 4, 6, 3, 5, 2);
    checks.push(Check::new(
        "negative",
        "m-above-bound",
        matches!(rejected, Err(Error::InfeasibleM { m: 4, bound: 3 })),
        format!("{rejected:?}"),
    ));
    Ok(checks)
}

fn rate(trials: usize, seed: u64, out: &Path) -> Result<Vec<Check>, CliError> {
    let a = Antennas::new(10, 3);
    let plan = SymmetricPlan::for_beta(a, 1, 5, 2, DEFAULT_DELTA_MAX, 2)?;
    let baseline = symmetric_table(&plan, &users(5), 1, a)?;
    let grid: Vec<f64> = (0..=7).map(|i| 5.0 * i as f64).collect();
    let config = SweepConfig {
        trials,
        seed,
        ..Default::default()
    };
    let mut sweeps: Vec<Sweep> = Vec::new();
    for m in 0..=2 {
        let table = build_asymmetric(&baseline, 2, m, RetryLadder::default())?.table;
        let sweep = snr_sweep::<f64>(&table, &grid, &config)?;
        emit(Some(&out.join(format!("rate_dof{}.csv", sweep.dof))), &sweep.to_csv())?;
        sweeps.push(sweep);
    }
    let mut checks: Vec<Check> = sweeps
        .iter()
        .map(|s| {
            let mono = s.points.windows(2).all(|w| w[1].symmetric_rate >= w[0].symmetric_rate);
            Check::new("rate", format!("monotone/dof{}", s.dof), mono, format!("{} SNR points", s.points.len()))
        })
        .collect();
    let at30 = |s: &Sweep| s.points.iter().find(|p| p.snr_db == 30.0).map_or(0.0, |p| p.symmetric_rate);
    let (low, high) = (&sweeps[0], &sweeps[2]);
    checks.push(Check::new(
        "rate",
        "ordering-30dB",
        at30(high) > at30(low),
        format!("DoF {}: {:.3}, DoF {}: {:.3}", high.dof, at30(high), low.dof, at30(low)),
    ));
    let ratio = high.slope(25.0).zip(low.slope(25.0)).map(|(h, l)| h / l).unwrap_or(f64::NAN);
    checks.push(Check::new(
        "rate",
        "slope-ratio",
        (ratio - 1.4).abs() <= 0.15 * 1.4,
        format!("{ratio:.3} over 25-35 dB, target 1.4 +/- 15%"),
    ));
    Ok(checks)
}

fn wants(case: Case, which: Case) -> bool {
    case == Case::All || case == which
}

pub fn run_cases(args: &ReproduceArgs, seed: u64) -> Result<Vec<Check>, CliError> {
    let case = args.case.unwrap_or(Case::All);
    let out = args.out_dir.as_deref().unwrap_or(Path::new("reproduce-out"));
    let mut checks = Vec::new();
    if wants(case, Case::Feasible) {
        checks.extend(feasible()?);
    }
    if wants(case, Case::Example1) {
        checks.extend(example1(out)?);
    }
    if wants(case, Case::Example2) {
        checks.extend(example2(out)?);
    }
    if wants(case, Case::Region) || wants(case, Case::Numeric) {
        let regions = regions(seed)?;
        if wants(case, Case::Region) {
            checks.extend(region_sets(&regions, out)?);
        }
        if wants(case, Case::Numeric) {
            checks.extend(numeric(&regions, args.numeric_seeds.unwrap_or(100), seed)?);
        }
    }
    if wants(case, Case::Identities) {
        checks.extend(identities(args.plans.unwrap_or(500), seed)?);
    }
    if wants(case, Case::Negative) {
        checks.extend(negative(seed)?);
    }
    if wants(case, Case::Rate) {
        checks.extend(rate(args.trials.unwrap_or(200), seed, out)?);
    }
    Ok(checks)
}

pub(crate) fn run(args: &ReproduceArgs, seed: u64, resolved: &ExperimentConfig) -> Result<(), CliError> {
    let out = args.out_dir.clone().expect("resolved");
    let checks = run_cases(args, seed)?;
    let mut text = String::new();
    for c in &checks {
        text.push_str(&c.line());
        text.push('\n');
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    text.push_str(&format!("{} passed, {failed} failed\n", checks.len() - failed));
    print!("{text}");
    emit(Some(&out.join("summary.txt")), &text)?;
    let summary = json!({ "config": resolved, "checks": checks, "failed": failed });
    emit(
        Some(&out.join("summary.json")),
        &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    )?;
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{failed} of {} checks failed", checks.len())))
    }
}
