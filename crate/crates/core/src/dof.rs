//! Achievable DoF values for fixed `(L, G, t, Ω)`, each backed by a table.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::asymmetric::{build_asymmetric, dof_of_table, m_bound, AsymPlan, RetryLadder};
use crate::decodability::theorem1_check;
use crate::error::Result;
use crate::model::{Antennas, ScheduleTable, User};
use crate::symmetric::{feasible_beta_set, symmetric_table, SymmetricPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegionParams {
    pub antennas: Antennas,
    pub t: usize,
    pub omega: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Symmetric,
    Asymmetric,
}

#[derive(Debug, Clone)]
pub struct Witness {
    pub scheme: Scheme,
    pub beta: usize,
    pub m: usize,
    pub dof: usize,
    pub plan: Option<AsymPlan>,
    pub table: ScheduleTable,
}

/// Limits on the asymmetric search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SearchBudget {
    pub delta_max: usize,
    pub reseeds: usize,
    pub max_d_factor: usize,
    /// Construction attempts across all `(β, m)` cells.
    pub max_cells: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            delta_max: crate::symmetric::DEFAULT_DELTA_MAX,
            reseeds: 3,
            max_d_factor: 3,
            max_cells: 256,
            seed: 0,
        }
    }
}

/// Outcome of one `(β, m)` cell that did not produce a table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellFailure {
    pub beta: usize,
    pub m: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct DofRegion {
    pub params: RegionParams,
    pub symmetric: BTreeSet<usize>,
    pub asymmetric: BTreeSet<usize>,
    /// First witness found per `(scheme, DoF)`.
    pub witnesses: BTreeMap<(Scheme, usize), Witness>,
    pub failures: Vec<CellFailure>,
    pub budget_exhausted: bool,
}

fn users(omega: usize) -> Vec<User> {
    (1..=omega as User).collect()
}

/// `{Ω·β : β ∈ B_Ω}`.
pub fn symmetric_region(antennas: Antennas, t: usize, omega: usize, delta_max: usize) -> Result<BTreeSet<usize>> {
    Ok(feasible_beta_set(antennas, t, omega, delta_max)?
        .into_iter()
        .map(|b| omega * b)
        .collect())
}

/// Symmetric points plus every `Ω·β + m(t+1)` for which the decomposition
/// and reassignment construction yields a table passing the symbolic check.
pub fn explore_region(params: RegionParams, budget: SearchBudget) -> Result<DofRegion> {
    let RegionParams { antennas, t, omega } = params;
    let served = users(omega);
    let mut region = DofRegion {
        params,
        symmetric: BTreeSet::new(),
        asymmetric: BTreeSet::new(),
        witnesses: BTreeMap::new(),
        failures: Vec::new(),
        budget_exhausted: false,
    };
    let betas = feasible_beta_set(antennas, t, omega, budget.delta_max)?;
    let mut cells = 0;
    for &beta in &betas {
        let plan = SymmetricPlan::for_beta(antennas, t, omega, beta, budget.delta_max, 1)?;
        let table = symmetric_table(&plan, &served, t, antennas)?;
        let dof = omega * beta;
        region.symmetric.insert(dof);
        region.asymmetric.insert(dof);
        for scheme in [Scheme::Symmetric, Scheme::Asymmetric] {
            region.witnesses.entry((scheme, dof)).or_insert_with(|| Witness {
                scheme,
                beta,
                m: 0,
                dof,
                plan: None,
                table: table.clone(),
            });
        }
    }
    'cells: for &beta in &betas {
        let baseline = match SymmetricPlan::for_beta(antennas, t, omega, beta, budget.delta_max, 2)
            .and_then(|p| symmetric_table(&p, &served, t, antennas))
        {
            Ok(b) => b,
            Err(e) => {
                region.failures.push(CellFailure { beta, m: 0, reason: e.to_string() });
                continue;
            }
        };
        let b = baseline.columns[0].len();
        // distinct donor slots cap m at B
        let top = m_bound(antennas.rx, beta, omega, t).min(b);
        for m in 1..=top {
            let dof = omega * beta + m * (t + 1);
            if region.witnesses.contains_key(&(Scheme::Asymmetric, dof)) {
                continue;
            }
            if cells == budget.max_cells {
                region.budget_exhausted = true;
                break 'cells;
            }
            cells += 1;
            let ladder = RetryLadder {
                reseeds: budget.reseeds,
                max_d_factor: budget.max_d_factor,
                seed: crate::seed::derive(budget.seed, &format!("region/{beta}/{m}")),
                ..Default::default()
            };
            match build_asymmetric(&baseline, beta, m, ladder) {
                Ok(built) => {
                    debug_assert_eq!(dof_of_table(&built.table)?.uniform(), Some(dof));
                    region.asymmetric.insert(dof);
                    region.witnesses.insert(
                        (Scheme::Asymmetric, dof),
                        Witness {
                            scheme: Scheme::Asymmetric,
                            beta,
                            m,
                            dof,
                            plan: built.plan,
                            table: built.table,
                        },
                    );
                }
                Err(e) => region.failures.push(CellFailure { beta, m, reason: e.to_string() }),
            }
        }
    }
    Ok(region)
}

impl DofRegion {
    /// Re-runs the symbolic check on every stored witness.
    pub fn witnesses_pass(&self) -> Result<bool> {
        for w in self.witnesses.values() {
            if !theorem1_check(&w.table)?.pass || dof_of_table(&w.table)?.uniform() != Some(w.dof) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
