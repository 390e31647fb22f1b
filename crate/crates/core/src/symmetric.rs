//! Reference scheduling with an equal number of streams per user.
//!
//! All `(t+1)`-subsets of the served users are first partitioned into `Ŝ`
//! base columns in which every user appears exactly `β̂` times. The base
//! columns are then replicated `δ` times and merged `η` at a time, giving
//! `S = δŜ/η` columns with `β = ηβ̂` streams per user.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    binomial, enumerate_groups, gcd, Antennas, MulticastGroup, Replication, ScheduleColumn,
    ScheduleTable, User,
};

/// Default cap on the replication factor `δ` when enumerating feasible `β`.
pub const DEFAULT_DELTA_MAX: usize = 12;

const SEARCH_NODE_LIMIT: u64 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HatParams {
    pub beta_hat: usize,
    pub b_hat: usize,
    pub s_hat: usize,
}

pub fn hat_params(omega: usize, t: usize) -> Result<HatParams> {
    if omega < t + 1 {
        return Err(Error::RejectedParameters(format!(
            "Ω = {omega} < t+1 = {}",
            t + 1
        )));
    }
    let g = gcd(t + 1, omega);
    let b_hat = omega / g;
    let total = binomial(omega as u64, t as u64 + 1) as usize;
    debug_assert_eq!(total % b_hat, 0);
    Ok(HatParams {
        beta_hat: (t + 1) / g,
        b_hat,
        s_hat: total / b_hat,
    })
}

/// Whether `η` satisfies the antenna bounds of the feasible set.
fn eta_admissible(hat: HatParams, tx: usize, rx: usize, t: usize, omega: usize, eta: usize) -> bool {
    let outside = omega - t - 1;
    eta * (1 + outside * hat.s_hat * hat.beta_hat) <= tx * hat.s_hat && eta * hat.beta_hat <= rx
}

fn smallest_delta(hat: HatParams, eta: usize, delta_max: usize, min_columns: usize) -> Option<usize> {
    (1..=delta_max).find(|&d| (d * hat.s_hat) % eta == 0 && d * hat.s_hat / eta >= min_columns)
}

/// Per-user stream counts `β = ηβ̂` reachable with some `δ ≤ delta_max`.
pub fn feasible_beta_set(
    antennas: Antennas,
    t: usize,
    omega: usize,
    delta_max: usize,
) -> Result<BTreeSet<usize>> {
    if delta_max == 0 {
        return Err(Error::RejectedParameters("delta_max must be ≥ 1".into()));
    }
    let hat = hat_params(omega, t)?;
    let mut out = BTreeSet::new();
    let mut eta = 1;
    while eta_admissible(hat, antennas.tx, antennas.rx, t, omega, eta) {
        if smallest_delta(hat, eta, delta_max, 1).is_some() {
            out.insert(eta * hat.beta_hat);
        }
        eta += 1;
    }
    Ok(out)
}

/// Resolved parameters of one symmetric table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SymmetricPlan {
    pub hat: HatParams,
    pub eta: usize,
    pub delta: usize,
    pub beta: usize,
    pub b: usize,
    pub s: usize,
}

impl SymmetricPlan {
    /// Plan for a target `β`, using the smallest `δ ≤ delta_max` that yields
    /// at least `min_columns` columns.
    pub fn for_beta(
        antennas: Antennas,
        t: usize,
        omega: usize,
        beta: usize,
        delta_max: usize,
        min_columns: usize,
    ) -> Result<Self> {
        let hat = hat_params(omega, t)?;
        if beta == 0 || beta % hat.beta_hat != 0 {
            return Err(Error::RejectedParameters(format!(
                "β = {beta} is not a multiple of β̂ = {}",
                hat.beta_hat
            )));
        }
        let eta = beta / hat.beta_hat;
        if !eta_admissible(hat, antennas.tx, antennas.rx, t, omega, eta) {
            return Err(Error::RejectedParameters(format!(
                "β = {beta} violates the antenna bounds for L = {}, G = {}",
                antennas.tx, antennas.rx
            )));
        }
        let delta = smallest_delta(hat, eta, delta_max, min_columns).ok_or_else(|| {
            Error::RejectedParameters(format!(
                "no δ ≤ {delta_max} makes δ·{}/{eta} an integer ≥ {min_columns}",
                hat.s_hat
            ))
        })?;
        Ok(SymmetricPlan {
            hat,
            eta,
            delta,
            beta,
            b: eta * hat.b_hat,
            s: delta * hat.s_hat / eta,
        })
    }
}

struct PartitionSearch<'a> {
    groups: &'a [MulticastGroup],
    /// membership[g] = user positions of group g
    members: Vec<Vec<usize>>,
    beta_hat: usize,
    b_hat: usize,
    used: Vec<bool>,
    count: Vec<usize>,
    last_branch: Vec<Option<usize>>,
    columns: Vec<Vec<usize>>,
    nodes: u64,
}

impl PartitionSearch<'_> {
    fn fits(&self, g: usize) -> bool {
        !self.used[g] && self.members[g].iter().all(|&u| self.count[u] < self.beta_hat)
    }

    fn take(&mut self, g: usize) {
        self.used[g] = true;
        for &u in &self.members[g] {
            self.count[u] += 1;
        }
        self.columns.last_mut().expect("open column").push(g);
    }

    fn untake(&mut self, g: usize) {
        self.used[g] = false;
        for &u in &self.members[g] {
            self.count[u] -= 1;
        }
        self.columns.last_mut().expect("open column").pop();
    }

    fn search(&mut self) -> Result<bool> {
        self.nodes += 1;
        if self.nodes > SEARCH_NODE_LIMIT {
            return Err(Error::ConstructionFailure(format!(
                "base partition search exceeded {SEARCH_NODE_LIMIT} nodes"
            )));
        }
        let open_full = self.columns.last().is_none_or(|c| c.len() == self.b_hat);
        if open_full {
            let Some(first) = self.used.iter().position(|&u| !u) else {
                return Ok(true);
            };
            // a new column always starts with the smallest unused group
            let n = self.count.len();
            let saved_count = std::mem::replace(&mut self.count, vec![0; n]);
            let saved_last = std::mem::replace(&mut self.last_branch, vec![None; n]);
            self.columns.push(Vec::new());
            self.take(first);
            if self.search()? {
                return Ok(true);
            }
            self.untake(first);
            self.columns.pop();
            self.count = saved_count;
            self.last_branch = saved_last;
            return Ok(false);
        }

        // branch on the deficient user with the fewest candidate groups
        let mut best: Option<(usize, Vec<usize>)> = None;
        for u in 0..self.count.len() {
            if self.count[u] == self.beta_hat {
                continue;
            }
            let floor = self.last_branch[u];
            let cands: Vec<usize> = (0..self.groups.len())
                .filter(|&g| floor.is_none_or(|f| g > f))
                .filter(|&g| self.members[g].contains(&u) && self.fits(g))
                .collect();
            if best.as_ref().is_none_or(|(_, b)| cands.len() < b.len()) {
                let empty = cands.is_empty();
                best = Some((u, cands));
                if empty {
                    break;
                }
            }
        }
        let Some((user, cands)) = best else {
            return Ok(false);
        };
        let saved = self.last_branch[user];
        for g in cands {
            self.take(g);
            self.last_branch[user] = Some(g);
            if self.search()? {
                return Ok(true);
            }
            self.last_branch[user] = saved;
            self.untake(g);
        }
        Ok(false)
    }
}

/// Partitions all `(t+1)`-subsets of `users` into `Ŝ` columns of `B̂` groups,
/// each user appearing exactly `β̂` times per column. Deterministic.
pub fn build_base_partition(users: &[User], t: usize) -> Result<Vec<ScheduleColumn>> {
    let groups = enumerate_groups(users, t)?;
    let hat = hat_params(users.len(), t)?;
    let mut sorted = users.to_vec();
    sorted.sort_unstable();
    let members = groups
        .iter()
        .map(|g| {
            g.users()
                .iter()
                .map(|u| sorted.binary_search(u).expect("member of served set"))
                .collect()
        })
        .collect();
    let mut search = PartitionSearch {
        groups: &groups,
        members,
        beta_hat: hat.beta_hat,
        b_hat: hat.b_hat,
        used: vec![false; groups.len()],
        count: vec![0; sorted.len()],
        last_branch: vec![None; sorted.len()],
        columns: Vec::new(),
        nodes: 0,
    };
    if !search.search()? {
        return Err(Error::ConstructionFailure(format!(
            "no base partition for Ω = {}, t = {t}",
            users.len()
        )));
    }
    Ok(search
        .columns
        .iter()
        .map(|c| ScheduleColumn::new(c.iter().map(|&g| groups[g].clone()).collect()))
        .collect())
}

/// Checks that `columns` partition all groups with `β̂` appearances of every
/// user per column.
pub fn validate_base_partition(columns: &[ScheduleColumn], users: &[User], t: usize) -> Result<()> {
    let hat = hat_params(users.len(), t)?;
    if columns.len() != hat.s_hat {
        return Err(Error::MalformedTable(format!(
            "{} columns, expected Ŝ = {}",
            columns.len(),
            hat.s_hat
        )));
    }
    let mut seen: Vec<&MulticastGroup> = columns.iter().flat_map(|c| c.groups()).collect();
    seen.sort();
    let all = enumerate_groups(users, t)?;
    if seen.len() != all.len() || seen.iter().zip(&all).any(|(a, b)| *a != b) {
        return Err(Error::MalformedTable(
            "columns do not cover every group exactly once".into(),
        ));
    }
    for (i, c) in columns.iter().enumerate() {
        let m = crate::model::column_multiplicities(c, users)?;
        if let Some((k, b)) = m.beta.iter().find(|(_, &b)| b != hat.beta_hat) {
            return Err(Error::MalformedTable(format!(
                "column {i}: user {k} appears {b} times, expected β̂ = {}",
                hat.beta_hat
            )));
        }
    }
    Ok(())
}

/// Replicates the base columns `δ` times and merges them `η` at a time.
///
/// The replicated sequence cycles through the base columns, and output column
/// `j` takes items `jη..(j+1)η`, so each base column contributes at most
/// `⌈η/Ŝ⌉` times to any output column.
pub fn regroup(
    base: &[ScheduleColumn],
    users: &[User],
    t: usize,
    antennas: Antennas,
    eta: usize,
    delta: usize,
) -> Result<ScheduleTable> {
    let s_hat = base.len();
    if eta == 0 || delta == 0 || s_hat == 0 {
        return Err(Error::RejectedParameters(
            "η, δ and the base partition must be non-empty".into(),
        ));
    }
    if (delta * s_hat) % eta != 0 {
        return Err(Error::RejectedParameters(format!(
            "δŜ = {} is not divisible by η = {eta}",
            delta * s_hat
        )));
    }
    let s = delta * s_hat / eta;
    let columns = (0..s)
        .map(|j| {
            let groups = (j * eta..(j + 1) * eta)
                .flat_map(|n| base[n % s_hat].groups().iter().cloned())
                .collect();
            ScheduleColumn::new(groups)
        })
        .collect();
    Ok(ScheduleTable {
        t,
        antennas,
        users: users.to_vec(),
        columns,
        replication: Replication {
            delta,
            delta_tilde: 1,
            m: 0,
        },
    })
}

/// Builds the symmetric reference table for `plan` over `users`.
pub fn symmetric_table(
    plan: &SymmetricPlan,
    users: &[User],
    t: usize,
    antennas: Antennas,
) -> Result<ScheduleTable> {
    let base = build_base_partition(users, t)?;
    regroup(&base, users, t, antennas, plan.eta, plan.delta)
}
