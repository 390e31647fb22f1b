//! Asymmetric stream allocation by decomposition and reassignment.
//!
//! The symmetric table (`B` groups per column, `S` columns) is replicated
//! `δ̃` times. Of the `δ̃S` columns, `S̃ = dS` are kept and the rest are
//! dissolved; their groups are handed out `m` per kept column. For every
//! baseline column `i` a *donor* column `ψ(i)` supplies a regular
//! collection `C_i` of `d` m-sets, each donor group appearing in exactly
//! `r = dm/B` of them, and column `i` is repeated once per set with that set
//! appended. The sets are built greedily under a linear-decodability check
//! with a swap-repair fallback.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::decodability::theorem1_check;
use crate::error::{Error, Result};
use crate::model::{gcd, Antennas, MulticastGroup, Replication, ScheduleColumn, ScheduleTable, User};
use crate::seed;

/// `(G − β)·⌊Ω/(t+1)⌋`, the largest `m` compatible with the receive-antenna
/// limit.
pub fn m_bound(rx: usize, beta: usize, omega: usize, t: usize) -> usize {
    rx.saturating_sub(beta) * (omega / (t + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AsymPlan {
    /// Groups added per retained column.
    pub m: usize,
    /// Sets per collection, `|C_i|`.
    pub d: usize,
    /// Appearances of each donor group, `|C_i^T|`.
    pub r: usize,
    pub delta_tilde: usize,
    pub s_tilde: usize,
    /// Pairwise overlap threshold inside a set.
    pub tau: usize,
    /// Iteration cap per set.
    pub i_max: usize,
    /// Baseline per-user streams; weights the overlap term of the greedy score.
    pub beta: usize,
    /// Baseline column size.
    pub b: usize,
    /// Baseline column count.
    pub s: usize,
}

impl AsymPlan {
    /// Scales `d` (and with it `r`, `δ̃`, `S̃`) by `k`.
    pub fn scaled(self, k: usize) -> Self {
        AsymPlan {
            d: self.d * k,
            r: self.r * k,
            delta_tilde: self.delta_tilde * k,
            s_tilde: self.s_tilde * k,
            ..self
        }
    }

    pub fn with_tau(self, tau: usize) -> Self {
        AsymPlan { tau, ..self }
    }

    pub fn with_i_max(self, i_max: usize) -> Self {
        AsymPlan { i_max, ..self }
    }

    /// `m·S̃ = B·(δ̃S − S̃)`, `m·d = B·r`, `δ̃ = d + r` and `S̃ = dS`.
    pub fn identities_hold(&self) -> bool {
        self.m * self.s_tilde == self.b * (self.delta_tilde * self.s - self.s_tilde)
            && self.m * self.d == self.b * self.r
            && self.delta_tilde * self.b == (self.b + self.m) * self.d
            && self.delta_tilde * self.s - self.s_tilde == self.r * self.s
            && self.s_tilde == self.d * self.s
    }
}

/// Smallest integral `(d, r, δ̃, S̃)` for adding `m` groups per column.
#[allow(clippy::too_many_arguments)]
pub fn solve_plan(
    b: usize,
    s: usize,
    m: usize,
    rx: usize,
    beta: usize,
    omega: usize,
    t: usize,
) -> Result<AsymPlan> {
    if m == 0 || b == 0 || s == 0 {
        return Err(Error::RejectedParameters(
            "m, B and S must be positive".into(),
        ));
    }
    let bound = m_bound(rx, beta, omega, t);
    if m > bound {
        return Err(Error::InfeasibleM { m, bound });
    }
    let d = (1..=b)
        .find(|d| (d * m) % b == 0 && ((b + m) * d) % b == 0)
        .ok_or_else(|| Error::SearchFailure(format!("no d ≤ {b} with B | d·m for B = {b}, m = {m}")))?;
    debug_assert_eq!(d, b / gcd(b, m));
    let r = d * m / b;
    Ok(AsymPlan {
        m,
        d,
        r,
        delta_tilde: (b + m) * d / b,
        s_tilde: d * s,
        tau: t,
        i_max: 50 * m,
        beta,
        b,
        s,
    })
}

/// Cyclic donor mapping on 1-based column indices: `ψ(i) = (i mod S) + 1`.
pub fn donor_map(i: usize, s: usize) -> Result<usize> {
    if s < 2 {
        return Err(Error::NoDonor);
    }
    if i == 0 || i > s {
        return Err(Error::RejectedParameters(format!(
            "column {i} outside 1..={s}"
        )));
    }
    Ok(i % s + 1)
}

fn donor_index(i: usize, s: usize) -> Result<usize> {
    Ok(donor_map(i + 1, s)? - 1)
}

/// A family of m-sets drawn from one donor column. Sets hold positions
/// ("slots") into the donor column, so a donor column that repeats a group
/// keeps its copies apart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateCollection {
    /// 0-based index of the donor column.
    pub donor_column: usize,
    pub donor: Vec<MulticastGroup>,
    pub sets: Vec<Vec<usize>>,
}

impl CandidateCollection {
    /// Builds a collection from literal group sets; each group must occur in
    /// the donor column exactly once.
    pub fn from_groups(
        donor_column: usize,
        donor: &ScheduleColumn,
        sets: &[Vec<MulticastGroup>],
    ) -> Result<Self> {
        let slots: Vec<MulticastGroup> = donor.groups().to_vec();
        let mut out = Vec::with_capacity(sets.len());
        for set in sets {
            let mut idx = Vec::with_capacity(set.len());
            for g in set {
                let hits: Vec<usize> = (0..slots.len()).filter(|&j| &slots[j] == g).collect();
                match hits.as_slice() {
                    [j] => idx.push(*j),
                    [] => {
                        return Err(Error::MalformedTable(format!(
                            "group {g} is not in the donor column"
                        )))
                    }
                    _ => {
                        return Err(Error::MalformedTable(format!(
                            "group {g} is repeated in the donor column"
                        )))
                    }
                }
            }
            idx.sort_unstable();
            out.push(idx);
        }
        Ok(CandidateCollection {
            donor_column,
            donor: slots,
            sets: out,
        })
    }

    pub fn group_sets(&self) -> Vec<Vec<MulticastGroup>> {
        self.sets
            .iter()
            .map(|s| s.iter().map(|&j| self.donor[j].clone()).collect())
            .collect()
    }

    /// How many sets contain each donor slot.
    pub fn slot_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.donor.len()];
        for s in &self.sets {
            for &j in s {
                deg[j] += 1;
            }
        }
        deg
    }

    /// Checks set sizes, distinctness, `r`-regularity and pairwise overlap.
    pub fn validate(&self, m: usize, r: usize, tau: usize) -> Result<()> {
        for (n, s) in self.sets.iter().enumerate() {
            if s.len() != m {
                return Err(Error::ConstructionFailure(format!(
                    "set {n} has {} groups, expected m = {m}",
                    s.len()
                )));
            }
            let mut sorted = s.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != s.len() || s.iter().any(|&j| j >= self.donor.len()) {
                return Err(Error::ConstructionFailure(format!(
                    "set {n} repeats or misnames a donor slot"
                )));
            }
            for (a, &x) in s.iter().enumerate() {
                for &y in &s[a + 1..] {
                    let o = self.donor[x].overlap(&self.donor[y]);
                    if o > tau {
                        return Err(Error::ConstructionFailure(format!(
                            "set {n}: {} and {} share {o} > τ = {tau} users",
                            self.donor[x], self.donor[y]
                        )));
                    }
                }
            }
        }
        if let Some((j, deg)) = self
            .slot_degrees()
            .into_iter()
            .enumerate()
            .find(|&(_, deg)| deg != r)
        {
            return Err(Error::ConstructionFailure(format!(
                "donor group {} appears in {deg} sets, expected r = {r}",
                self.donor[j]
            )));
        }
        if self.sets.len() * m != self.donor.len() * r {
            return Err(Error::ConstructionFailure(
                "degree-sum identity m·d = B·r fails".into(),
            ));
        }
        Ok(())
    }
}

/// Running `b(k)` / `c(T)` counters of Algorithm-2 style checks.
#[derive(Debug, Clone)]
struct Load<'a> {
    users: &'a [User],
    per_user: Vec<usize>,
    per_group: BTreeMap<MulticastGroup, usize>,
    total: usize,
}

impl<'a> Load<'a> {
    fn new<'g>(users: &'a [User], groups: impl IntoIterator<Item = &'g MulticastGroup>) -> Self {
        let mut load = Load {
            users,
            per_user: vec![0; users.len()],
            per_group: BTreeMap::new(),
            total: 0,
        };
        for g in groups {
            load.add(g);
        }
        load
    }

    fn position(&self, k: User) -> usize {
        self.users.binary_search(&k).expect("group user is served")
    }

    fn add(&mut self, g: &MulticastGroup) {
        for &k in g.users() {
            let p = self.position(k);
            self.per_user[p] += 1;
        }
        *self.per_group.entry(g.clone()).or_insert(0) += 1;
        self.total += g.len();
    }

    fn remove(&mut self, g: &MulticastGroup) {
        for &k in g.users() {
            let p = self.position(k);
            self.per_user[p] -= 1;
        }
        let c = self.per_group.get_mut(g).expect("group present");
        *c -= 1;
        if *c == 0 {
            self.per_group.remove(g);
        }
        self.total -= g.len();
    }

    /// `max_k b(k) ≤ G` and `max_T c(T) + Σ_{k∉T} b(k) ≤ L`.
    fn feasible(&self, antennas: Antennas) -> bool {
        if self.per_user.iter().any(|&b| b > antennas.rx) {
            return false;
        }
        self.per_group.iter().all(|(g, &c)| {
            let inside: usize = g.users().iter().map(|&k| self.per_user[self.position(k)]).sum();
            c + self.total - inside <= antennas.tx
        })
    }
}

/// Donor slots `T` for which `host ∪ pending ∪ {T}` keeps every user within
/// `G` streams and every group's load within `L`.
pub fn linear_feasible_check(
    host: &ScheduleColumn,
    pending: &[MulticastGroup],
    donor: &[MulticastGroup],
    antennas: Antennas,
    users: &[User],
) -> Vec<usize> {
    let mut load = Load::new(users, host.groups().iter().chain(pending));
    let mut out = Vec::new();
    for (j, t) in donor.iter().enumerate() {
        load.add(t);
        if load.feasible(antennas) {
            out.push(j);
        }
        load.remove(t);
    }
    out
}

fn set_feasible(
    host: &ScheduleColumn,
    set: &[MulticastGroup],
    antennas: Antennas,
    users: &[User],
) -> bool {
    Load::new(users, host.groups().iter().chain(set)).feasible(antennas)
}

struct Greedy<'a> {
    host: &'a ScheduleColumn,
    donor: &'a [MulticastGroup],
    antennas: Antennas,
    users: &'a [User],
    plan: AsymPlan,
    /// Tie-break rank of each donor slot (lower wins).
    rank: Vec<usize>,
}

impl Greedy<'_> {
    fn groups(&self, set: &[usize]) -> Vec<MulticastGroup> {
        set.iter().map(|&j| self.donor[j].clone()).collect()
    }

    fn max_overlap(&self, set: &[usize], j: usize) -> usize {
        set.iter()
            .map(|&x| self.donor[x].overlap(&self.donor[j]))
            .max()
            .unwrap_or(0)
    }

    /// Admissible next slots for `set`: linearly feasible, quota left, new to
    /// the set and within the overlap threshold.
    fn admissible(&self, set: &[usize], quota: &[usize]) -> Vec<usize> {
        linear_feasible_check(self.host, &self.groups(set), self.donor, self.antennas, self.users)
            .into_iter()
            .filter(|&j| quota[j] > 0 && !set.contains(&j) && self.max_overlap(set, j) <= self.plan.tau)
            .collect()
    }

    /// First exchange of `T_A ∈ A` with `T_B ∈ B` (B a finished set) that keeps
    /// both sets within the overlap threshold and linearly feasible, and
    /// leaves `A` with an admissible continuation.
    fn find_swap(
        &self,
        current: &[usize],
        done: &[Vec<usize>],
        quota: &[usize],
    ) -> Option<(usize, usize, usize)> {
        let by_group = |s: &[usize]| {
            let mut v = s.to_vec();
            v.sort_by(|&x, &y| self.donor[x].cmp(&self.donor[y]).then(x.cmp(&y)));
            v
        };
        let a_sorted = by_group(current);
        for (bi, b) in done.iter().enumerate() {
            for &tb in &by_group(b) {
                if current.contains(&tb) {
                    continue;
                }
                for &ta in &a_sorted {
                    if b.contains(&ta) {
                        continue;
                    }
                    let a_rest: Vec<usize> = current.iter().copied().filter(|&x| x != ta).collect();
                    let b_rest: Vec<usize> = b.iter().copied().filter(|&x| x != tb).collect();
                    if self.max_overlap(&a_rest, tb) > self.plan.tau
                        || self.max_overlap(&b_rest, ta) > self.plan.tau
                    {
                        continue;
                    }
                    let mut a_new = a_rest;
                    a_new.push(tb);
                    let mut b_new = b_rest;
                    b_new.push(ta);
                    if !set_feasible(self.host, &self.groups(&a_new), self.antennas, self.users)
                        || !set_feasible(self.host, &self.groups(&b_new), self.antennas, self.users)
                    {
                        continue;
                    }
                    if self.admissible(&a_new, quota).is_empty() {
                        continue;
                    }
                    return Some((bi, ta, tb));
                }
            }
        }
        None
    }

    fn run(&self, column: usize) -> Result<Vec<Vec<usize>>> {
        let AsymPlan { m, d, r, i_max, beta, .. } = self.plan;
        let mut quota = vec![r; self.donor.len()];
        let mut done: Vec<Vec<usize>> = Vec::with_capacity(d);
        while done.len() < d {
            let mut current: Vec<usize> = Vec::with_capacity(m);
            let mut iter = 0;
            while current.len() < m && iter < i_max {
                iter += 1;
                let feasible = self.admissible(&current, &quota);
                if feasible.is_empty() {
                    match self.find_swap(&current, &done, &quota) {
                        Some((bi, ta, tb)) => {
                            current.retain(|&x| x != ta);
                            current.push(tb);
                            let b = &mut done[bi];
                            b.retain(|&x| x != tb);
                            b.push(ta);
                            b.sort_unstable();
                            continue;
                        }
                        None => break,
                    }
                }
                let score = |j: usize| {
                    let overlap: usize = current
                        .iter()
                        .map(|&x| self.donor[x].overlap(&self.donor[j]))
                        .sum();
                    (beta * overlap) as i64 - quota[j] as i64
                };
                let best = feasible
                    .into_iter()
                    .min_by_key(|&j| (score(j), self.rank[j]))
                    .expect("non-empty admissible set");
                current.push(best);
                quota[best] -= 1;
            }
            if current.len() < m {
                return Err(Error::ConstructionFailure(format!(
                    "column {column}: set {} stalled at {} of m = {m} groups (τ = {}, I_max = {i_max})",
                    done.len(),
                    current.len(),
                    self.plan.tau
                )));
            }
            current.sort_unstable();
            done.push(current);
        }
        Ok(done)
    }
}

/// Builds the regular collection `C_i` for 0-based baseline column `i`.
///
/// With `reseed = None` ties in the greedy score go to the lexicographically
/// smallest donor group; otherwise to a seeded permutation of the donor slots.
pub fn balanced_greedy(
    i: usize,
    plan: &AsymPlan,
    baseline: &ScheduleTable,
    reseed: Option<u64>,
) -> Result<CandidateCollection> {
    let s = baseline.columns.len();
    if i >= s {
        return Err(Error::RejectedParameters(format!("column {i} ≥ S = {s}")));
    }
    let donor_column = donor_index(i, s)?;
    let donor = baseline.columns[donor_column].groups();
    let b = donor.len();
    if b == 0 || (plan.d * plan.m) % b != 0 || plan.d * plan.m / b != plan.r {
        return Err(Error::RejectedParameters(format!(
            "r = {} inconsistent with d = {}, m = {}, B = {b}",
            plan.r, plan.d, plan.m
        )));
    }
    if plan.m > b {
        return Err(Error::ConstructionFailure(format!(
            "m = {} distinct groups cannot be drawn from a donor column of {b}",
            plan.m
        )));
    }
    let mut rank: Vec<usize> = (0..b).collect();
    if let Some(sd) = reseed {
        let mut order: Vec<usize> = (0..b).collect();
        order.shuffle(&mut seed::rng(sd, &format!("greedy/{i}")));
        for (pos, &j) in order.iter().enumerate() {
            rank[j] = pos;
        }
    }
    let greedy = Greedy {
        host: &baseline.columns[i],
        donor,
        antennas: baseline.antennas,
        users: &baseline.users,
        plan: *plan,
        rank,
    };
    let sets = greedy.run(i)?;
    Ok(CandidateCollection {
        donor_column,
        donor: donor.to_vec(),
        sets,
    })
}

/// Repeats each baseline column once per set of its collection and appends
/// that set's groups; every column must pass the symbolic decodability check.
pub fn assemble_table(
    baseline: &ScheduleTable,
    collections: &[CandidateCollection],
    plan: &AsymPlan,
) -> Result<ScheduleTable> {
    let s = baseline.columns.len();
    if collections.len() != s {
        return Err(Error::RejectedParameters(format!(
            "{} collections for {s} baseline columns",
            collections.len()
        )));
    }
    let mut columns = Vec::with_capacity(plan.s_tilde);
    for (i, (host, coll)) in baseline.columns.iter().zip(collections).enumerate() {
        if coll.donor_column != donor_index(i, s)? || coll.donor != baseline.columns[coll.donor_column].groups() {
            return Err(Error::RejectedParameters(format!(
                "collection {i} is not drawn from donor column {}",
                donor_index(i, s)?
            )));
        }
        if coll.sets.len() != plan.d {
            return Err(Error::RejectedParameters(format!(
                "collection {i} has {} sets, expected d = {}",
                coll.sets.len(),
                plan.d
            )));
        }
        for set in coll.group_sets() {
            columns.push(host.extended(&set));
        }
    }
    let table = ScheduleTable {
        t: baseline.t,
        antennas: baseline.antennas,
        users: baseline.users.clone(),
        columns,
        replication: Replication {
            delta: baseline.replication.delta,
            delta_tilde: plan.delta_tilde,
            m: plan.m,
        },
    };
    let report = theorem1_check(&table)?;
    if let Some(bad) = report.columns.iter().find(|c| !c.pass) {
        return Err(Error::AssemblyFailure {
            column: bad.column,
            detail: format!("{:?}", bad.witnesses[0]),
        });
    }
    Ok(table)
}

/// Streams per column, `Σ_k β_k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum TableDof {
    Uniform(usize),
    /// Columns disagree; per-column values.
    NonUniform(Vec<usize>),
}

impl TableDof {
    pub fn uniform(&self) -> Option<usize> {
        match self {
            TableDof::Uniform(d) => Some(*d),
            TableDof::NonUniform(_) => None,
        }
    }
}

pub fn dof_of_table(table: &ScheduleTable) -> Result<TableDof> {
    let per: Vec<usize> = table.multiplicities()?.iter().map(|m| m.dof()).collect();
    Ok(match per.first() {
        Some(&d) if per.iter().all(|&x| x == d) => TableDof::Uniform(d),
        None => TableDof::Uniform(0),
        _ => TableDof::NonUniform(per),
    })
}

/// Retry policy for [`build_asymmetric`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RetryLadder {
    /// Starting overlap threshold; raised by one up to `t+1`.
    pub tau: Option<usize>,
    pub i_max: Option<usize>,
    /// Extra seeded attempts after the lexicographic one.
    pub reseeds: usize,
    /// Largest `d` tried, as a multiple of `B`.
    pub max_d_factor: usize,
    pub seed: u64,
}

impl Default for RetryLadder {
    fn default() -> Self {
        RetryLadder {
            tau: None,
            i_max: None,
            reseeds: 0,
            max_d_factor: 1,
            seed: 0,
        }
    }
}

impl RetryLadder {
    /// τ ∈ {t, t+1}, three reseeds, d up to 3B.
    pub fn exploratory(seed: u64) -> Self {
        RetryLadder {
            reseeds: 3,
            max_d_factor: 3,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct AsymmetricSchedule {
    pub plan: Option<AsymPlan>,
    pub collections: Vec<CandidateCollection>,
    pub table: ScheduleTable,
}

/// Full construction from a symmetric baseline: plan, collections for every
/// column, assembly. `m = 0` returns the baseline unchanged.
pub fn build_asymmetric(
    baseline: &ScheduleTable,
    beta: usize,
    m: usize,
    ladder: RetryLadder,
) -> Result<AsymmetricSchedule> {
    if m == 0 {
        return Ok(AsymmetricSchedule {
            plan: None,
            collections: Vec::new(),
            table: baseline.clone(),
        });
    }
    let s = baseline.columns.len();
    if s < 2 {
        return Err(Error::NoDonor);
    }
    let b = baseline.columns[0].len();
    if baseline.columns.iter().any(|c| c.len() != b) {
        return Err(Error::MalformedTable("baseline columns differ in size".into()));
    }
    let t = baseline.t;
    let base = solve_plan(b, s, m, baseline.antennas.rx, beta, baseline.omega(), t)?;
    let base = match ladder.i_max {
        Some(n) => base.with_i_max(n),
        None => base,
    };
    let tau0 = ladder.tau.unwrap_or(t);
    let mut last_err = None;
    for tau in tau0..=(t + 1).max(tau0) {
        for attempt in 0..=ladder.reseeds {
            let reseed = (attempt > 0).then(|| seed::derive(ladder.seed, &format!("reseed/{attempt}")));
            let mut k = 1;
            while k == 1 || base.d * k <= ladder.max_d_factor * b {
                let plan = base.scaled(k).with_tau(tau);
                let outcome = (0..s)
                    .map(|i| balanced_greedy(i, &plan, baseline, reseed))
                    .collect::<Result<Vec<_>>>()
                    .and_then(|colls| {
                        let table = assemble_table(baseline, &colls, &plan)?;
                        Ok((colls, table))
                    });
                match outcome {
                    Ok((collections, table)) => {
                        return Ok(AsymmetricSchedule {
                            plan: Some(plan),
                            collections,
                            table,
                        })
                    }
                    Err(e) => last_err = Some(e),
                }
                k += 1;
            }
        }
    }
    Err(match last_err {
        Some(Error::ConstructionFailure(msg)) => Error::ConstructionFailure(msg),
        Some(e) => Error::ConstructionFailure(e.to_string()),
        None => Error::ConstructionFailure("no attempt made".into()),
    })
}
