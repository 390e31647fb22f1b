//! Domain types shared by all schedulers: system parameters, multicast
//! groups, schedule columns and tables, plus the subset combinatorics and
//! multiplicity bookkeeping built on top of them.
//!
//! Users are 1-based. Groups are kept sorted, so two groups are equal iff
//! they serve the same users, and columns keep their groups sorted so a
//! column is a canonical multiset.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type User = u32;

/// `C(n, k)`, zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Coded-caching gain `K·M/N`; rejects a non-integral or zero result.
pub fn cc_gain(users: usize, cache_size: usize, library_size: usize) -> Result<usize> {
    if users == 0 || cache_size == 0 || library_size == 0 {
        return Err(Error::RejectedParameters(format!(
            "K, M and N must be positive (got K={users}, M={cache_size}, N={library_size})"
        )));
    }
    let total = users * cache_size;
    if total % library_size != 0 {
        return Err(Error::RejectedParameters(format!(
            "K·M/N = {total}/{library_size} is not an integer"
        )));
    }
    Ok(total / library_size)
}

/// Network-level parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemParams {
    pub users: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub library_size: usize,
    pub cache_size: usize,
    pub gain: usize,
}

impl SystemParams {
    pub fn new(
        users: usize,
        tx_antennas: usize,
        rx_antennas: usize,
        library_size: usize,
        cache_size: usize,
    ) -> Result<Self> {
        let gain = cc_gain(users, cache_size, library_size)?;
        if gain + 1 > users {
            return Err(Error::RejectedParameters(format!(
                "t+1 = {} exceeds K = {users}",
                gain + 1
            )));
        }
        if tx_antennas == 0 || rx_antennas == 0 {
            return Err(Error::RejectedParameters(
                "antenna counts must be positive".into(),
            ));
        }
        Ok(SystemParams {
            users,
            tx_antennas,
            rx_antennas,
            library_size,
            cache_size,
            gain,
        })
    }
}

/// Transmit (`L`) and per-user receive (`G`) antenna counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Antennas {
    pub tx: usize,
    pub rx: usize,
}

impl Antennas {
    pub fn new(tx: usize, rx: usize) -> Self {
        Antennas { tx, rx }
    }
}

/// A set of users sharing one XOR codeword.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<User>", into = "Vec<User>")]
pub struct MulticastGroup(Vec<User>);

impl MulticastGroup {
    pub fn new(mut users: Vec<User>) -> Result<Self> {
        users.sort_unstable();
        if users.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::MalformedTable(format!(
                "group {users:?} repeats a user"
            )));
        }
        if users.is_empty() {
            return Err(Error::MalformedTable("empty group".into()));
        }
        Ok(MulticastGroup(users))
    }

    pub fn users(&self) -> &[User] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, user: User) -> bool {
        self.0.binary_search(&user).is_ok()
    }

    /// Number of shared users.
    pub fn overlap(&self, other: &MulticastGroup) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

impl TryFrom<Vec<User>> for MulticastGroup {
    type Error = Error;

    fn try_from(users: Vec<User>) -> Result<Self> {
        MulticastGroup::new(users)
    }
}

impl From<MulticastGroup> for Vec<User> {
    fn from(g: MulticastGroup) -> Self {
        g.0
    }
}

impl fmt::Display for MulticastGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, u) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{u}")?;
        }
        write!(f, "}}")
    }
}

/// All `(t+1)`-subsets of `users` in lexicographic order.
pub fn enumerate_groups(users: &[User], t: usize) -> Result<Vec<MulticastGroup>> {
    let mut sorted = users.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != users.len() {
        return Err(Error::RejectedParameters("served users repeat".into()));
    }
    let size = t + 1;
    if sorted.len() < size {
        return Err(Error::RejectedParameters(format!(
            "Ω = {} < t+1 = {size}",
            sorted.len()
        )));
    }
    let n = sorted.len();
    let mut idx: Vec<usize> = (0..size).collect();
    let mut out = Vec::with_capacity(binomial(n as u64, size as u64) as usize);
    loop {
        out.push(MulticastGroup(idx.iter().map(|&i| sorted[i]).collect()));
        // advance to the next combination
        let mut pos = size;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            if idx[pos] < n - size + pos {
                break;
            }
        }
        idx[pos] += 1;
        for j in pos + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// One transmission interval: a multiset of groups, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScheduleColumn {
    groups: Vec<MulticastGroup>,
}

impl ScheduleColumn {
    pub fn new(mut groups: Vec<MulticastGroup>) -> Self {
        groups.sort();
        ScheduleColumn { groups }
    }

    pub fn groups(&self) -> &[MulticastGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Multiset union with `extra`.
    pub fn extended<'a>(&self, extra: impl IntoIterator<Item = &'a MulticastGroup>) -> Self {
        let mut groups = self.groups.clone();
        groups.extend(extra.into_iter().cloned());
        ScheduleColumn::new(groups)
    }

    /// Distinct groups with their multiplicities, in sorted order.
    pub fn distinct(&self) -> Vec<(&MulticastGroup, usize)> {
        let mut out: Vec<(&MulticastGroup, usize)> = Vec::new();
        for g in &self.groups {
            match out.last_mut() {
                Some((last, n)) if *last == g => *n += 1,
                _ => out.push((g, 1)),
            }
        }
        out
    }
}

/// Per-column multiplicities: `θ_T` per group and `β_k` per served user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multiplicities {
    pub theta: BTreeMap<MulticastGroup, usize>,
    pub beta: BTreeMap<User, usize>,
}

impl Multiplicities {
    /// Total streams in the column, `Σ_k β_k`.
    pub fn dof(&self) -> usize {
        self.beta.values().sum()
    }

    pub fn streams(&self, user: User) -> usize {
        self.beta.get(&user).copied().unwrap_or(0)
    }

    /// `Σ_{k ∉ T} β_k`.
    pub fn outside_streams(&self, group: &MulticastGroup) -> usize {
        self.dof() - group.users().iter().map(|&k| self.streams(k)).sum::<usize>()
    }
}

pub fn column_multiplicities(column: &ScheduleColumn, served: &[User]) -> Result<Multiplicities> {
    let mut beta: BTreeMap<User, usize> = served.iter().map(|&k| (k, 0)).collect();
    let mut theta = BTreeMap::new();
    for g in column.groups() {
        for &k in g.users() {
            *beta.get_mut(&k).ok_or_else(|| {
                Error::MalformedTable(format!("group {g} names user {k} outside the served set"))
            })? += 1;
        }
        *theta.entry(g.clone()).or_insert(0) += 1;
    }
    Ok(Multiplicities { theta, beta })
}

/// Splitting factors introduced by delivery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replication {
    /// Replication of the base partition in the symmetric table.
    pub delta: usize,
    /// Replication of the symmetric table in the asymmetric construction.
    pub delta_tilde: usize,
    /// Groups added per retained column.
    pub m: usize,
}

impl Default for Replication {
    fn default() -> Self {
        Replication {
            delta: 1,
            delta_tilde: 1,
            m: 0,
        }
    }
}

/// Ordered list of columns over a served user set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleTable {
    pub t: usize,
    pub antennas: Antennas,
    pub users: Vec<User>,
    pub columns: Vec<ScheduleColumn>,
    pub replication: Replication,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    omega: usize,
    t: usize,
    #[serde(rename = "L")]
    tx: usize,
    #[serde(rename = "G")]
    rx: usize,
    users: Vec<User>,
    delta: usize,
    delta_tilde: usize,
    m: usize,
    columns: Vec<Vec<MulticastGroup>>,
}

impl ScheduleTable {
    pub fn omega(&self) -> usize {
        self.users.len()
    }

    /// `δ·δ̃`, each group's total count in a constructed table.
    pub fn subpacketization_factor(&self) -> usize {
        self.replication.delta * self.replication.delta_tilde
    }

    pub fn multiplicities(&self) -> Result<Vec<Multiplicities>> {
        self.columns
            .iter()
            .map(|c| column_multiplicities(c, &self.users))
            .collect()
    }

    /// Total occurrences of every group across all columns.
    pub fn group_counts(&self) -> BTreeMap<MulticastGroup, usize> {
        let mut counts = BTreeMap::new();
        for c in &self.columns {
            for g in c.groups() {
                *counts.entry(g.clone()).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Checks that every `(t+1)`-subset of the served users appears the same
    /// number of times; returns that count.
    pub fn conservation(&self) -> Result<usize> {
        let counts = self.group_counts();
        let all = enumerate_groups(&self.users, self.t)?;
        let first = counts.get(&all[0]).copied().unwrap_or(0);
        for g in &all {
            let c = counts.get(g).copied().unwrap_or(0);
            if c != first {
                return Err(Error::MalformedTable(format!(
                    "group {g} appears {c} times, {} appears {first} times",
                    all[0]
                )));
            }
        }
        if counts.len() != all.len() {
            return Err(Error::MalformedTable("table holds foreign groups".into()));
        }
        Ok(first)
    }

    /// Structural validation: group sizes, user membership, sorted user list.
    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() || self.users.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::MalformedTable(
                "users must be a non-empty strictly increasing list".into(),
            ));
        }
        for (i, c) in self.columns.iter().enumerate() {
            for g in c.groups() {
                if g.len() != self.t + 1 {
                    return Err(Error::MalformedTable(format!(
                        "column {i}: group {g} has size {} != t+1 = {}",
                        g.len(),
                        self.t + 1
                    )));
                }
            }
            column_multiplicities(c, &self.users)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = TableFile {
            omega: self.omega(),
            t: self.t,
            tx: self.antennas.tx,
            rx: self.antennas.rx,
            users: self.users.clone(),
            delta: self.replication.delta,
            delta_tilde: self.replication.delta_tilde,
            m: self.replication.m,
            columns: self.columns.iter().map(|c| c.groups().to_vec()).collect(),
        };
        serde_json::to_string(&file).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TableFile =
            serde_json::from_str(text).map_err(|e| Error::MalformedTable(e.to_string()))?;
        if file.omega != file.users.len() {
            return Err(Error::MalformedTable(format!(
                "omega = {} but {} users listed",
                file.omega,
                file.users.len()
            )));
        }
        let table = ScheduleTable {
            t: file.t,
            antennas: Antennas::new(file.tx, file.rx),
            users: file.users,
            columns: file.columns.into_iter().map(ScheduleColumn::new).collect(),
            replication: Replication {
                delta: file.delta,
                delta_tilde: file.delta_tilde,
                m: file.m,
            },
        };
        table.validate()?;
        Ok(table)
    }
}

/// `Θ = C(K, t)·δ·δ̃`.
pub fn total_subpacketization(params: &SystemParams, table: &ScheduleTable) -> u64 {
    binomial(params.users as u64, params.gain as u64) * table.subpacketization_factor() as u64
}

/// Shorthand for test fixtures: `group(&[1, 2, 5])`.
pub fn group(users: &[User]) -> MulticastGroup {
    MulticastGroup::new(users.to_vec()).expect("valid group literal")
}

/// Parses the compact digit notation `"125"` used for small examples.
pub fn group_digits(s: &str) -> MulticastGroup {
    group(
        &s.chars()
            .map(|c| c.to_digit(10).expect("digit") as User)
            .collect::<Vec<_>>(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn users(n: u32) -> Vec<User> {
        (1..=n).collect()
    }

    #[test]
    fn cc_gain_examples() {
        assert_eq!(cc_gain(20, 1, 20), Ok(1));
        assert_eq!(cc_gain(20, 2, 20), Ok(2));
        assert!(matches!(cc_gain(6, 5, 4), Err(Error::RejectedParameters(_))));
        assert!(cc_gain(0, 1, 1).is_err());
    }

    #[test]
    fn system_params_rejects_full_caches() {
        assert!(SystemParams::new(4, 2, 2, 4, 4).is_err());
        let p = SystemParams::new(20, 10, 3, 20, 1).unwrap();
        assert_eq!(p.gain, 1);
    }

    #[test]
    fn enumerate_pairs_of_five() {
        let gs = enumerate_groups(&users(5), 1).unwrap();
        let expect: Vec<_> = ["12", "13", "14", "15", "23", "24", "25", "34", "35", "45"]
            .iter()
            .map(|s| group_digits(s))
            .collect();
        assert_eq!(gs, expect);
    }

    #[test]
    fn enumerate_triples_covers_example_partition() {
        let gs = enumerate_groups(&users(5), 2).unwrap();
        assert_eq!(gs.len(), 10);
        let mut expected: Vec<_> = [
            "123", "124", "345", "235", "145", "125", "134", "234", "245", "135",
        ]
        .iter()
        .map(|s| group_digits(s))
        .collect();
        expected.sort();
        assert_eq!(gs, expected);
    }

    #[test]
    fn enumerate_edge_cases() {
        assert_eq!(enumerate_groups(&[1, 2], 1).unwrap(), vec![group(&[1, 2])]);
        assert!(enumerate_groups(&[1, 2], 2).is_err());
        assert!(enumerate_groups(&[1, 1, 2], 1).is_err());
    }

    #[test]
    fn multiplicities_of_example_column() {
        let col = ScheduleColumn::new(
            ["123", "124", "345", "235", "145"]
                .iter()
                .map(|s| group_digits(s))
                .collect(),
        );
        let m = column_multiplicities(&col, &users(5)).unwrap();
        assert!(m.theta.values().all(|&v| v == 1));
        assert!(m.beta.values().all(|&v| v == 3));
        assert_eq!(m.dof(), 15);
    }

    #[test]
    fn multiplicities_repeated_group() {
        let col = ScheduleColumn::new(vec![group(&[1, 2]), group(&[1, 2])]);
        let m = column_multiplicities(&col, &users(3)).unwrap();
        assert_eq!(m.theta[&group(&[1, 2])], 2);
        assert_eq!((m.streams(1), m.streams(2), m.streams(3)), (2, 2, 0));
        assert_eq!(m.outside_streams(&group(&[1, 2])), 0);
    }

    #[test]
    fn multiplicities_reject_foreign_user() {
        let col = ScheduleColumn::new(vec![group(&[1, 7])]);
        assert!(matches!(
            column_multiplicities(&col, &users(3)),
            Err(Error::MalformedTable(_))
        ));
    }

    #[test]
    fn subpacketization() {
        let p = SystemParams::new(5, 10, 3, 5, 1).unwrap();
        let mut table = ScheduleTable {
            t: 1,
            antennas: Antennas::new(10, 3),
            users: users(5),
            columns: vec![],
            replication: Replication {
                delta: 1,
                delta_tilde: 7,
                m: 2,
            },
        };
        assert_eq!(total_subpacketization(&p, &table), 35);
        table.replication.delta_tilde = 1;
        assert_eq!(total_subpacketization(&p, &table), 5);

        let p2 = SystemParams::new(5, 11, 6, 5, 2).unwrap();
        table.t = 2;
        table.replication.delta_tilde = 8;
        assert_eq!(total_subpacketization(&p2, &table), 80);
    }

    #[test]
    fn json_roundtrip_and_schema() {
        let table = ScheduleTable {
            t: 1,
            antennas: Antennas::new(10, 3),
            users: users(3),
            columns: vec![ScheduleColumn::new(vec![group(&[1, 2]), group(&[2, 3])])],
            replication: Replication::default(),
        };
        let json = table.to_json();
        assert_eq!(
            json,
            r#"{"omega":3,"t":1,"L":10,"G":3,"users":[1,2,3],"delta":1,"delta_tilde":1,"m":0,"columns":[[[1,2],[2,3]]]}"#
        );
        assert_eq!(ScheduleTable::from_json(&json).unwrap(), table);
        assert!(ScheduleTable::from_json(&json.replace("[2,3]]", "[2,9]]")).is_err());
        assert!(ScheduleTable::from_json(&json.replace("[1,2],", "[1,1],")).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(8, 4), 70);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(20, 0), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn enumeration_is_complete_and_distinct(omega in 1u32..9, t in 0usize..5) {
                prop_assume!((t as u32) < omega);
                let gs = enumerate_groups(&users(omega), t).unwrap();
                prop_assert_eq!(gs.len() as u64, binomial(omega as u64, t as u64 + 1));
                prop_assert!(gs.windows(2).all(|w| w[0] < w[1]));
            }

            #[test]
            fn counting_identity(
                omega in 2u32..8,
                picks in proptest::collection::vec(0usize..1000, 0..20),
            ) {
                let t = 1;
                let all = enumerate_groups(&users(omega), t).unwrap();
                let col = ScheduleColumn::new(picks.iter().map(|&i| all[i % all.len()].clone()).collect());
                let m = column_multiplicities(&col, &users(omega)).unwrap();
                let theta_sum: usize = m.theta.values().sum();
                prop_assert_eq!(m.dof(), (t + 1) * theta_sum);
            }
        }
    }
}
