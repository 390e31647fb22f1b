//! Linear decodability certification.
//!
//! A column is decodable with linear receivers when, for every scheduled
//! group `T`, the streams of all users outside `T` plus the copies of `T`
//! fit into the transmit dimension (C1), and no user decodes more streams
//! than it has receive antennas (C2). [`theorem1_check`] evaluates these
//! conditions on the integers alone; [`build_beamformers`] and
//! [`verify_numeric`] instantiate them with random channels, nullspace
//! transmit beamformers and per-user combiners.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::model::{column_multiplicities, Antennas, MulticastGroup, ScheduleColumn, ScheduleTable, User};
use crate::{seed, Real};

/// Stream load of one scheduled group: `Σ_{k∉T} β_k + θ_T`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupLoad {
    pub group: MulticastGroup,
    pub outside: usize,
    pub theta: usize,
}

impl GroupLoad {
    pub fn load(&self) -> usize {
        self.outside + self.theta
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "condition")]
pub enum Violation {
    C1 {
        column: usize,
        group: MulticastGroup,
        outside: usize,
        theta: usize,
        limit: usize,
    },
    C2 {
        column: usize,
        user: User,
        streams: usize,
        limit: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnVerdict {
    pub column: usize,
    pub pass: bool,
    /// `L − max_T load`; negative when C1 fails.
    pub min_slack: i64,
    pub loads: Vec<GroupLoad>,
    pub witnesses: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SymbolicReport {
    pub pass: bool,
    pub columns: Vec<ColumnVerdict>,
}

impl SymbolicReport {
    pub fn witnesses(&self) -> impl Iterator<Item = &Violation> {
        self.columns.iter().flat_map(|c| c.witnesses.iter())
    }
}

pub fn check_column(
    index: usize,
    column: &ScheduleColumn,
    users: &[User],
    antennas: Antennas,
) -> Result<ColumnVerdict> {
    let mult = column_multiplicities(column, users)?;
    let mut witnesses = Vec::new();
    let loads: Vec<GroupLoad> = mult
        .theta
        .iter()
        .map(|(g, &theta)| GroupLoad {
            group: g.clone(),
            outside: mult.outside_streams(g),
            theta,
        })
        .collect();
    for l in &loads {
        if l.load() > antennas.tx {
            witnesses.push(Violation::C1 {
                column: index,
                group: l.group.clone(),
                outside: l.outside,
                theta: l.theta,
                limit: antennas.tx,
            });
        }
    }
    for (&user, &streams) in &mult.beta {
        if streams > antennas.rx {
            witnesses.push(Violation::C2 {
                column: index,
                user,
                streams,
                limit: antennas.rx,
            });
        }
    }
    let max_load = loads.iter().map(GroupLoad::load).max().unwrap_or(0);
    Ok(ColumnVerdict {
        column: index,
        pass: witnesses.is_empty(),
        min_slack: antennas.tx as i64 - max_load as i64,
        loads,
        witnesses,
    })
}

/// Symbolic check of C1 and C2 on every column.
pub fn theorem1_check(table: &ScheduleTable) -> Result<SymbolicReport> {
    let columns = table
        .columns
        .iter()
        .enumerate()
        .map(|(i, c)| check_column(i, c, &table.users, table.antennas))
        .collect::<Result<Vec<_>>>()?;
    Ok(SymbolicReport {
        pass: columns.iter().all(|c| c.pass),
        columns,
    })
}

/// Per-user `G×L` channels with i.i.d. `CN(0, 1)` entries.
#[derive(Debug, Clone)]
pub struct ChannelRealization<T: Real> {
    pub users: Vec<User>,
    pub matrices: Vec<CMatrix<T>>,
    pub noise_power: T,
    pub seed: u64,
}

impl<T: Real> ChannelRealization<T> {
    pub fn draw(users: &[User], antennas: Antennas, noise_power: T, seed: u64) -> Self {
        let mut rng = seed::rng(seed, "channels");
        let matrices = users
            .iter()
            .map(|_| linalg::gaussian(antennas.rx, antennas.tx, &mut rng))
            .collect();
        ChannelRealization {
            users: users.to_vec(),
            matrices,
            noise_power,
            seed,
        }
    }

    pub fn tx_antennas(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.ncols())
    }

    pub fn channel(&self, user: User) -> &CMatrix<T> {
        let i = self
            .users
            .binary_search(&user)
            .expect("user present in channel realization");
        &self.matrices[i]
    }
}

/// How receive combiners are chosen before the transmit beamformers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinerPolicy {
    /// Orthonormalized Gaussian draws.
    #[default]
    Random,
    /// Leading left singular vectors of the user's channel.
    ChannelAligned,
}

#[derive(Debug, Clone)]
pub struct Stream<T: Real> {
    pub group: MulticastGroup,
    pub instance: usize,
    pub beamformer: CVector<T>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NullityRecord {
    pub group: MulticastGroup,
    pub theta: usize,
    pub computed: usize,
    /// `L − Σ_{k∉T} β_k`, the generic-channel value.
    pub expected: i64,
}

#[derive(Debug, Clone)]
pub struct BeamformerSolution<T: Real> {
    pub policy: CombinerPolicy,
    /// `G×β_k` combiners with orthonormal columns, for users with `β_k > 0`.
    pub combiners: BTreeMap<User, CMatrix<T>>,
    pub streams: Vec<Stream<T>>,
    pub nullities: Vec<NullityRecord>,
}

fn combiners<T: Real>(
    beta: &BTreeMap<User, usize>,
    channels: &ChannelRealization<T>,
    policy: CombinerPolicy,
) -> Result<BTreeMap<User, CMatrix<T>>> {
    let mut rng = seed::rng(channels.seed, "combiners");
    let mut out = BTreeMap::new();
    for (&user, &b) in beta {
        if b == 0 {
            continue;
        }
        let h = channels.channel(user);
        let g = h.nrows();
        if b > g {
            return Err(Error::Verification(format!(
                "user {user} decodes {b} streams with only {g} receive antennas"
            )));
        }
        let u = match policy {
            CombinerPolicy::Random => linalg::orthonormalize(linalg::gaussian(g, b, &mut rng), b),
            CombinerPolicy::ChannelAligned => linalg::top_left_singular(h, b),
        };
        out.insert(user, u);
    }
    Ok(out)
}

/// `H̄_T`: the combined channels `U_kᴴ H_k` of every user outside `group`,
/// stacked vertically.
fn interference_channel<T: Real>(
    group: &MulticastGroup,
    combiners: &BTreeMap<User, CMatrix<T>>,
    channels: &ChannelRealization<T>,
) -> CMatrix<T> {
    let tx = channels.tx_antennas();
    let blocks: Vec<CMatrix<T>> = combiners
        .iter()
        .filter(|(u, _)| !group.contains(**u))
        .map(|(&u, c)| c.adjoint() * channels.channel(u))
        .collect();
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::<T>::zeros(rows, tx);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), tx)).copy_from(&b);
        r += b.nrows();
    }
    out
}

/// Rotates a nullspace basis `N` toward the group's own receivers: the
/// leading `θ` right singular vectors `V` of `[U_kᴴ H_k N]_{k∈T}` give
/// `W = N·V`, still orthonormal and still inside the nullspace.
fn steer<T: Real>(
    group: &MulticastGroup,
    basis: Vec<CVector<T>>,
    theta: usize,
    combiners: &BTreeMap<User, CMatrix<T>>,
    channels: &ChannelRealization<T>,
) -> Vec<CVector<T>> {
    let n = CMatrix::from_columns(&basis);
    let blocks: Vec<CMatrix<T>> = group
        .users()
        .iter()
        .filter_map(|k| combiners.get(k).map(|u| u.adjoint() * channels.channel(*k) * &n))
        .collect();
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    if rows == 0 {
        return basis.into_iter().take(theta).collect();
    }
    let mut own = CMatrix::<T>::zeros(rows, n.ncols());
    let mut r = 0;
    for b in blocks {
        own.view_mut((r, 0), (b.nrows(), b.ncols())).copy_from(&b);
        r += b.nrows();
    }
    let (_, directions) = linalg::right_svd(&own);
    directions.into_iter().take(theta).map(|v| &n * v).collect()
}

/// Fixes the combiners, then picks `θ_T` orthonormal vectors from the
/// nullspace of each group's interference channel, steered toward the
/// group's own receivers.
pub fn build_beamformers<T: Real>(
    column: &ScheduleColumn,
    users: &[User],
    channels: &ChannelRealization<T>,
    policy: CombinerPolicy,
) -> Result<BeamformerSolution<T>> {
    let mult = column_multiplicities(column, users)?;
    let combiners = combiners(&mult.beta, channels, policy)?;
    let tx = channels.tx_antennas();
    let mut streams = Vec::new();
    let mut nullities = Vec::new();
    for (group, &theta) in &mult.theta {
        let h_bar = interference_channel(group, &combiners, channels);
        let basis = linalg::nullspace(&h_bar, T::rank_rtol());
        nullities.push(NullityRecord {
            group: group.clone(),
            theta,
            computed: basis.len(),
            expected: tx as i64 - mult.outside_streams(group) as i64,
        });
        if basis.len() < theta {
            return Err(Error::NullityDeficient {
                group: group.clone(),
                nullity: basis.len(),
                theta,
            });
        }
        for (instance, w) in steer(group, basis, theta, &combiners, channels).into_iter().enumerate() {
            streams.push(Stream {
                group: group.clone(),
                instance,
                beamformer: w,
            });
        }
    }
    Ok(BeamformerSolution {
        policy,
        combiners,
        streams,
        nullities,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub leakage: f64,
    pub sigma: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            leakage: 1e-9,
            sigma: 1e-6,
        }
    }
}

impl Tolerances {
    /// Leakage bound loosened to single-precision round-off.
    pub fn single() -> Self {
        Tolerances {
            leakage: 1e-4,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum NumericFailure {
    Leakage { user: User, group: MulticastGroup, value: f64 },
    Singular { user: User, sigma: f64 },
    StreamCount { user: User, expected: usize, found: usize },
    Nullity { group: MulticastGroup, computed: usize, expected: i64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericReport<T: Real> {
    /// `max ‖U_kᴴ H_k w_T‖` over streams and users outside their group.
    pub max_leakage: T,
    /// Smallest singular value over all per-user effective matrices.
    pub min_sigma: T,
    pub failures: Vec<NumericFailure>,
}

impl<T: Real> NumericReport<T> {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `U_kᴴ H_k [w_T]_{T ∋ k}` for every user with streams.
pub(crate) fn effective_matrices<T: Real>(
    channels: &ChannelRealization<T>,
    solution: &BeamformerSolution<T>,
) -> BTreeMap<User, (Vec<usize>, CMatrix<T>)> {
    let mut out = BTreeMap::new();
    for (&user, u) in &solution.combiners {
        let own: Vec<usize> = solution
            .streams
            .iter()
            .enumerate()
            .filter(|(_, s)| s.group.contains(user))
            .map(|(i, _)| i)
            .collect();
        let combined = u.adjoint() * channels.channel(user);
        let mut e = CMatrix::<T>::zeros(u.ncols(), own.len());
        for (j, &i) in own.iter().enumerate() {
            e.set_column(j, &(&combined * &solution.streams[i].beamformer));
        }
        out.insert(user, (own, e));
    }
    out
}

/// Checks zero leakage, invertible per-user effective matrices, per-user
/// stream counts, and the rank-nullity identity of every group.
pub fn verify_numeric<T: Real>(
    column: &ScheduleColumn,
    users: &[User],
    channels: &ChannelRealization<T>,
    solution: &BeamformerSolution<T>,
    tol: Tolerances,
) -> Result<NumericReport<T>> {
    let mult = column_multiplicities(column, users)?;
    let mut failures = Vec::new();
    let mut max_leakage = T::zero();
    for (&user, u) in &solution.combiners {
        let combined = u.adjoint() * channels.channel(user);
        for s in solution.streams.iter().filter(|s| !s.group.contains(user)) {
            let leak = (&combined * &s.beamformer).norm();
            if leak > max_leakage {
                max_leakage = leak;
            }
            let v = leak.to_f64().unwrap_or(f64::INFINITY);
            if v.is_nan() || v > tol.leakage {
                failures.push(NumericFailure::Leakage {
                    user,
                    group: s.group.clone(),
                    value: v,
                });
            }
        }
    }
    let mut min_sigma = T::max_value().expect("bounded real");
    let effective = effective_matrices(channels, solution);
    for (&user, &expected) in &mult.beta {
        if expected == 0 {
            continue;
        }
        let Some((own, e)) = effective.get(&user) else {
            failures.push(NumericFailure::StreamCount {
                user,
                expected,
                found: 0,
            });
            continue;
        };
        if own.len() != expected {
            failures.push(NumericFailure::StreamCount {
                user,
                expected,
                found: own.len(),
            });
            continue;
        }
        let sigma = linalg::min_singular_value(e);
        if sigma < min_sigma {
            min_sigma = sigma;
        }
        let v = sigma.to_f64().unwrap_or(0.0);
        if !(v > tol.sigma) {
            failures.push(NumericFailure::Singular { user, sigma: v });
        }
    }
    for n in &solution.nullities {
        if n.computed as i64 != n.expected {
            failures.push(NumericFailure::Nullity {
                group: n.group.clone(),
                computed: n.computed,
                expected: n.expected,
            });
        }
    }
    Ok(NumericReport {
        max_leakage,
        min_sigma,
        failures,
    })
}

/// Aggregate of [`verify_numeric`] over many channel draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericSummary {
    pub trials: usize,
    pub checks: usize,
    pub max_leakage: f64,
    pub min_sigma: f64,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl NumericSummary {
    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

/// Runs the numeric oracle on every column of `table` for `trials` channel
/// draws; channel seeds derive from `(seed, trial, column)`.
pub fn numeric_trials<T: Real>(
    table: &ScheduleTable,
    trials: usize,
    seed: u64,
    policy: CombinerPolicy,
    tol: Tolerances,
) -> Result<NumericSummary> {
    let mut summary = NumericSummary {
        trials,
        checks: 0,
        max_leakage: 0.0,
        min_sigma: f64::INFINITY,
        failures: 0,
        first_failure: None,
    };
    for trial in 0..trials {
        for (ci, column) in table.columns.iter().enumerate() {
            let s = seed::derive(seed, &format!("numeric/{trial}/{ci}"));
            let channels =
                ChannelRealization::<T>::draw(&table.users, table.antennas, T::one(), s);
            summary.checks += 1;
            let outcome = build_beamformers(column, &table.users, &channels, policy)
                .and_then(|sol| verify_numeric(column, &table.users, &channels, &sol, tol));
            match outcome {
                Ok(report) => {
                    summary.max_leakage = summary
                        .max_leakage
                        .max(report.max_leakage.to_f64().unwrap_or(f64::INFINITY));
                    summary.min_sigma = summary
                        .min_sigma
                        .min(report.min_sigma.to_f64().unwrap_or(0.0));
                    if !report.pass() {
                        summary.failures += 1;
                        summary.first_failure.get_or_insert_with(|| {
                            format!("trial {trial}, column {ci}: {:?}", report.failures[0])
                        });
                    }
                }
                Err(e) => {
                    summary.failures += 1;
                    summary
                        .first_failure
                        .get_or_insert_with(|| format!("trial {trial}, column {ci}: {e}"));
                }
            }
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{group, group_digits};

    fn users(n: u32) -> Vec<User> {
        (1..=n).collect()
    }

    fn col(groups: &[&str]) -> ScheduleColumn {
        ScheduleColumn::new(groups.iter().map(|s| group_digits(s)).collect())
    }

    /// Final column of the second worked example: S(1) plus {125,134,234}.
    fn example2_column() -> ScheduleColumn {
        col(&["123", "124", "345", "235", "145", "125", "134", "234"])
    }

    #[test]
    fn example2_column_passes_with_zero_slack() {
        let v = check_column(0, &example2_column(), &users(5), Antennas::new(11, 6)).unwrap();
        assert!(v.pass);
        assert_eq!(v.min_slack, 0);
        assert!(v
            .loads
            .iter()
            .any(|l| l.theta == 1 && l.outside == 10 && l.load() == 11));
    }

    #[test]
    fn overloaded_column_fails_c1() {
        // L+1 copies of {1,2}: θ alone exceeds L
        let l = 4;
        let column = ScheduleColumn::new(vec![group(&[1, 2]); l + 1]);
        let v = check_column(0, &column, &users(3), Antennas::new(l, 8)).unwrap();
        assert!(!v.pass);
        assert_eq!(
            v.witnesses,
            vec![Violation::C1 {
                column: 0,
                group: group(&[1, 2]),
                outside: 0,
                theta: 5,
                limit: 4
            }]
        );
    }

    #[test]
    fn c2_witness() {
        let column = col(&["12", "13", "14"]);
        let v = check_column(3, &column, &users(4), Antennas::new(10, 2)).unwrap();
        assert_eq!(
            v.witnesses,
            vec![Violation::C2 {
                column: 3,
                user: 1,
                streams: 3,
                limit: 2
            }]
        );
    }

    #[test]
    fn interference_free_group_uses_full_space() {
        let column = ScheduleColumn::new(vec![group(&[1, 2, 3]); 3]);
        let ch = ChannelRealization::<f64>::draw(&users(3), Antennas::new(4, 3), 1.0, 5);
        let sol = build_beamformers(&column, &users(3), &ch, CombinerPolicy::Random).unwrap();
        assert_eq!(sol.nullities[0].computed, 4);
        assert_eq!(sol.streams.len(), 3);
        let r = verify_numeric(&column, &users(3), &ch, &sol, Tolerances::default()).unwrap();
        assert!(r.pass(), "{:?}", r.failures);
    }

    #[test]
    fn single_user_groups_nullity() {
        // t = 0, L = 4, G = 2, each user decodes two streams
        let column = ScheduleColumn::new(vec![group(&[1]), group(&[1]), group(&[2]), group(&[2])]);
        for s in 0..20 {
            let ch = ChannelRealization::<f64>::draw(&users(2), Antennas::new(4, 2), 1.0, s);
            let sol = build_beamformers(&column, &users(2), &ch, CombinerPolicy::Random).unwrap();
            assert!(sol.nullities.iter().all(|n| n.computed == 2 && n.expected == 2));
            let r = verify_numeric(&column, &users(2), &ch, &sol, Tolerances::default()).unwrap();
            assert!(r.pass(), "{:?}", r.failures);
        }
    }

    #[test]
    fn example1_profile_column_nullities() {
        // β profile (3,3,3,3,2) over 5 users, L = 10
        let column = col(&["12", "13", "14", "23", "25", "34", "45"]);
        let u = users(5);
        let m = column_multiplicities(&column, &u).unwrap();
        assert_eq!(m.dof(), 14);
        for s in 0..20 {
            let ch = ChannelRealization::<f64>::draw(&u, Antennas::new(10, 3), 1.0, s);
            for policy in [CombinerPolicy::Random, CombinerPolicy::ChannelAligned] {
                let sol = build_beamformers(&column, &u, &ch, policy).unwrap();
                for n in &sol.nullities {
                    assert_eq!(n.computed as i64, n.expected, "{n:?}");
                }
                let r = verify_numeric(&column, &u, &ch, &sol, Tolerances::default()).unwrap();
                assert!(r.pass(), "{:?}", r.failures);
            }
        }
        // {2,5}: outside users 1,3,4 carry 9 streams, leaving nullity 1
        let rec = build_beamformers(
            &column,
            &u,
            &ChannelRealization::<f64>::draw(&u, Antennas::new(10, 3), 1.0, 99),
            CombinerPolicy::Random,
        )
        .unwrap();
        let n25 = rec.nullities.iter().find(|n| n.group == group(&[2, 5])).unwrap();
        assert_eq!(m.outside_streams(&group(&[2, 5])), 9);
        assert_eq!(n25.computed, 1);
    }

    #[test]
    fn full_receive_load_is_still_invertible() {
        // every user decodes G = 2 streams
        let column = col(&["12", "13", "23"]);
        for s in 0..20 {
            let ch = ChannelRealization::<f64>::draw(&users(3), Antennas::new(6, 2), 1.0, s);
            let sol = build_beamformers(&column, &users(3), &ch, CombinerPolicy::Random).unwrap();
            let r = verify_numeric(&column, &users(3), &ch, &sol, Tolerances::default()).unwrap();
            assert!(r.pass(), "{:?}", r.failures);
            assert!(r.min_sigma > 1e-6);
        }
    }

    #[test]
    fn overloaded_column_is_nullity_deficient() {
        // {1,2}: outside user 3 has 2 streams, θ = 3, L = 4 → load 5
        let column = col(&["12", "12", "12", "13", "23"]);
        let v = check_column(0, &column, &users(3), Antennas::new(4, 8)).unwrap();
        assert!(!v.pass);
        let ch = ChannelRealization::<f64>::draw(&users(3), Antennas::new(4, 8), 1.0, 1);
        let err = build_beamformers(&column, &users(3), &ch, CombinerPolicy::Random).unwrap_err();
        assert!(matches!(err, Error::NullityDeficient { nullity: 2, theta: 3, .. }));
    }

    #[test]
    fn verification_is_monotone_in_tolerance() {
        let column = example2_column();
        let u = users(5);
        let ch = ChannelRealization::<f64>::draw(&u, Antennas::new(11, 6), 1.0, 3);
        let sol = build_beamformers(&column, &u, &ch, CombinerPolicy::Random).unwrap();
        let tight = verify_numeric(&column, &u, &ch, &sol, Tolerances::default()).unwrap();
        assert!(tight.pass());
        let loose = Tolerances {
            leakage: 1e-3,
            sigma: 1e-6,
        };
        assert!(verify_numeric(&column, &u, &ch, &sol, loose).unwrap().pass());
    }

    #[test]
    fn single_precision_instantiation() {
        let column = example2_column();
        let u = users(5);
        let ch = crate::ChannelRealization32::draw(&u, Antennas::new(11, 6), 1.0, 3);
        let sol = build_beamformers(&column, &u, &ch, CombinerPolicy::Random).unwrap();
        let tol = Tolerances {
            leakage: 1e-4,
            sigma: 1e-3,
        };
        let r = verify_numeric(&column, &u, &ch, &sol, tol).unwrap();
        assert!(r.pass(), "{:?}", r.failures);
    }

    #[test]
    fn channels_are_reproducible() {
        let a = ChannelRealization::<f64>::draw(&users(3), Antennas::new(4, 2), 1.0, 11);
        let b = ChannelRealization::<f64>::draw(&users(3), Antennas::new(4, 2), 1.0, 11);
        assert_eq!(a.matrices, b.matrices);
    }
}
