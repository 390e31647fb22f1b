//! Finite-SNR evaluation under nullspace zero-forcing with equal power.
//!
//! Each user inverts its `β_k×β_k` effective matrix after combining. The
//! SINR of stream `j` is then `p / (p·ℓ_j + N₀·[FFᴴ]_jj)` with `p` the
//! per-stream power and `ℓ_j` the residual leakage after filtering, so the
//! SNR-independent pieces `(ℓ_j, [FFᴴ]_jj)` are computed once per channel
//! draw and reused across the whole sweep.

use std::thread;

use serde::Serialize;

use crate::decodability::{build_beamformers, effective_matrices, BeamformerSolution, ChannelRealization, CombinerPolicy};
use crate::error::{Error, Result};
use crate::model::{binomial, MulticastGroup, ScheduleColumn, ScheduleTable, User};
use crate::{linalg, seed, Real};

/// SNR-independent part of one stream's SINR at one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamGain<T: Real> {
    pub group: MulticastGroup,
    pub instance: usize,
    pub user: User,
    /// `Σ_s |f_j · U_kᴴ H_k w_s|²` over streams `s` not intended for the user.
    pub leakage: T,
    /// `‖f_j‖²`, the noise amplification of the filter row.
    pub noise_gain: T,
}

impl<T: Real> StreamGain<T> {
    /// SINR for per-stream power `p` and noise power `n0`.
    pub fn sinr(&self, p: T, n0: T) -> T {
        if p <= T::zero() {
            return T::zero();
        }
        p / (p * self.leakage + n0 * self.noise_gain)
    }
}

/// Zero-forcing receive filters for every user; fails if an effective matrix
/// is numerically singular.
pub fn stream_gains<T: Real>(
    channels: &ChannelRealization<T>,
    solution: &BeamformerSolution<T>,
) -> Result<Vec<StreamGain<T>>> {
    let mut out = Vec::with_capacity(solution.streams.len());
    for (user, (own, e)) in effective_matrices(channels, solution) {
        let sigma = linalg::min_singular_value(&e);
        let f = if sigma > T::rank_rtol() {
            e.clone().try_inverse()
        } else {
            None
        }
        .ok_or_else(|| {
            Error::Verification(format!("user {user}: singular effective matrix (σ_min = {sigma})"))
        })?;
        let u = &solution.combiners[&user];
        let combined = u.adjoint() * channels.channel(user);
        let foreign: Vec<_> = solution
            .streams
            .iter()
            .filter(|s| !s.group.contains(user))
            .map(|s| &combined * &s.beamformer)
            .collect();
        for (j, &si) in own.iter().enumerate() {
            let row = f.row(j);
            let leakage = foreign
                .iter()
                .map(|v| (row * v)[(0, 0)].norm_sqr())
                .fold(T::zero(), |a, b| a + b);
            let stream = &solution.streams[si];
            out.push(StreamGain {
                group: stream.group.clone(),
                instance: stream.instance,
                user,
                leakage,
                noise_gain: row.norm_squared(),
            });
        }
    }
    Ok(out)
}

/// Per-(group instance, receiver) SINR with `power_total` split equally
/// across the column's streams.
pub fn stream_sinrs<T: Real>(
    channels: &ChannelRealization<T>,
    solution: &BeamformerSolution<T>,
    power_total: T,
    n0: T,
) -> Result<Vec<((MulticastGroup, usize, User), T)>> {
    let p = per_stream_power(power_total, solution.streams.len());
    Ok(stream_gains(channels, solution)?
        .into_iter()
        .map(|g| ((g.group.clone(), g.instance, g.user), g.sinr(p, n0)))
        .collect())
}

fn per_stream_power<T: Real>(power_total: T, streams: usize) -> T {
    if streams == 0 {
        T::zero()
    } else {
        power_total / T::lit(streams as f64)
    }
}

/// Common rate of a column: the worst stream's `log2(1 + SINR)`.
pub fn column_rate<T: Real>(sinrs: impl IntoIterator<Item = T>) -> T {
    sinrs
        .into_iter()
        .map(|s| (T::one() + s).log2())
        .fold(None, |acc: Option<T>, r| Some(acc.map_or(r, |a| a.min(r))))
        .unwrap_or(T::zero())
}

/// `K / Σ_i 1/(Θ·R(i))`; zero as soon as one column has zero rate.
pub fn symmetric_rate<T: Real>(k: usize, theta: u64, column_rates: &[T]) -> T {
    if column_rates.is_empty() || column_rates.iter().any(|&r| r <= T::zero()) {
        return T::zero();
    }
    let theta = T::lit(theta as f64);
    let total_time = column_rates
        .iter()
        .map(|&r| T::one() / (theta * r))
        .fold(T::zero(), |a, b| a + b);
    T::lit(k as f64) / total_time
}

/// `Θ = C(Ω, t)·δ·δ̃` for a constructed table.
pub fn table_subpacketization(table: &ScheduleTable) -> u64 {
    binomial(table.omega() as u64, table.t as u64) * table.subpacketization_factor() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint<T: Real> {
    pub snr_db: f64,
    /// Mean `R(i)` per column over the trials.
    pub per_column_rate: Vec<T>,
    /// Mean `R_sym` over the trials.
    pub symmetric_rate: T,
    pub symmetric_rate_std: T,
    /// Smallest `R(i)` seen in any trial and column.
    pub min_column_rate: T,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepConfig {
    pub trials: usize,
    pub seed: u64,
    pub noise_power: f64,
    pub policy: CombinerPolicy,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            trials: 200,
            seed: 0,
            noise_power: 1.0,
            policy: CombinerPolicy::ChannelAligned,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep<T: Real> {
    pub dof: usize,
    pub theta: u64,
    pub k: usize,
    pub points: Vec<RatePoint<T>>,
}

impl<T: Real> Sweep<T> {
    /// Least-squares slope of mean `R_sym` against SNR in dB over points at or
    /// above `from_db`.
    pub fn slope(&self, from_db: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| p.snr_db >= from_db)
            .map(|p| (p.snr_db, p.symmetric_rate.to_f64().unwrap_or(f64::NAN)))
            .collect();
        linear_slope(&pts)
    }

    /// CSV with header `snr_db,mean_rsym,std_rsym,min_column_rate,dof,theta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("snr_db,mean_rsym,std_rsym,min_column_rate,dof,theta\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{:.9e},{:.9e},{:.9e},{},{}\n",
                p.snr_db,
                p.symmetric_rate.to_f64().unwrap_or(f64::NAN),
                p.symmetric_rate_std.to_f64().unwrap_or(f64::NAN),
                p.min_column_rate.to_f64().unwrap_or(f64::NAN),
                self.dof,
                self.theta
            ));
        }
        out
    }
}

pub fn linear_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Parses `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::RejectedParameters(format!("bad SNR grid {spec:?}"));
    let nums = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    if spec.contains(':') {
        let parts: Vec<f64> = spec.split(':').map(nums).collect::<Result<_>>()?;
        let [start, step, stop] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| start + step * i as f64).collect())
    } else {
        spec.split(',').map(nums).collect()
    }
}

/// Per-column stream gains of one trial. One channel draw, seeded from
/// `(seed, trial)`, covers every column and every SNR point.
fn trial_gains<T: Real>(
    table: &ScheduleTable,
    config: &SweepConfig,
    trial: usize,
) -> Result<Vec<(usize, Vec<StreamGain<T>>)>> {
    let s = seed::derive(config.seed, &format!("rate/{trial}"));
    let channels = ChannelRealization::<T>::draw(&table.users, table.antennas, T::lit(config.noise_power), s);
    table
        .columns
        .iter()
        .map(|column| column_gains(column, &table.users, &channels, config.policy))
        .collect()
}

fn column_gains<T: Real>(
    column: &ScheduleColumn,
    users: &[User],
    channels: &ChannelRealization<T>,
    policy: CombinerPolicy,
) -> Result<(usize, Vec<StreamGain<T>>)> {
    let solution = build_beamformers(column, users, channels, policy)?;
    Ok((solution.streams.len(), stream_gains(channels, &solution)?))
}

/// Mean and spread of `R_sym` at every SNR point, with the user count taken
/// as `K = Ω`.
pub fn snr_sweep<T: Real + Send + Sync>(
    table: &ScheduleTable,
    grid_db: &[f64],
    config: &SweepConfig,
) -> Result<Sweep<T>> {
    let dof = table
        .multiplicities()?
        .iter()
        .map(|m| m.dof())
        .max()
        .unwrap_or(0);
    let theta = table_subpacketization(table);
    let k = table.omega();
    let n0 = T::lit(config.noise_power);
    let powers: Vec<T> = grid_db.iter().map(|db| T::lit(10f64.powf(db / 10.0))).collect();

    // rates[trial][point][column]
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(config.trials.max(1));
    let per_trial = |trial: usize| -> Result<Vec<Vec<T>>> {
        let gains = trial_gains::<T>(table, config, trial)?;
        Ok(powers
            .iter()
            .map(|&power| {
                gains
                    .iter()
                    .map(|(streams, g)| {
                        let p = per_stream_power(power, *streams);
                        column_rate(g.iter().map(|s| s.sinr(p, n0)))
                    })
                    .collect()
            })
            .collect())
    };
    let rates: Vec<Vec<Vec<T>>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let per_trial = &per_trial;
                scope.spawn(move || {
                    (w..config.trials)
                        .step_by(workers)
                        .map(|trial| per_trial(trial).map(|r| (trial, r)))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        let mut all = Vec::with_capacity(config.trials);
        for h in handles {
            all.extend(h.join().expect("sweep worker panicked")?);
        }
        all.sort_by_key(|(trial, _)| *trial);
        Ok::<_, Error>(all.into_iter().map(|(_, r)| r).collect())
    })?;

    let n = T::lit(config.trials.max(1) as f64);
    let points = grid_db
        .iter()
        .enumerate()
        .map(|(pi, &snr_db)| {
            let cols = table.columns.len();
            let mut per_column = vec![T::zero(); cols];
            let mut min_rate: Option<T> = None;
            let rsym: Vec<T> = rates
                .iter()
                .map(|trial| {
                    let r = &trial[pi];
                    for (acc, &x) in per_column.iter_mut().zip(r) {
                        *acc += x;
                        min_rate = Some(min_rate.map_or(x, |m: T| m.min(x)));
                    }
                    symmetric_rate(k, theta, r)
                })
                .collect();
            let mean = rsym.iter().fold(T::zero(), |a, &b| a + b) / n;
            let var = rsym.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean)) / n;
            RatePoint {
                snr_db,
                per_column_rate: per_column.into_iter().map(|x| x / n).collect(),
                symmetric_rate: mean,
                symmetric_rate_std: var.sqrt(),
                min_column_rate: min_rate.unwrap_or(T::zero()),
                trials: config.trials,
                seed: config.seed,
            }
        })
        .collect();
    Ok(Sweep { dof, theta, k, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decodability::Stream;
    use crate::linalg::CMatrix;
    use crate::model::{group, Antennas};
    use nalgebra::Complex;
    use std::collections::BTreeMap;

    fn scalar_setup(h: Complex<f64>) -> (ChannelRealization<f64>, BeamformerSolution<f64>) {
        let channels = ChannelRealization {
            users: vec![1],
            matrices: vec![CMatrix::from_element(1, 1, h)],
            noise_power: 1.0,
            seed: 0,
        };
        let one = CMatrix::from_element(1, 1, Complex::new(1.0, 0.0));
        let solution = BeamformerSolution {
            policy: CombinerPolicy::Random,
            combiners: BTreeMap::from([(1, one)]),
            streams: vec![Stream {
                group: group(&[1]),
                instance: 0,
                beamformer: nalgebra::DVector::from_element(1, Complex::new(1.0, 0.0)),
            }],
            nullities: Vec::new(),
        };
        (channels, solution)
    }

    #[test]
    fn scalar_channel_sinr_is_snr() {
        let h = Complex::from_polar(1.0, 0.7);
        let (ch, sol) = scalar_setup(h);
        let s = stream_sinrs(&ch, &sol, 40.0, 2.0).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].1 - 20.0).abs() < 1e-12);
        let zero = stream_sinrs(&ch, &sol, 0.0, 2.0).unwrap();
        assert_eq!(zero[0].1, 0.0);
    }

    #[test]
    fn uniform_and_bottleneck_column_rates() {
        assert!((column_rate([3.0f64, 3.0, 3.0]) - 2.0).abs() < 1e-12);
        assert_eq!(column_rate([7.0, 0.0, 15.0]), 0.0);
        assert_eq!(symmetric_rate(5, 10, &[1.0, 0.0]), 0.0);
        // K / Σ 1/(ΘR)
        let r = [1.0f64, 2.0, 4.0];
        let expected = 5.0 / (1.0 / 10.0 + 1.0 / 20.0 + 1.0 / 40.0);
        assert!((symmetric_rate(5, 10, &r) - expected).abs() < 1e-12);
    }

    fn example1_column() -> (ScheduleTable, ScheduleColumn) {
        let a = Antennas::new(10, 3);
        let plan = crate::symmetric::SymmetricPlan::for_beta(a, 1, 5, 2, 12, 2).unwrap();
        let table = crate::symmetric::symmetric_table(&plan, &[1, 2, 3, 4, 5], 1, a).unwrap();
        let c = table.columns[0].clone();
        (table, c)
    }

    #[test]
    fn zf_leakage_is_negligible_and_sinr_linear_in_power() {
        let (table, column) = example1_column();
        for s in 0..10 {
            let ch = ChannelRealization::<f64>::draw(&table.users, table.antennas, 1.0, s);
            let sol = build_beamformers(&column, &table.users, &ch, CombinerPolicy::ChannelAligned).unwrap();
            let gains = stream_gains(&ch, &sol).unwrap();
            assert_eq!(gains.len(), 10);
            assert!(gains.iter().all(|g| g.leakage <= 1e-12));
            let a = stream_sinrs(&ch, &sol, 100.0, 1.0).unwrap();
            let b = stream_sinrs(&ch, &sol, 200.0, 1.0).unwrap();
            let c = stream_sinrs(&ch, &sol, 300.0, 1.5).unwrap();
            for ((x, y), z) in a.iter().zip(&b).zip(&c) {
                assert_eq!(x.0, y.0);
                assert!((y.1 / x.1 - 2.0).abs() < 1e-9);
                assert!((z.1 / x.1 - 2.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sweep_statistics() {
        let (table, _) = example1_column();
        let config = SweepConfig {
            trials: 20,
            seed: 3,
            ..Default::default()
        };
        let sweep = snr_sweep::<f64>(&table, &[-300.0, 0.0, 10.0, 20.0, 30.0], &config).unwrap();
        assert_eq!((sweep.dof, sweep.theta, sweep.k), (10, 5, 5));
        assert!(sweep.points[0].symmetric_rate < 1e-20);
        for w in sweep.points.windows(2) {
            assert!(w[1].symmetric_rate >= w[0].symmetric_rate);
        }
        assert!(sweep.points[4].min_column_rate > 0.0);
        let again = snr_sweep::<f64>(&table, &[0.0, 10.0, 20.0, 30.0], &config).unwrap();
        assert_eq!(again.points[3], sweep.points[4]);
        let csv = sweep.to_csv();
        assert!(csv.starts_with("snr_db,mean_rsym,std_rsym,min_column_rate,dof,theta\n"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn f32_sweep_runs() {
        let (table, _) = example1_column();
        let config = SweepConfig {
            trials: 4,
            ..Default::default()
        };
        let sweep = snr_sweep::<f32>(&table, &[20.0], &config).unwrap();
        assert!(sweep.points[0].symmetric_rate > 0.0);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:5:35").unwrap(), vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0]);
        assert_eq!(parse_grid("1,2.5").unwrap(), vec![1.0, 2.5]);
        assert!(parse_grid("0:0:5").is_err());
        assert!(parse_grid("a").is_err());
    }

    #[test]
    fn slope_of_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 * i as f64 + 1.0)).collect();
        assert!((linear_slope(&pts).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(linear_slope(&pts[..1]), None);
    }
}
