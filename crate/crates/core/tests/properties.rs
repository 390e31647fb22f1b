use ccsched_core::asymmetric::{build_asymmetric, dof_of_table, m_bound, solve_plan, RetryLadder, TableDof};
use ccsched_core::decodability::{numeric_trials, theorem1_check, CombinerPolicy, Tolerances};
use ccsched_core::model::{binomial, Antennas};
use ccsched_core::symmetric::{feasible_beta_set, symmetric_table, SymmetricPlan, DEFAULT_DELTA_MAX};
use ccsched_core::{Error, ScheduleTable};
use proptest::prelude::*;

fn users(omega: usize) -> Vec<u32> {
    (1..=omega as u32).collect()
}

/// `(Ω, t, L, G)` with `1 ≤ t ≤ Ω − 2`.
fn system() -> impl Strategy<Value = (usize, usize, Antennas)> {
    (3usize..=8)
        .prop_flat_map(|omega| (Just(omega), 1..=omega - 2))
        .prop_flat_map(|(omega, t)| (Just(omega), Just(t), t + 1..=16usize, 1usize..=8))
        .prop_map(|(omega, t, l, g)| (omega, t, Antennas::new(l, g)))
}

fn baseline(omega: usize, t: usize, a: Antennas, beta: usize, min_columns: usize) -> Option<(SymmetricPlan, ScheduleTable)> {
    let plan = SymmetricPlan::for_beta(a, t, omega, beta, DEFAULT_DELTA_MAX, min_columns).ok()?;
    let table = symmetric_table(&plan, &users(omega), t, a).ok()?;
    Some((plan, table))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn symmetric_tables_are_balanced_and_decodable((omega, t, a) in system()) {
        for beta in feasible_beta_set(a, t, omega, DEFAULT_DELTA_MAX).unwrap() {
            let (plan, table) = baseline(omega, t, a, beta, 1).expect("feasible β builds");
            prop_assert_eq!(table.columns.len(), plan.s);
            prop_assert!(table.columns.iter().all(|c| c.len() == plan.b));
            for m in table.multiplicities().unwrap() {
                prop_assert!(m.beta.values().all(|&b| b == beta));
            }
            prop_assert_eq!(table.conservation().unwrap(), table.subpacketization_factor());
            prop_assert_eq!(
                (plan.b * plan.s) as u64,
                binomial(omega as u64, t as u64 + 1) * plan.delta as u64
            );
            prop_assert!(theorem1_check(&table).unwrap().pass);
            prop_assert_eq!(dof_of_table(&table).unwrap(), TableDof::Uniform(omega * beta));
        }
    }

    #[test]
    fn accepted_asymmetric_plans_keep_identities(
        (omega, t, a) in system(),
        pick in 0usize..64,
        m_pick in 0usize..64,
        reseed in any::<u64>(),
    ) {
        let betas: Vec<usize> = feasible_beta_set(a, t, omega, DEFAULT_DELTA_MAX).unwrap().into_iter().collect();
        prop_assume!(!betas.is_empty());
        let beta = betas[pick % betas.len()];
        let Some((plan, base)) = baseline(omega, t, a, beta, 2) else { return Ok(()) };
        let top = m_bound(a.rx, beta, omega, t).min(plan.b);
        prop_assume!(top > 0);
        let m = 1 + m_pick % top;
        let ladder = RetryLadder { reseeds: 1, seed: reseed, ..Default::default() };
        let Ok(built) = build_asymmetric(&base, beta, m, ladder) else { return Ok(()) };
        let p = built.plan.unwrap();
        prop_assert_eq!(p.m * p.d, p.b * p.r);
        prop_assert_eq!(p.delta_tilde * p.b, (p.b + p.m) * p.d);
        prop_assert_eq!(p.s_tilde, p.d * p.s);
        prop_assert_eq!(p.m * p.s_tilde, p.b * (p.delta_tilde * p.s - p.s_tilde));
        let table = &built.table;
        prop_assert_eq!(table.columns.len(), p.s_tilde);
        prop_assert_eq!(table.conservation().unwrap(), plan.delta * p.delta_tilde);
        prop_assert!(theorem1_check(table).unwrap().pass);
        prop_assert_eq!(dof_of_table(table).unwrap(), TableDof::Uniform(omega * beta + m * (t + 1)));
        for c in &built.collections {
            prop_assert!(c.validate(p.m, p.r, p.tau).is_ok());
        }
    }

    #[test]
    fn plan_d_is_minimal(b in 1usize..40, s in 1usize..10, m in 1usize..40) {
        match solve_plan(b, s, m, usize::MAX / 4, 0, 4, 1) {
            Ok(p) => {
                prop_assert!(p.identities_hold());
                prop_assert!((1..p.d).all(|d| (d * m) % b != 0));
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn m_above_bound_is_rejected(rx in 1usize..9, beta in 0usize..9, omega in 3usize..9, t in 1usize..3) {
        let bound = m_bound(rx, beta, omega, t);
        prop_assert_eq!(
            solve_plan(4, 2, bound + 1, rx, beta, omega, t),
            Err(Error::InfeasibleM { m: bound + 1, bound })
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Symbolic pass implies generic numeric decodability.
    #[test]
    fn symbolic_pass_implies_numeric_pass((omega, t, a) in system(), pick in 0usize..8, m_pick in 0usize..8, seed in any::<u64>()) {
        let betas: Vec<usize> = feasible_beta_set(a, t, omega, DEFAULT_DELTA_MAX).unwrap().into_iter().collect();
        prop_assume!(!betas.is_empty());
        let beta = betas[pick % betas.len()];
        let Some((plan, base)) = baseline(omega, t, a, beta, 2) else { return Ok(()) };
        let top = m_bound(a.rx, beta, omega, t).min(plan.b);
        let m = if top == 0 { 0 } else { m_pick % (top + 1) };
        let Ok(built) = build_asymmetric(&base, beta, m, RetryLadder::default()) else { return Ok(()) };
        let summary = numeric_trials::<f64>(&built.table, 2, seed, CombinerPolicy::Random, Tolerances::default()).unwrap();
        prop_assert!(summary.pass(), "{:?}", summary.first_failure);
    }
}
