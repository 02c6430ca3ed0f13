use std::sync::Arc;

use qfel_core::dynamics::{evolve, initial_state, propagate, Generator, IntegratorConfig, PhotonSeed, QuantumState, Scheme};
use qfel_core::hamiltonians::{dicke_hamiltonian, fourier_components, EffectiveHamiltonianSet, ModelParams};
use qfel_core::{enumerate_basis, AveragingMode, CompositeBasis, LadderWindow};

fn basis(n: u32, lo: i32, hi: i32, n_max: u32, sector: Option<i64>) -> Arc<CompositeBasis> {
    enumerate_basis(n, LadderWindow::new(lo, hi).unwrap(), n_max, sector).unwrap().shared()
}

fn audit_off() -> IntegratorConfig<f64> {
    IntegratorConfig { leakage_tol: 1.0, ..Default::default() }
}

#[test]
fn dicke_limit_convergence() {
    let mut errs = Vec::new();
    for alpha in [0.5, 0.2, 0.05] {
        let full_b = basis(2, -2, 3, 12, Some(0));
        let dicke_b = basis(2, 0, 1, 12, Some(0));
        let p = ModelParams::from_alpha_kappa(2, alpha, 0.0).unwrap();
        let comps = fourier_components(&full_b, &p);
        let h = dicke_hamiltonian(&dicke_b, &p);
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05 / alpha).collect();
        let full = evolve(&initial_state(&full_b, PhotonSeed::Fock(0)).unwrap(), &Generator::rotating(&comps, &p), &grid, &audit_off()).unwrap();
        let dicke = evolve(&initial_state(&dicke_b, PhotonSeed::Fock(0)).unwrap(), &Generator::Static(&h), &grid, &audit_off()).unwrap();
        let err = full.records.iter().zip(&dicke.records).map(|(a, b)| (a.n_mean - b.n_mean).abs()).fold(0.0, f64::max);
        errs.push(err);
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(errs[2] < 1e-3);
}

#[test]
fn effective_energy_is_conserved() {
    let b = basis(2, -2, 3, 14, None);
    let p = ModelParams::from_alpha_kappa(2, 0.3, 0.8).unwrap();
    let set = EffectiveHamiltonianSet::build(&b, &p, AveragingMode::Analytic).unwrap();
    let g = set.generator(3).unwrap();
    let QuantumState::Pure(s) = initial_state(&b, PhotonSeed::Coherent(1.0)).unwrap() else { panic!() };
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 2.0).collect();
    // RK4 is not unitary; it needs a finer step to hold the same tolerance
    for (scheme, step) in [(Scheme::CommutatorFree4, 0.05), (Scheme::Rk4, 0.005)] {
        let states = propagate(&s, &Generator::Static(&g), &grid, step, scheme).unwrap();
        let e0 = g.expectation(states[0].amplitudes()).re;
        for st in &states {
            let e = g.expectation(st.amplitudes()).re;
            assert!((e - e0).abs() <= 1e-9 * e0.abs(), "{scheme}: {e} vs {e0}");
        }
    }
}

#[test]
fn charge_conserved_on_full_trajectory() {
    let b = basis(3, -1, 2, 12, None);
    let p = ModelParams::from_alpha_kappa(3, 0.4, 0.5).unwrap();
    let comps = fourier_components(&b, &p);
    let s = initial_state(&b, PhotonSeed::Coherent(0.8)).unwrap();
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
    let tr = evolve(&s, &Generator::rotating(&comps, &p), &grid, &audit_off()).unwrap();
    let c0 = tr.records[0].charge;
    assert!(tr.records.iter().all(|r| (r.charge - c0).abs() <= 1e-8));
}

fn resonant_n8() -> (Vec<f64>, Vec<f64>) {
    let b = basis(8, -1, 2, 16, Some(0));
    let p = ModelParams::from_alpha_kappa(8, 0.1, 0.0).unwrap();
    let comps = fourier_components(&b, &p);
    let grid: Vec<f64> = (0..=12).map(|k| k as f64).collect();
    let tr = evolve(&initial_state(&b, PhotonSeed::Fock(0)).unwrap(), &Generator::rotating(&comps, &p), &grid, &IntegratorConfig::default()).unwrap();
    assert!(tr.meta.flags.is_empty(), "{:?}", tr.meta.flags);
    (grid.iter().map(|t| 0.1 * t).collect(), tr.records.iter().map(|r| r.n_mean).collect())
}

#[test]
fn parametric_regime_validity() {
    let (at, n) = resonant_n8();
    let rel: Vec<f64> = at.iter().zip(&n).skip(1).map(|(x, n)| (n - x.sinh().powi(2)).abs() / x.sinh().powi(2)).collect();
    let valid: Vec<usize> = (0..rel.len()).filter(|&i| n[i + 1] / 8.0 <= 0.1).collect();
    assert!(valid.len() >= 5);
    for &i in &valid {
        assert!(rel[i] <= 0.15, "α_Nτ={} rel {}", at[i + 1], rel[i]);
    }
    let last_valid = *valid.last().unwrap();
    assert!(rel[rel.len() - 1] > rel[last_valid]);
}

#[test]
fn resonant_growth_at_unit_gain() {
    let (at, n) = resonant_n8();
    let i = at.iter().position(|&x| (x - 1.0).abs() < 1e-12).unwrap();
    let want = 1.0f64.sinh().powi(2);
    assert!((n[i] - want).abs() / want <= 0.15, "{}", n[i]);
}
