//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use qfel_core::dynamics::{evolve, initial_state, Generator, IntegratorConfig, PhotonSeed};
use qfel_core::gain_analytics::{
    cubic_dispersion, deep_dispersion, parametric_propagator, photon_moments, spontaneous_photons, third_order_gain,
    MomentumAxis, PropagatorOrder,
};
use qfel_core::hamiltonians::{effective_hamiltonian, fourier_components, ModelParams};
use qfel_core::sparse::SparseOp;
use qfel_core::{collective_jump, commutator, enumerate_basis, AveragingMode, LadderWindow};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// `p/q` values `0.5 + i·h` for `|i| ≤ m`; 0.5 itself is an exact grid point.
fn symmetric_p_grid(half_width: f64, m: i32) -> Vec<f64> {
    let h = half_width / m as f64;
    (-m..=m).map(|i| 0.5 + i as f64 * h).collect()
}

fn argmax(xs: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for &x in xs {
        let y = f(x);
        if y > best.0 {
            best = (y, x);
        }
    }
    best.1
}

fn cubic_gain(alpha: f64, p_over_q: f64) -> f64 {
    cubic_dispersion(alpha, 2.0 * p_over_q - 1.0).unwrap().im_plus
}

fn deep_gain(alpha: f64, p_over_q: f64) -> f64 {
    let axis = MomentumAxis::new(p_over_q, alpha).unwrap();
    deep_dispersion(alpha, axis.kappa).unwrap().im_plus
}

fn series_consistency() -> Outcome {
    let alpha = 0.1;
    let at_resonance = (cubic_dispersion(alpha, 0.0).unwrap().im_plus - 0.09984375f64).abs();
    let mut gap = 0.0f64;
    for i in 0..=300 {
        let kappa = -1.5 + 3.0 * i as f64 / 300.0;
        let third = third_order_gain(alpha, kappa).unwrap();
        gap = gap.max((cubic_dispersion(alpha, kappa * alpha).unwrap().im_plus - third).abs());
    }
    outcome(at_resonance <= 5e-5 && gap <= 1e-4, format!("|cubic - 0.09984375| = {at_resonance:.3e} (<= 5e-5), max gap over kappa = {gap:.3e} (<= 1e-4)"))
}

fn two_level_gap() -> Outcome {
    let gap = |alpha: f64| {
        symmetric_p_grid(alpha, 200).iter().map(|&p| (deep_gain(alpha, p) - cubic_gain(alpha, p)).abs()).fold(0.0, f64::max)
    };
    let (small, large) = (gap(0.1), gap(0.5));
    outcome(large >= 10.0 * small, format!("gap(0.5) = {large:.3e}, gap(0.1) = {small:.3e}, ratio {:.1} (>= 10)", large / small))
}

fn peak_shift() -> Outcome {
    let alpha = 0.5;
    let grid = symmetric_p_grid(0.75 * alpha, 600);
    let third = argmax(&grid, |p| third_order_gain(alpha, MomentumAxis::new(p, alpha).unwrap().kappa).unwrap());
    let deep = argmax(&grid, |p| deep_gain(alpha, p));
    outcome(third < 0.5 && deep == 0.5, format!("third-order argmax p/q = {third:.5} (< 0.5), deep argmax p/q = {deep} (== 0.5)"))
}

struct ExactRun {
    alpha_tau: Vec<f64>,
    n_mean: Vec<f64>,
    n_var: Vec<f64>,
}

fn exact_resonant_run(n: u32) -> ExactRun {
    let basis = enumerate_basis(n, LadderWindow::new(-1, 2).unwrap(), 16, Some(0)).unwrap().shared();
    let params = ModelParams::from_alpha_kappa(n, 0.1, 0.0).unwrap();
    let comps = fourier_components(&basis, &params);
    let grid: Vec<f64> = (0..=12).map(|k| k as f64).collect();
    let state = initial_state(&basis, PhotonSeed::Fock(0)).unwrap();
    let tr = evolve(&state, &Generator::rotating(&comps, &params), &grid, &IntegratorConfig::default()).unwrap();
    ExactRun {
        alpha_tau: grid.iter().map(|t| 0.1 * t).collect(),
        n_mean: tr.records.iter().map(|r| r.n_mean).collect(),
        n_var: tr.records.iter().map(|r| r.n_var).collect(),
    }
}

fn relative_deviation(run: &ExactRun, i: usize) -> f64 {
    let want = run.alpha_tau[i].sinh().powi(2);
    (run.n_mean[i] - want).abs() / want
}

fn exact_oracle_gain(runs: &[(u32, ExactRun)]) -> Outcome {
    let (_, n8) = runs.iter().find(|(n, _)| *n == 8).unwrap();
    let mut worst = (0.0f64, 0.0);
    for i in 0..n8.alpha_tau.len() {
        let x = n8.alpha_tau[i];
        if (0.2 - 1e-12..=1.2 + 1e-12).contains(&x) {
            let rel = relative_deviation(n8, i);
            if rel > worst.0 {
                worst = (rel, x);
            }
        }
    }
    let last = n8.alpha_tau.len() - 1;
    let at_end: Vec<f64> = runs.iter().map(|(_, r)| relative_deviation(r, last)).collect();
    let monotone = at_end.windows(2).all(|w| w[1] < w[0]);
    outcome(
        worst.0 <= 0.15 && monotone,
        format!(
            "N=8 max |<n>/sinh^2 - 1| = {:.4} at alpha_N tau = {:.1} (<= 0.15); deviation at 1.2 for N=2,4,8 = {:.4}, {:.4}, {:.4} (decreasing: {monotone})",
            worst.0, worst.1, at_end[0], at_end[1], at_end[2]
        ),
    )
}

fn thermal_statistics(runs: &[(u32, ExactRun)]) -> Outcome {
    let (_, n8) = runs.iter().find(|(n, _)| *n == 8).unwrap();
    let mut worst = (0.0f64, 0.0);
    for i in 0..n8.alpha_tau.len() {
        if n8.alpha_tau[i] <= 1.2 + 1e-12 {
            let (m, v) = (n8.n_mean[i], n8.n_var[i]);
            let rel = (v - m * (m + 1.0)).abs() / v.max(1e-6);
            if rel > worst.0 {
                worst = (rel, n8.alpha_tau[i]);
            }
        }
    }
    outcome(worst.0 <= 0.2, format!("N=8 max |var - n(n+1)|/var = {:.4} at alpha_N tau = {:.1} (<= 0.20)", worst.0, worst.1))
}

fn averaging_equality() -> Outcome {
    let mut worst = 0.0f64;
    for n in 1..=3 {
        let basis = enumerate_basis(n, LadderWindow::new(-3, 4).unwrap(), 6, None).unwrap();
        let params = ModelParams::from_alpha_kappa(n, 0.3, 0.8).unwrap();
        for order in [2u8, 3] {
            let analytic = effective_hamiltonian(&basis, &params, order, AveragingMode::Analytic).unwrap();
            let averaged = effective_hamiltonian(&basis, &params, order, AveragingMode::Averaged).unwrap();
            let d = analytic.max_diff_on_columns(&averaged, &basis.interior_indices(order as u32)).unwrap();
            worst = worst.max(d);
        }
    }
    outcome(worst <= 1e-12, format!("max interior |averaged - analytic| over N=1..3, k=2,3 = {worst:.3e} (<= 1e-12)"))
}

fn operator_algebra() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0usize;
    let window = LadderWindow::new(-2, 3).unwrap();
    for n in 1..=4 {
        let basis = enumerate_basis(n, window, 0, None).unwrap();
        let levels: Vec<i32> = window.levels().collect();
        let jumps: Vec<Vec<SparseOp<f64>>> = levels
            .iter()
            .map(|&a| levels.iter().map(|&b| collective_jump(&basis, a, b).unwrap()).collect())
            .collect();
        let slot = |mu: i32| window.slot(mu).unwrap();
        for &mu in &levels {
            for &nu in &levels {
                for &rho in &levels {
                    for &eta in &levels {
                        let lhs = commutator(&jumps[slot(mu)][slot(nu)], &jumps[slot(rho)][slot(eta)]).unwrap();
                        let mut rhs = SparseOp::zeros(basis.dim());
                        if nu == rho {
                            rhs = rhs.add(&jumps[slot(mu)][slot(eta)]).unwrap();
                        }
                        if eta == mu {
                            rhs = rhs.sub(&jumps[slot(rho)][slot(nu)]).unwrap();
                        }
                        worst = worst.max(lhs.sub(&rhs).unwrap().max_abs());
                        count += 1;
                    }
                }
            }
        }
    }
    outcome(worst <= 1e-13, format!("{count} quadruples over N=1..4, window {{-2..3}}: max defect {worst:.3e} (<= 1e-13)"))
}

fn bogoliubov_invariant() -> Outcome {
    let alpha = 0.1;
    let mut worst = 0.0f64;
    for kappa in [0.0, 1.0, 1.9] {
        for i in 0..=300 {
            let tau = 3.0 * i as f64 / 300.0 / alpha;
            let p = parametric_propagator(PropagatorOrder::Deep, alpha, kappa, tau).unwrap();
            worst = worst.max(p.bogoliubov_defect().abs());
        }
    }
    outcome(worst <= 1e-12, format!("max ||U_aa|^2 - |U_aY|^2 - 1| = {worst:.3e} (<= 1e-12)"))
}

fn spontaneous_regression() -> Outcome {
    let kappas = [0.0, 1.0, 1.5, 1.9];
    let mut ordered = true;
    for i in 1..=200 {
        let ell = 0.05 * i as f64;
        let v: Vec<f64> = kappas.iter().map(|&k| spontaneous_photons(ell, k).unwrap()).collect();
        ordered &= v.windows(2).all(|w| w[0] > w[1]);
    }
    let want = 5.0f64.sinh().powi(2);
    let rel = (spontaneous_photons(10.0, 0.0).unwrap() - want).abs() / want;
    outcome(ordered && rel <= 1e-9, format!("decreasing in |kappa| on (0,10]: {ordered}; n_sp(10, 0) relative error {rel:.3e} (<= 1e-9)"))
}

fn seed_statistics() -> Outcome {
    let n0 = 100.0;
    let fano = |ell: f64, var0: f64| photon_moments(ell, 0.0, n0, var0).unwrap().fano.unwrap();
    let mut ordered = true;
    for i in 1..=200 {
        let ell = 0.05 * i as f64;
        let (th, co, fo) = (fano(ell, n0 * (n0 + 1.0)), fano(ell, n0), fano(ell, 0.0));
        ordered &= th > co && co > fo;
    }
    let st = photon_moments(20.0, 0.0, n0, 0.0).unwrap();
    let asymptote = (st.mean + 1.0) / (n0 + 1.0);
    let rel = (st.fano.unwrap() - asymptote).abs() / asymptote;
    outcome(ordered && rel <= 0.01, format!("thermal > coherent > Fock on (0,10]: {ordered}; Fock asymptote deviation at ell=20 = {rel:.3e} (<= 1e-2)"))
}

fn classical_sanity() -> Outcome {
    let grid: Vec<f64> = (-600..=600).map(|i| i as f64 * 0.005).collect();
    let peak = argmax(&grid, |p| cubic_gain(10.0, p));
    outcome(peak.abs() <= 0.2, format!("cubic gain at alpha=10 peaks at p/q = {peak:.3} (|p/q| <= 0.2)"))
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed())
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome, Duration, Duration)> = Vec::new();
    let sec = Duration::from_secs;
    let mut push = |id, name, (o, t): (Outcome, Duration), limit| results.push((id, name, o, t, limit));

    push(1, "dispersion-series consistency", timed(series_consistency), sec(1));
    push(2, "two-level-approximation gap", timed(two_level_gap), sec(1));
    push(3, "peak shift", timed(peak_shift), sec(1));
    let start = Instant::now();
    let runs: Vec<(u32, ExactRun)> = [2, 4, 8].into_iter().map(|n| (n, exact_resonant_run(n))).collect();
    let shared = start.elapsed();
    let (o4, t4) = timed(|| exact_oracle_gain(&runs));
    push(4, "exact-oracle gain", (o4, shared + t4), sec(60));
    let (o5, t5) = timed(|| thermal_statistics(&runs));
    push(5, "thermal statistics from vacuum", (o5, shared + t5), sec(60));
    push(6, "averaging engine equality", timed(averaging_equality), sec(30));
    push(7, "operator algebra", timed(operator_algebra), sec(10));
    push(8, "Bogoliubov invariant", timed(bogoliubov_invariant), sec(1));
    push(9, "spontaneous-emission curves", timed(spontaneous_regression), sec(1));
    push(10, "seed statistics", timed(seed_statistics), sec(1));
    push(11, "classical sanity", timed(classical_sanity), sec(1));

    let mut failed = 0;
    for (id, name, o, t, limit) in &results {
        let in_time = t <= limit;
        let pass = o.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "{} #{id:<2} {name}: {} [{:.3}s, limit {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            t.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
