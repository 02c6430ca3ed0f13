//! Lab-frame and rotating-frame Hamiltonians, their Fourier components, and effective
//! Hamiltonians from canonical averaging up to third order.

use std::collections::BTreeMap;

use crate::error::{domain, QfelError, Result};
use crate::fock_ladder::{assemble, CompositeBasis, Factor, LadderWindow, OperatorString};
use crate::scalar::{phase, re, Cx, Real};
use crate::sparse::{commutator, LinearCombination, SparseOp};

use Factor::{Annihilate as A, Create as Ad, Jump as J, Number as N};

/// Dimensionless model parameters: electron number, coupling `ε = g/ω_r`, detuning
/// `Δ = 2p/q − 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams<T> {
    n_electrons: u32,
    epsilon: T,
    delta: T,
}

impl<T: Real> ModelParams<T> {
    pub fn new(n_electrons: u32, epsilon: T, delta: T) -> Result<Self> {
        if n_electrons == 0 {
            return domain("the number of electrons must be at least 1");
        }
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return domain(format!("coupling epsilon must be positive and finite, got {epsilon}"));
        }
        if !delta.is_finite() {
            return domain("detuning must be finite");
        }
        Ok(Self { n_electrons, epsilon, delta })
    }

    /// From the collective coupling `α_N = ε√N` and normalized detuning `κ = Δ/α_N`.
    pub fn from_alpha_kappa(n_electrons: u32, alpha_n: T, kappa: T) -> Result<Self> {
        if n_electrons == 0 {
            return domain("the number of electrons must be at least 1");
        }
        let eps = alpha_n / T::from_usize(n_electrons as usize).sqrt();
        Self::new(n_electrons, eps, kappa * alpha_n)
    }

    pub fn n_electrons(&self) -> u32 {
        self.n_electrons
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn alpha_n(&self) -> T {
        self.epsilon * T::from_usize(self.n_electrons as usize).sqrt()
    }

    pub fn kappa(&self) -> T {
        self.delta / self.alpha_n()
    }

    /// `Δ/ε = κ√N`.
    pub fn delta_over_epsilon(&self) -> T {
        self.delta / self.epsilon
    }

    /// `α_N < 1`.
    pub fn quantum_regime(&self) -> bool {
        self.alpha_n() < T::one()
    }
}

/// Physical inputs in SI-like units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalParams<T> {
    /// Coupling frequency (rad/s).
    pub g: T,
    /// Recoil frequency `q²/(2mħ)` (rad/s).
    pub omega_r: T,
    /// Recoil momentum `2ħk`.
    pub q: T,
    /// Initial electron momentum.
    pub p: T,
    /// Speed of light.
    pub c: T,
}

/// Microscopic constants from which `g`, `ω_r` and `q` follow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawPhysicalInputs<T> {
    pub e: T,
    pub m: T,
    pub hbar: T,
    pub k: T,
    /// Vacuum amplitude of the laser vector potential.
    pub a_laser: T,
    /// Classical wiggler vector-potential amplitude.
    pub a_wiggler: T,
    pub c: T,
}

impl<T: Real> PhysicalParams<T> {
    pub fn new(g: T, omega_r: T, q: T, p: T, c: T) -> Result<Self> {
        for (name, v) in [("g", g), ("omega_r", omega_r), ("q", q), ("c", c)] {
            if !(v > T::zero()) || !v.is_finite() {
                return domain(format!("{name} must be positive, got {v}"));
            }
        }
        if !p.is_finite() {
            return domain("p must be finite");
        }
        Ok(Self { g, omega_r, q, p, c })
    }

    /// `g = e²𝒜_L Ã_W/(ħm)`, `q = 2ħk`, `ω_r = q²/(2mħ)`.
    pub fn from_raw(raw: RawPhysicalInputs<T>, p: T) -> Result<Self> {
        let RawPhysicalInputs { e, m, hbar, k, a_laser, a_wiggler, c } = raw;
        for (name, v) in [("m", m), ("hbar", hbar), ("k", k)] {
            if !(v > T::zero()) {
                return domain(format!("{name} must be positive, got {v}"));
            }
        }
        let g = e * e * a_laser * a_wiggler / (hbar * m);
        let q = T::two() * hbar * k;
        let omega_r = q * q / (T::two() * m * hbar);
        Self::new(g, omega_r, q, p, c)
    }

    /// `ε = g/ω_r`, `Δ = 2p/q − 1`.
    pub fn to_model(&self, n_electrons: u32) -> Result<ModelParams<T>> {
        ModelParams::new(n_electrons, self.g / self.omega_r, T::two() * self.p / self.q - T::one())
    }
}

/// Fourier components `Ĥ_μ` of the rotating-frame Hamiltonian, `Ĥ′(τ) = ε Σ Ĥ_μ e^{2iμτ}`.
///
/// `Ĥ_0` carries the detuning term `−(Δ/ε) n̂`.
#[derive(Clone, Debug)]
pub struct FourierComponents<T> {
    k_max: i32,
    components: BTreeMap<i32, SparseOp<T>>,
    zero: SparseOp<T>,
}

impl<T: Real> FourierComponents<T> {
    pub fn dim(&self) -> usize {
        self.zero.dim()
    }

    /// Largest `|μ|` kept; components outside `−k_max..=k_max` vanish on the window.
    pub fn k_max(&self) -> i32 {
        self.k_max
    }

    pub fn indices(&self) -> impl Iterator<Item = i32> + '_ {
        self.components.keys().copied()
    }

    /// `Ĥ_μ`, or the zero operator when `μ` is out of range.
    pub fn get(&self, mu: i32) -> &SparseOp<T> {
        self.components.get(&mu).unwrap_or(&self.zero)
    }

    /// `ε Σ_μ Ĥ_μ e^{2iμτ}` as a lazy combination.
    pub fn combination(&self, epsilon: T, tau: T) -> LinearCombination<'_, T> {
        let mut lc = LinearCombination::new(self.dim());
        for (&mu, op) in &self.components {
            lc.push(phase(T::two() * T::from_i64(mu as i64) * tau) * epsilon, op)
                .expect("components share one dimension");
        }
        lc
    }
}

fn fourier_range(window: LadderWindow) -> i32 {
    (window.mu_max() - 1).max(-window.mu_min()).max(2)
}

/// Builds `Ĥ_0 = aΥ_{0,1} + a†Υ_{1,0} − (Δ/ε)n̂` and `Ĥ_μ = aΥ_{μ,μ+1} + a†Υ_{1−μ,−μ}`.
pub fn fourier_components<T: Real>(basis: &CompositeBasis, params: &ModelParams<T>) -> FourierComponents<T> {
    let k_max = fourier_range(basis.window());
    let one = T::one();
    let mut components = BTreeMap::new();
    for mu in -k_max..=k_max {
        let mut strings = vec![
            OperatorString::new(one, [A, J(mu, mu + 1)]),
            OperatorString::new(one, [Ad, J(1 - mu, -mu)]),
        ];
        if mu == 0 {
            strings.push(OperatorString::new(-params.delta_over_epsilon(), [N]));
        }
        components.insert(mu, assemble(basis, &strings));
    }
    FourierComponents { k_max, components, zero: SparseOp::zeros(basis.dim()) }
}

/// `Ĥ′(τ) = ε Σ_μ Ĥ_μ e^{2iμτ}`.
pub fn rotating_hamiltonian<T: Real>(components: &FourierComponents<T>, params: &ModelParams<T>, tau: T) -> SparseOp<T> {
    components.combination(params.epsilon(), tau).assemble()
}

/// Lab-frame pieces: free kinetic part `H0 = Σ_μ ((1+Δ)/2 − μ)² Υ_{μμ}` and interaction
/// `H1 = ε(a Σ_μ Υ_{μ,μ+1} + h.c.)`, in units of `ħω_r`.
pub fn lab_frame_parts<T: Real>(basis: &CompositeBasis, params: &ModelParams<T>) -> (SparseOp<T>, SparseOp<T>) {
    let w = basis.window();
    let center = (T::one() + params.delta()) * T::half();
    let h0 = SparseOp::diagonal((0..basis.dim()).map(|i| {
        re(w.levels()
            .zip(basis.occupations(i))
            .map(|(mu, &m)| {
                let d = center - T::from_i64(mu as i64);
                d * d * T::from_usize(m as usize)
            })
            .sum::<T>())
    }));
    let mut strings = Vec::new();
    for mu in w.levels() {
        strings.push(OperatorString::new(params.epsilon(), [A, J(mu, mu + 1)]));
        strings.push(OperatorString::new(params.epsilon(), [Ad, J(mu + 1, mu)]));
    }
    (h0, assemble(basis, &strings))
}

/// Lowest-order (Dicke) generator `ε(aΥ_{0,1} + a†Υ_{1,0}) − Δn̂`.
pub fn dicke_hamiltonian<T: Real>(basis: &CompositeBasis, params: &ModelParams<T>) -> SparseOp<T> {
    analytic_term(basis, params, 1).scale_real(params.epsilon())
}

/// How an effective Hamiltonian is constructed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AveragingMode {
    /// Closed-form operator expressions.
    Analytic,
    /// Nested commutator sums over the Fourier components.
    Averaged,
}

impl std::fmt::Display for AveragingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AveragingMode::Analytic => "analytic",
            AveragingMode::Averaged => "averaged",
        })
    }
}

/// Checks that the window contains `{−(k−1)..k}`, the levels order-`k` sums reach from
/// the resonant pair.
pub fn check_margin(window: LadderWindow, order: u8) -> Result<()> {
    let k = order as i32;
    if window.mu_min() > -(k - 1) || window.mu_max() < k {
        return Err(QfelError::Domain(format!(
            "order {order} needs a window containing {{{}..{}}}, got {window}",
            -(k - 1),
            k
        )));
    }
    Ok(())
}

fn check_order(order: u8, max: u8) -> Result<()> {
    if order == 0 || order > max {
        return domain(format!("order must be in 1..={max}, got {order}"));
    }
    Ok(())
}

/// Bare order-`k` term `H^(k)` of `H_eff = Σ_k ε^k H^(k)`.
pub fn effective_hamiltonian<T: Real>(
    basis: &CompositeBasis,
    params: &ModelParams<T>,
    order: u8,
    mode: AveragingMode,
) -> Result<SparseOp<T>> {
    check_order(order, 3)?;
    check_margin(basis.window(), order)?;
    match mode {
        AveragingMode::Analytic => Ok(analytic_term(basis, params, order)),
        AveragingMode::Averaged => averaged_term(&fourier_components(basis, params), order),
    }
}

fn levels_for_sums(window: LadderWindow) -> impl Iterator<Item = i32> {
    // every μ for which Υ_{μ+1,μ}, Υ_{μμ} or Υ_{μ+1,μ+1} can act inside the window
    (window.mu_min() - 1..=window.mu_max()).filter(|&mu| mu != 0)
}

fn analytic_term<T: Real>(basis: &CompositeBasis, params: &ModelParams<T>, order: u8) -> SparseOp<T> {
    let w = basis.window();
    let l = T::lit;
    match order {
        1 => assemble(
            basis,
            &[
                OperatorString::new(T::one(), [A, J(0, 1)]),
                OperatorString::new(T::one(), [Ad, J(1, 0)]),
                OperatorString::new(-params.delta_over_epsilon(), [N]),
            ],
        ),
        2 => assemble(basis, &ladder_pair_terms(w, |mu| l(0.5) / l(mu as f64))),
        _ => {
            let mut field = Vec::new();
            let lo = 2 * w.mu_min() - 2;
            let hi = 2 * w.mu_max() + 2;
            for mu in lo..=hi {
                if mu == 0 || mu == -1 {
                    continue;
                }
                let m = mu as f64;
                field.push(OperatorString::new(
                    l(0.25 / (m * (m + 1.0) * (2.0 * m + 1.0))),
                    [A, J(2 * mu + 2, 2 * mu + 1), J(mu, mu + 2)],
                ));
            }
            for mu in levels_for_sums(w) {
                let c = l(0.125 / (mu as f64 * mu as f64));
                field.push(OperatorString::new(-c, [A, J(mu + 1, mu + 1), J(0, 1)]));
                field.push(OperatorString::new(c, [A, J(mu, mu), J(0, 1)]));
            }
            field.push(OperatorString::new(l(0.375), [A, J(0, -1), J(-1, 1)]));
            field.push(OperatorString::new(l(-0.375), [A, J(0, 2), J(2, 1)]));
            field.push(OperatorString::new(l(0.125), [A, J(0, 1)]));
            field.push(OperatorString::new(l(0.25), [A, A, A, J(-1, 2)]));
            field.push(OperatorString::new(l(-0.125), [Ad, A, A, J(0, 1)]));
            field.push(OperatorString::new(l(-0.125), [A, A, Ad, J(0, 1)]));
            let half = assemble(basis, &field);
            let detuning = assemble(
                basis,
                &ladder_pair_terms(w, |mu| params.delta_over_epsilon() * l(0.25) / l(mu as f64 * mu as f64)),
            );
            half.add(&half.adjoint()).and_then(|h| h.add(&detuning)).expect("same basis")
        }
    }
}

/// `Σ_{μ≠0} w(μ) [(n̂+1)(Υ_{μ+1,μ+1} − Υ_{μμ}) − Υ_{μ+1,μ}Υ_{μ,μ+1}]`.
fn ladder_pair_terms<T: Real>(w: LadderWindow, weight: impl Fn(i32) -> T) -> Vec<OperatorString<T>> {
    let mut s = Vec::new();
    for mu in levels_for_sums(w) {
        let c = weight(mu);
        s.push(OperatorString::new(c, [N, J(mu + 1, mu + 1)]));
        s.push(OperatorString::new(c, [J(mu + 1, mu + 1)]));
        s.push(OperatorString::new(-c, [N, J(mu, mu)]));
        s.push(OperatorString::new(-c, [J(mu, mu)]));
        s.push(OperatorString::new(-c, [J(mu + 1, mu), J(mu, mu + 1)]));
    }
    s
}

fn nonzero(k: i32) -> impl Iterator<Item = i32> {
    (-k..=k).filter(|&m| m != 0)
}

/// Order-`k` term evaluated from the commutator sums of canonical averaging.
pub fn averaged_term<T: Real>(h: &FourierComponents<T>, order: u8) -> Result<SparseOp<T>> {
    check_order(order, 3)?;
    let k = h.k_max();
    let dim = h.dim();
    let l = |x: f64| re(T::lit(x));
    match order {
        1 => Ok(h.get(0).clone()),
        2 => {
            let mut out = SparseOp::zeros(dim);
            for nu in 1..=k {
                // the ν and −ν terms coincide
                let c = commutator(h.get(nu), h.get(-nu))?;
                out = out.add_scaled(&c, l(-0.5 / nu as f64))?;
            }
            Ok(out)
        }
        _ => {
            let mut out = SparseOp::zeros(dim);
            for sigma in nonzero(k) {
                let mut inner = SparseOp::zeros(dim);
                for mu in nonzero(k) {
                    let rho = sigma - mu;
                    if rho == 0 || rho.abs() > k {
                        continue;
                    }
                    let c = commutator(h.get(mu), h.get(rho))?;
                    inner = inner.add_scaled(&c, l(1.0 / (4.0 * mu as f64 * sigma as f64)))?;
                }
                let outer = commutator(h.get(-sigma), &inner)?;
                out = out.add_scaled(&outer, l(-1.0 / 3.0))?;
            }
            for mu in nonzero(k) {
                let inner = commutator(h.get(-mu), h.get(0))?;
                let outer = commutator(h.get(mu), &inner)?;
                out = out.add_scaled(&outer, l(-0.5 / (4.0 * (mu * mu) as f64)))?;
            }
            Ok(out)
        }
    }
}

/// `H^(1)`, `H^(2)`, `H^(3)` together with the coupling that weights them.
#[derive(Clone, Debug)]
pub struct EffectiveHamiltonianSet<T> {
    pub terms: [SparseOp<T>; 3],
    pub mode: AveragingMode,
    pub epsilon: T,
}

impl<T: Real> EffectiveHamiltonianSet<T> {
    /// Builds all three orders; the window must admit order 3.
    pub fn build(basis: &CompositeBasis, params: &ModelParams<T>, mode: AveragingMode) -> Result<Self> {
        check_margin(basis.window(), 3)?;
        let terms = match mode {
            AveragingMode::Analytic => [1, 2, 3].map(|k| analytic_term(basis, params, k)),
            AveragingMode::Averaged => {
                let h = fourier_components(basis, params);
                [averaged_term(&h, 1)?, averaged_term(&h, 2)?, averaged_term(&h, 3)?]
            }
        };
        Ok(Self { terms, mode, epsilon: params.epsilon() })
    }

    pub fn order(&self, k: u8) -> &SparseOp<T> {
        &self.terms[k as usize - 1]
    }

    /// `Σ_{k ≤ max_order} ε^k H^(k)`.
    pub fn generator(&self, max_order: u8) -> Result<SparseOp<T>> {
        check_order(max_order, 3)?;
        let mut out = SparseOp::zeros(self.terms[0].dim());
        for k in 1..=max_order {
            out = out.add_scaled(self.order(k), re(self.epsilon.powi(k as i32)))?;
        }
        Ok(out)
    }
}

/// Generator of the near-identity averaging transformation, `F^(1)` or `F^(2)` at time `τ`.
pub fn generator_f<T: Real>(basis: &CompositeBasis, params: &ModelParams<T>, order: u8, tau: T) -> Result<SparseOp<T>> {
    check_order(order, 2)?;
    check_margin(basis.window(), order)?;
    generator_f_from(&fourier_components(basis, params), order, tau)
}

/// Same as [`generator_f`], reusing precomputed components.
pub fn generator_f_from<T: Real>(h: &FourierComponents<T>, order: u8, tau: T) -> Result<SparseOp<T>> {
    check_order(order, 2)?;
    let k = h.k_max();
    let two_tau = T::two() * tau;
    let ph = |m: i32| phase(two_tau * T::from_i64(m as i64));
    let mut out = SparseOp::zeros(h.dim());
    if order == 1 {
        for mu in nonzero(k) {
            out = out.add_scaled(h.get(mu), ph(mu) * T::lit(-0.5 / mu as f64))?;
        }
        return Ok(out);
    }
    for mu in nonzero(k) {
        for nu in nonzero(k) {
            // ν = ρ − μ; the μ = ρ exclusion is ν ≠ 0
            let rho = mu + nu;
            if rho == 0 {
                continue;
            }
            let c = commutator(h.get(mu), h.get(nu))?;
            out = out.add_scaled(&c, ph(rho) * T::lit(0.5 / (4.0 * mu as f64 * rho as f64)))?;
        }
        let c = commutator(h.get(mu), h.get(0))?;
        out = out.add_scaled(&c, ph(mu) * T::lit(1.0 / (4.0 * (mu * mu) as f64)))?;
    }
    Ok(out)
}

/// Spectral-norm estimate of every Fourier component (power iteration on `Ĥ_μ†Ĥ_μ`).
pub fn component_norms<T: Real>(h: &FourierComponents<T>) -> Vec<(i32, T)> {
    h.indices().map(|mu| (mu, spectral_norm(h.get(mu), 200))).collect()
}

/// Power-iteration estimate of the largest singular value.
pub fn spectral_norm<T: Real>(op: &SparseOp<T>, iterations: usize) -> T {
    let n = op.dim();
    if n == 0 || op.is_zero() {
        return T::zero();
    }
    let adj = op.adjoint();
    let mut v: Vec<Cx<T>> =
        (0..n).map(|i| re(T::one() + T::lit(((i * 7919) % 97) as f64 / 97.0))).collect();
    let mut sigma = T::zero();
    for _ in 0..iterations {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if norm == T::zero() {
            return T::zero();
        }
        for z in &mut v {
            *z = *z / norm;
        }
        let w = adj.matvec(&op.matvec(&v));
        let lambda = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum::<T>();
        let next = lambda.max(T::zero()).sqrt();
        let converged = (next - sigma).abs() <= T::epsilon() * T::lit(16.0) * next;
        sigma = next;
        v = w;
        if converged {
            break;
        }
    }
    sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::fock_ladder::{charge_operator, collective_jump, enumerate_basis, photon_operator, PhotonOp};
    use crate::scalar::cx;

    fn basis(n: u32, lo: i32, hi: i32, n_max: u32, sector: Option<i64>) -> CompositeBasis {
        enumerate_basis(n, LadderWindow::new(lo, hi).unwrap(), n_max, sector).unwrap()
    }

    fn dense_max_diff_on(a: &DenseMatrix<f64>, b: &SparseOp<f64>, idx: &[usize]) -> f64 {
        let mut m = 0.0f64;
        for &i in idx {
            for &j in idx {
                m = m.max((a[(i, j)] - b.get(i, j)).norm());
            }
        }
        m
    }

    #[test]
    fn model_params_round_trip() {
        let p = ModelParams::<f64>::from_alpha_kappa(8, 0.3, -1.7).unwrap();
        assert!((p.alpha_n() - 0.3).abs() < 1e-15);
        assert!((p.kappa() * p.alpha_n() - p.delta()).abs() <= f64::EPSILON * p.delta().abs());
        assert!((p.delta_over_epsilon() - p.kappa() * 8f64.sqrt()).abs() < 1e-13);
        assert!(p.quantum_regime());
        assert!(!ModelParams::from_alpha_kappa(1, 1.0, 0.0).unwrap().quantum_regime());
        assert!(ModelParams::new(1, 0.0, 0.0).is_err());
        assert!(ModelParams::new(0, 0.1, 0.0).is_err());
    }

    #[test]
    fn physical_conversion() {
        let ph = PhysicalParams::new(2.0, 10.0, 4.0, 3.0, 1.0).unwrap();
        let m = ph.to_model(4).unwrap();
        assert_eq!(m.epsilon(), 0.2);
        assert_eq!(m.delta(), 0.5);
        assert!(PhysicalParams::new(-1.0, 1.0, 1.0, 0.0, 1.0).is_err());
        let raw = RawPhysicalInputs { e: 2.0, m: 1.0, hbar: 0.5, k: 3.0, a_laser: 0.25, a_wiggler: 2.0, c: 1.0 };
        let ph = PhysicalParams::from_raw(raw, 1.5).unwrap();
        assert_eq!(ph.g, 4.0);
        assert_eq!(ph.q, 3.0);
        assert_eq!(ph.omega_r, 9.0);
    }

    #[test]
    fn resonant_coupling_matrix_single_electron() {
        let b = basis(1, 0, 1, 1, None);
        let p = ModelParams::new(1, 0.1, 0.0).unwrap();
        let h = fourier_components(&b, &p);
        // states: (μ0,n0), (μ0,n1), (μ1,n0), (μ1,n1); emission moves the electron 0 → 1
        let mut want = DenseMatrix::zeros(4);
        want[(0, 3)] = cx(1.0, 0.0);
        want[(3, 0)] = cx(1.0, 0.0);
        assert!(h.get(0).to_dense().sub(&want).max_abs() < 1e-15);
        for mu in [-2, -1, 1, 2] {
            assert!(h.get(mu).is_zero());
        }
    }

    #[test]
    fn hermitian_pairing_and_sum_at_zero() {
        let b = basis(2, -2, 3, 3, None);
        let p = ModelParams::from_alpha_kappa(2, 0.2, 0.7).unwrap();
        let h = fourier_components(&b, &p);
        for mu in 1..=h.k_max() {
            assert_eq!(h.get(mu).adjoint(), *h.get(-mu));
        }
        assert!(h.get(0).hermiticity_defect(&(0..b.dim()).collect::<Vec<_>>()) < 1e-15);
        let at0 = rotating_hamiltonian(&h, &p, 0.0);
        let mut sum = SparseOp::zeros(b.dim());
        for mu in h.indices() {
            sum = sum.add(h.get(mu)).unwrap();
        }
        assert!(sum.sub(&at0.scale_real(1.0 / p.epsilon())).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn rotating_hamiltonian_at_zero_is_lab_interaction() {
        let b = basis(1, -2, 3, 2, None);
        let p = ModelParams::new(1, 0.05, 0.0).unwrap();
        let h = fourier_components(&b, &p);
        let (_, h1) = lab_frame_parts(&b, &p);
        assert!(rotating_hamiltonian(&h, &p, 0.0).sub(&h1).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn rotating_hamiltonian_period_and_hermiticity() {
        let b = basis(2, -1, 2, 3, None);
        let p = ModelParams::from_alpha_kappa(2, 0.3, 0.5).unwrap();
        let h = fourier_components(&b, &p);
        let all: Vec<usize> = (0..b.dim()).collect();
        for tau in [0.0, 0.37, 1.9] {
            let a = rotating_hamiltonian(&h, &p, tau);
            let c = rotating_hamiltonian(&h, &p, tau + std::f64::consts::PI);
            assert!(a.sub(&c).unwrap().max_abs() < 1e-12);
            assert!(a.hermiticity_defect(&all) < 1e-12);
            let psi: Vec<Cx<f64>> = (0..b.dim()).map(|i| cx((i as f64 * 0.3).sin(), (i as f64 * 0.7).cos())).collect();
            assert!(a.expectation(&psi).im.abs() < 1e-12);
        }
    }

    #[test]
    fn lab_frame_free_part_single_electron() {
        let b = basis(1, 0, 1, 0, None);
        let p = ModelParams::new(1, 0.1, 0.0).unwrap();
        let (h0, _) = lab_frame_parts(&b, &p);
        assert_eq!(h0.get(0, 0).re, 0.25);
        assert_eq!(h0.get(1, 1).re, 0.25);
    }

    #[test]
    fn lab_free_part_commutes_with_charge() {
        let b = basis(2, -1, 2, 3, None);
        let p = ModelParams::from_alpha_kappa(2, 0.3, 0.5).unwrap();
        let (h0, _) = lab_frame_parts(&b, &p);
        let q = charge_operator::<f64>(&b);
        assert!(commutator(&h0, &q).unwrap().is_zero());
    }

    #[test]
    fn frame_transformation_by_dense_conjugation() {
        let b = basis(2, -2, 3, 4, None);
        let p = ModelParams::from_alpha_kappa(2, 0.2, 1.3).unwrap();
        let (h0, h1) = lab_frame_parts(&b, &p);
        let n = photon_operator::<f64>(&b, PhotonOp::Number);
        let k = h0.add_scaled(&n, re(p.delta())).unwrap().to_dense();
        let h = fourier_components(&b, &p);
        let inner = b.interior_indices(1);
        for tau in [0.3, 1.0] {
            let u = k.scale(cx(0.0, -tau)).expm();
            let ud = k.scale(cx(0.0, tau)).expm();
            let conj = u.matmul(&h1.to_dense()).matmul(&ud).sub(&n.to_dense().scale(re(p.delta())));
            let rot = rotating_hamiltonian(&h, &p, tau);
            assert!(dense_max_diff_on(&conj, &rot, &inner) < 1e-10);
        }
    }

    #[test]
    fn components_commute_with_charge() {
        let b = basis(3, -2, 3, 5, None);
        let p = ModelParams::from_alpha_kappa(3, 0.2, 0.4).unwrap();
        let h = fourier_components(&b, &p);
        let q = charge_operator::<f64>(&b);
        for mu in h.indices() {
            assert!(commutator(&q, h.get(mu)).unwrap().is_zero(), "mu={mu}");
        }
    }

    #[test]
    fn first_order_is_dicke_form() {
        let b = basis(3, 0, 1, 4, None);
        let p = ModelParams::new(3, 0.05, 0.0).unwrap();
        let h1 = effective_hamiltonian(&b, &p, 1, AveragingMode::Analytic).unwrap().scale_real(p.epsilon());
        let a = photon_operator::<f64>(&b, PhotonOp::Annihilate);
        let y01 = collective_jump::<f64>(&b, 0, 1).unwrap();
        let dicke = a.matmul(&y01).unwrap();
        let dicke = dicke.add(&dicke.adjoint()).unwrap().scale_real(p.epsilon());
        assert!(h1.sub(&dicke).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn first_order_is_period_average() {
        let b = basis(2, -1, 2, 3, None);
        let p = ModelParams::from_alpha_kappa(2, 0.2, 0.9).unwrap();
        let h = fourier_components(&b, &p);
        let m = 64;
        let mut avg = SparseOp::zeros(b.dim());
        for j in 0..m {
            let tau = std::f64::consts::PI * j as f64 / m as f64;
            avg = avg.add_scaled(&rotating_hamiltonian(&h, &p, tau), re(1.0 / (m as f64 * p.epsilon()))).unwrap();
        }
        let h1 = effective_hamiltonian(&b, &p, 1, AveragingMode::Analytic).unwrap();
        assert!(avg.sub(&h1).unwrap().max_abs() < 1e-10);
    }

    fn compare_orders(n: u32, order: u8, kappa: f64) -> f64 {
        let b = basis(n, -3, 4, 6, None);
        let p = ModelParams::from_alpha_kappa(n, 0.3, kappa).unwrap();
        let an = effective_hamiltonian(&b, &p, order, AveragingMode::Analytic).unwrap();
        let av = effective_hamiltonian(&b, &p, order, AveragingMode::Averaged).unwrap();
        an.max_diff_on_columns(&av, &b.interior_indices(order as u32)).unwrap()
    }

    #[test]
    fn second_order_analytic_equals_averaged() {
        for n in 1..=3 {
            let d = compare_orders(n, 2, 0.8);
            assert!(d <= 1e-12, "N={n}: {d}");
        }
    }

    #[test]
    fn third_order_analytic_equals_averaged() {
        for n in 1..=3 {
            let d = compare_orders(n, 3, -0.6);
            assert!(d <= 1e-12, "N={n}: {d}");
        }
    }

    #[test]
    fn effective_terms_hermitian_and_charge_conserving() {
        let b = basis(2, -3, 4, 6, None);
        let p = ModelParams::from_alpha_kappa(2, 0.3, 0.5).unwrap();
        let q = charge_operator::<f64>(&b);
        for mode in [AveragingMode::Analytic, AveragingMode::Averaged] {
            let set = EffectiveHamiltonianSet::build(&b, &p, mode).unwrap();
            for k in 1..=3u8 {
                let inner = b.interior_indices(k as u32);
                assert!(set.order(k).hermiticity_defect(&inner) < 1e-12);
                let c = commutator(set.order(k), &q).unwrap();
                assert!(c.max_diff_on_columns(&SparseOp::zeros(b.dim()), &inner).unwrap() < 1e-12);
            }
            assert!(commutator(set.order(1), &q).unwrap().is_zero());
        }
    }

    #[test]
    fn margin_errors_name_required_window() {
        let b = basis(1, -1, 2, 2, None);
        let p = ModelParams::new(1, 0.1, 0.0).unwrap();
        let err = effective_hamiltonian(&b, &p, 3, AveragingMode::Averaged).unwrap_err();
        assert!(err.to_string().contains("{-2..3}"), "{err}");
        assert!(effective_hamiltonian(&b, &p, 2, AveragingMode::Averaged).is_ok());
        assert!(generator_f(&b, &p, 2, 0.0).is_ok());
        assert!(effective_hamiltonian(&b, &p, 4, AveragingMode::Analytic).is_err());
    }

    #[test]
    fn generator_f_first_order_properties() {
        let b = basis(2, -2, 3, 4, None);
        let p = ModelParams::from_alpha_kappa(2, 0.2, 0.3).unwrap();
        let h = fourier_components(&b, &p);
        let f0 = generator_f(&b, &p, 1, 0.0).unwrap();
        let mut want = SparseOp::zeros(b.dim());
        for mu in nonzero(h.k_max()) {
            want = want.add_scaled(h.get(mu), re(-0.5 / mu as f64)).unwrap();
        }
        assert!(f0.sub(&want).unwrap().max_abs() < 1e-15);

        let m = 64;
        let mut avg = SparseOp::zeros(b.dim());
        for j in 0..m {
            let tau = std::f64::consts::PI * j as f64 / m as f64;
            avg = avg.add_scaled(&generator_f_from(&h, 1, tau).unwrap(), re(1.0 / m as f64)).unwrap();
        }
        assert!(avg.max_abs() < 1e-10);

        let (tau, step) = (0.4, 1e-5);
        let d = generator_f_from(&h, 1, tau + step)
            .unwrap()
            .sub(&generator_f_from(&h, 1, tau - step).unwrap())
            .unwrap()
            .scale(cx(0.0, 1.0 / (2.0 * step)));
        let mut osc = SparseOp::zeros(b.dim());
        for mu in nonzero(h.k_max()) {
            osc = osc.add_scaled(h.get(mu), phase(2.0 * mu as f64 * tau)).unwrap();
        }
        assert!(d.sub(&osc).unwrap().max_abs() < 1e-6);
    }

    #[test]
    fn generators_are_skew_hermitian() {
        let b = basis(2, -2, 3, 4, None);
        let p = ModelParams::from_alpha_kappa(2, 0.2, 0.6).unwrap();
        let h = fourier_components(&b, &p);
        for order in [1u8, 2] {
            for tau in [0.0, 0.45, 2.1] {
                let f = generator_f_from(&h, order, tau).unwrap();
                let skew = f.add(&f.adjoint()).unwrap();
                let inner = b.interior_indices(order as u32);
                assert!(skew.max_diff_on_columns(&SparseOp::zeros(b.dim()), &inner).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let d = SparseOp::<f64>::diagonal([re(1.0), re(-3.0), cx(0.0, 2.0)]);
        assert!((spectral_norm(&d, 500) - 3.0).abs() < 1e-8);
        let b = basis(4, -1, 2, 4, Some(0));
        let p = ModelParams::from_alpha_kappa(4, 0.2, 0.0).unwrap();
        let norms = component_norms(&fourier_components(&b, &p));
        assert!(norms.iter().all(|&(_, s)| s >= 0.0));
    }
}
