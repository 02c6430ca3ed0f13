//! Closed-form gain results: dispersion relations, spontaneous and stimulated photon
//! numbers, photon-number variance, parametric propagators and gain-length scales.

use crate::dense::DenseMatrix;
use crate::error::{domain, Result};
use crate::hamiltonians::PhysicalParams;
use crate::scalar::{cx, re, Cx, Real};

/// Which characteristic polynomial produced a [`DispersionSolution`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    Quadratic,
    Cubic,
}

/// Roots of a characteristic polynomial and the resulting growth rate.
#[derive(Clone, Debug, PartialEq)]
pub struct DispersionSolution<T> {
    pub roots: Vec<Cx<T>>,
    /// `max(0, max Im λ)`.
    pub im_plus: T,
    pub regime: Regime,
    /// Largest scaled residual `|p(λ)| / Σ|c_k||λ|^k` over the roots.
    pub max_residual: T,
}

fn scaled_residual<T: Real>(coeffs: &[T], x: Cx<T>) -> T {
    // coeffs highest degree first
    let mut p = Cx::new(T::zero(), T::zero());
    let mut s = T::zero();
    for &c in coeffs {
        p = p * x + re(c);
        s = s * x.norm() + c.abs();
    }
    if s == T::zero() {
        p.norm()
    } else {
        p.norm() / s
    }
}

fn solution<T: Real>(roots: Vec<Cx<T>>, coeffs: &[T], regime: Regime) -> DispersionSolution<T> {
    let im_plus = roots.iter().fold(T::zero(), |m, r| m.max(r.im));
    let max_residual = roots.iter().map(|&r| scaled_residual(coeffs, r)).fold(T::zero(), T::max);
    DispersionSolution { roots, im_plus, regime, max_residual }
}

/// Deep-quantum roots `λ± = −Δ/2 ± iα√(1 − κ²/4)` of `λ² + Δλ + α² = 0`, `Δ = κα`.
pub fn deep_dispersion<T: Real>(alpha: T, kappa: T) -> Result<DispersionSolution<T>> {
    if !(alpha > T::zero()) {
        return domain(format!("alpha must be positive, got {alpha}"));
    }
    let delta = kappa * alpha;
    let s = T::one() - kappa * kappa * T::lit(0.25);
    let center = -delta * T::half();
    let roots = if s >= T::zero() {
        let w = alpha * s.sqrt();
        vec![cx(center, w), cx(center, -w)]
    } else {
        let w = alpha * (-s).sqrt();
        vec![re(center + w), re(center - w)]
    };
    Ok(solution(roots, &[T::one(), delta, alpha * alpha], Regime::Quadratic))
}

/// Growth rate including the first corrections beyond the two-level approximation.
pub fn third_order_gain<T: Real>(alpha: T, kappa: T) -> Result<T> {
    if !(alpha > T::zero()) {
        return domain(format!("alpha must be positive, got {alpha}"));
    }
    if !(kappa.abs() < T::two()) {
        return domain(format!("third-order gain needs |kappa| < 2, got {kappa}"));
    }
    let s = T::one() - kappa * kappa * T::lit(0.25);
    let k2 = kappa * kappa;
    let first = kappa * T::half() / s * alpha * T::lit(0.25);
    let second = (T::lit(5.0) - T::lit(3.0) * k2 + k2 * k2 * T::half()) / (s * s) * alpha * alpha / T::lit(32.0);
    Ok(alpha * s.sqrt() * (T::one() - first - second))
}

/// All roots of `(λ² − 1)(λ + 1 + Δ) − 2α² = 0` via companion-matrix eigenvalues and one
/// Newton step.
pub fn cubic_dispersion<T: Real>(alpha: T, delta: T) -> Result<DispersionSolution<T>> {
    if !(alpha >= T::zero()) {
        return domain(format!("alpha must be nonnegative, got {alpha}"));
    }
    if !delta.is_finite() {
        return domain("delta must be finite");
    }
    let c2 = T::one() + delta;
    let c1 = -T::one();
    let c0 = -(T::one() + delta) - T::two() * alpha * alpha;
    let coeffs = [T::one(), c2, c1, c0];
    let zero = re(T::zero());
    let one = re(T::one());
    let companion = DenseMatrix::from_rows([[re(-c2), re(-c1), re(-c0)], [one, zero, zero], [zero, one, zero]]);
    let mut roots = companion.eigenvalues()?;
    for r in roots.iter_mut() {
        let p = ((*r + c2) * *r + c1) * *r + c0;
        let dp = (*r * T::lit(3.0) + c2 * T::two()) * *r + c1;
        if dp.norm() > T::epsilon() * (T::one() + r.norm()) {
            let candidate = *r - p / dp;
            if scaled_residual(&coeffs, candidate) <= scaled_residual(&coeffs, *r) {
                *r = candidate;
            }
        }
    }
    roots.sort_by(|a, b| b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal));
    Ok(solution(roots, &coeffs, Regime::Cubic))
}

/// Largest `|im_plus(cubic) − third_order_gain| / α⁴` over the given couplings at fixed κ.
pub fn series_gap_constant<T: Real>(alphas: &[T], kappa: T) -> Result<T> {
    let mut c = T::zero();
    for &a in alphas {
        let gap = (cubic_dispersion(a, kappa * a)?.im_plus - third_order_gain(a, kappa)?).abs();
        c = c.max(gap / a.powi(4));
    }
    Ok(c)
}

/// Width below which the band-edge series replaces the closed form of `n_sp`.
pub const BAND_EDGE_SWITCH: f64 = 1e-8;

/// True when `|κ| > 2`, where `n_sp` is an oscillatory continuation rather than gain.
pub fn out_of_band<T: Real>(kappa: T) -> bool {
    kappa.abs() > T::two()
}

/// Spontaneous photon number after `ℓ = L/L_g` gain lengths.
pub fn spontaneous_photons<T: Real>(ell: T, kappa: T) -> Result<T> {
    if !(ell >= T::zero()) {
        return domain(format!("ell must be nonnegative, got {ell}"));
    }
    let s = T::one() - kappa * kappa * T::lit(0.25);
    let x = ell * T::half();
    if s.abs() < T::lit(BAND_EDGE_SWITCH) {
        return Ok(x * x * (T::one() + x * x * s / T::lit(3.0)));
    }
    if s > T::zero() {
        let r = s.sqrt();
        Ok((x * r).sinh().powi(2) / s)
    } else {
        let r = (-s).sqrt();
        Ok((x * r).sin().powi(2) / (-s))
    }
}

/// Mean, variance and Fano factor of the photon number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhotonStats<T> {
    pub mean: T,
    pub variance: T,
    /// `Δn²/⟨n̂⟩`; absent when the mean vanishes.
    pub fano: Option<T>,
    pub super_poissonian: bool,
}

impl<T: Real> PhotonStats<T> {
    pub fn new(mean: T, variance: T) -> Self {
        let variance = variance.max(T::zero());
        let fano = (mean > T::zero()).then(|| variance / mean);
        Self { mean, variance, fano, super_poissonian: variance > mean }
    }
}

/// Amplified moments for a seed with mean `n0` and variance `var0`.
pub fn photon_moments<T: Real>(ell: T, kappa: T, n0: T, var0: T) -> Result<PhotonStats<T>> {
    if !(n0 >= T::zero() && var0 >= T::zero()) {
        return domain("initial mean and variance must be nonnegative");
    }
    let nsp = spontaneous_photons(ell, kappa)?;
    let mean = (nsp + T::one()) * n0 + nsp;
    let variance = (nsp + T::one()).powi(2) * var0 + nsp * (mean + T::one());
    Ok(PhotonStats::new(mean, variance))
}

/// Coupling matrix of the linearized `(Ŷ_{1,0}, â)` system including third-order corrections.
pub fn third_order_matrix<T: Real>(alpha: T, kappa: T) -> DenseMatrix<T> {
    let a2 = alpha * alpha;
    let off = alpha * (T::one() - a2 / T::lit(8.0));
    let diag = -alpha * (kappa + alpha * T::half() - kappa * a2 * T::lit(0.25));
    DenseMatrix::from_rows([[re(T::zero()), re(-off)], [re(off), re(diag)]])
}

/// Two-level (deep quantum) coupling matrix `[[0, −α], [α, −ακ]]`.
pub fn deep_matrix<T: Real>(alpha: T, kappa: T) -> DenseMatrix<T> {
    DenseMatrix::from_rows([[re(T::zero()), re(-alpha)], [re(alpha), re(-alpha * kappa)]])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PropagatorOrder {
    Deep,
    Third,
}

/// `U(τ) = exp(−iMτ)` acting on `(Ŷ_{1,0}, â)` coefficient vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ParametricPropagator<T> {
    pub order: PropagatorOrder,
    pub tau: T,
    pub matrix: DenseMatrix<T>,
}

impl<T: Real> ParametricPropagator<T> {
    pub fn u_aa(&self) -> Cx<T> {
        self.matrix[(1, 1)]
    }

    pub fn u_ay(&self) -> Cx<T> {
        self.matrix[(1, 0)]
    }

    /// `|U_aa|² − |U_aY|² − 1`; zero for the deep order.
    pub fn bogoliubov_defect(&self) -> T {
        self.u_aa().norm_sqr() - self.u_ay().norm_sqr() - T::one()
    }

    /// `⟨n̂⟩ = |U_aa|²n0 + |U_aY|²`, `Δn² = |U_aa|⁴var0 + |U_aa|²|U_aY|²(n0 + 1)`.
    pub fn photon_stats(&self, n0: T, var0: T) -> PhotonStats<T> {
        let u = self.u_aa().norm_sqr();
        let v = self.u_ay().norm_sqr();
        PhotonStats::new(u * n0 + v, u * u * var0 + u * v * (n0 + T::one()))
    }
}

/// Closed-form exponential of a 2×2 matrix, `e^m (cosh δ I + sinh δ/δ (A − mI))`.
pub fn expm2<T: Real>(a: &DenseMatrix<T>) -> DenseMatrix<T> {
    let m = (a[(0, 0)] + a[(1, 1)]) * T::half();
    let b00 = a[(0, 0)] - m;
    let d2 = b00 * b00 + a[(0, 1)] * a[(1, 0)];
    let d = d2.sqrt();
    let (ch, sh) = if d.norm() < T::lit(1e-4) {
        (re(T::one()) + d2 * T::half() + d2 * d2 / T::lit(24.0), re(T::one()) + d2 / T::lit(6.0) + d2 * d2 / T::lit(120.0))
    } else {
        (d.cosh(), d.sinh() / d)
    };
    let e = m.exp();
    DenseMatrix::from_rows([
        [e * (ch + sh * b00), e * sh * a[(0, 1)]],
        [e * sh * a[(1, 0)], e * (ch - sh * b00)],
    ])
}

pub fn parametric_propagator<T: Real>(order: PropagatorOrder, alpha: T, kappa: T, tau: T) -> Result<ParametricPropagator<T>> {
    if !(tau >= T::zero()) {
        return domain(format!("tau must be nonnegative, got {tau}"));
    }
    if !(alpha > T::zero()) {
        return domain(format!("alpha must be positive, got {alpha}"));
    }
    let m = match order {
        PropagatorOrder::Deep => deep_matrix(alpha, kappa),
        PropagatorOrder::Third => third_order_matrix(alpha, kappa),
    };
    let matrix = expm2(&m.scale(cx(T::zero(), -tau)));
    Ok(ParametricPropagator { order, tau, matrix })
}

/// Length and bandwidth scales of the amplifier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainScale<T> {
    /// Quantum gain length `c/(2g√N)`.
    pub l_g: T,
    /// Classical gain length `c/(√3 (g²Nω_r/2)^{1/3})`.
    pub l_g_classical: T,
    /// `l_g / l_g_classical` evaluated from the two lengths.
    pub ratio: T,
    /// `√3/2^{4/3} α_N^{−1/3}`.
    pub ratio_closed_form: T,
    /// Momentum acceptance `2α_N q`.
    pub bandwidth: T,
    pub omega_r: T,
    pub alpha_n: T,
}

pub fn gain_scales<T: Real>(phys: &PhysicalParams<T>, n_electrons: u32) -> Result<GainScale<T>> {
    for (name, v) in [("g", phys.g), ("omega_r", phys.omega_r), ("q", phys.q), ("c", phys.c)] {
        if !(v > T::zero()) {
            return domain(format!("{name} must be positive, got {v}"));
        }
    }
    if n_electrons == 0 {
        return domain("the number of electrons must be at least 1");
    }
    let n = T::from_usize(n_electrons as usize);
    let alpha_n = phys.g / phys.omega_r * n.sqrt();
    let l_g = phys.c / (T::two() * phys.g * n.sqrt());
    let l_g_classical = phys.c / (T::lit(3.0).sqrt() * (phys.g * phys.g * n * phys.omega_r * T::half()).cbrt());
    Ok(GainScale {
        l_g,
        l_g_classical,
        ratio: l_g / l_g_classical,
        ratio_closed_form: ratio_closed_form(alpha_n),
        bandwidth: T::two() * alpha_n * phys.q,
        omega_r: phys.omega_r,
        alpha_n,
    })
}

/// `√3/2^{4/3} α^{−1/3}`.
pub fn ratio_closed_form<T: Real>(alpha_n: T) -> T {
    T::lit(3.0).sqrt() / T::two().powf(T::lit(4.0 / 3.0)) / alpha_n.cbrt()
}

/// Coupling below which the quantum gain length exceeds the classical one, `3^{3/2}/16`.
pub fn ratio_crossover<T: Real>() -> T {
    T::lit(3.0).powf(T::lit(1.5)) / T::lit(16.0)
}

/// Initial momentum in units of `q`, with derived detunings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumAxis<T> {
    pub p_over_q: T,
    pub alpha: T,
    pub delta: T,
    pub kappa: T,
}

impl<T: Real> MomentumAxis<T> {
    pub fn new(p_over_q: T, alpha: T) -> Result<Self> {
        if !(alpha > T::zero()) {
            return domain(format!("alpha must be positive, got {alpha}"));
        }
        let delta = T::two() * p_over_q - T::one();
        Ok(Self { p_over_q, alpha, delta, kappa: delta / alpha })
    }

    pub fn from_kappa(kappa: T, alpha: T) -> Result<Self> {
        Self::new((T::one() + kappa * alpha) * T::half(), alpha)
    }
}

pub fn momentum_axis<T: Real>(p_over_q: T, alpha: T) -> Result<MomentumAxis<T>> {
    MomentumAxis::new(p_over_q, alpha)
}
