//! Exact state evolution under static or rotating-frame generators, initial states and
//! observables.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{domain, QfelError, Result};
use crate::fock_ladder::CompositeBasis;
use crate::hamiltonians::{FourierComponents, ModelParams};
use crate::scalar::{phase, re, Cx, Real};
use crate::sparse::{LinearCombination, LinearOperator, SparseOp};

/// Tail mass allowed when truncating a coherent seed.
pub const COHERENT_TAIL: f64 = 1e-8;
/// Tail mass allowed when truncating a thermal seed.
pub const THERMAL_TAIL: f64 = 1e-6;
/// Negative variances down to this are rounding and clamp to zero.
pub const VARIANCE_CLAMP: f64 = 1e-10;

/// Pure state on a shared basis.
#[derive(Clone, Debug)]
pub struct StateVector<T> {
    basis: Arc<CompositeBasis>,
    amps: Vec<Cx<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn new(basis: Arc<CompositeBasis>, amps: Vec<Cx<T>>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(QfelError::DimensionMismatch { left: amps.len(), right: basis.dim() });
        }
        Ok(Self { basis, amps })
    }

    /// Basis vector `|index⟩`.
    pub fn basis_state(basis: Arc<CompositeBasis>, index: usize) -> Result<Self> {
        if index >= basis.dim() {
            return domain(format!("state index {index} outside basis of dimension {}", basis.dim()));
        }
        let mut amps = vec![Cx::new(T::zero(), T::zero()); basis.dim()];
        amps[index] = re(T::one());
        Ok(Self { basis, amps })
    }

    pub fn basis(&self) -> &Arc<CompositeBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Cx<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Incoherent mixture of pure states.
#[derive(Clone, Debug)]
pub struct MixedEnsemble<T> {
    members: Vec<(T, StateVector<T>)>,
}

impl<T: Real> MixedEnsemble<T> {
    /// Weights must be nonnegative and sum to one within `tolerance`.
    pub fn new(members: Vec<(T, StateVector<T>)>, tolerance: T) -> Result<Self> {
        if members.is_empty() {
            return domain("an ensemble needs at least one member");
        }
        if members.iter().any(|(w, _)| !(*w >= T::zero())) {
            return domain("ensemble weights must be nonnegative");
        }
        let total: T = members.iter().map(|(w, _)| *w).sum();
        if (total - T::one()).abs() > tolerance {
            return domain(format!("ensemble weights sum to {total}, not 1"));
        }
        let dim = members[0].1.basis.dim();
        if members.iter().any(|(_, s)| s.basis.dim() != dim) {
            return domain("ensemble members live on different bases");
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[(T, StateVector<T>)] {
        &self.members
    }
}

/// Either kind of initial condition.
#[derive(Clone, Debug)]
pub enum QuantumState<T> {
    Pure(StateVector<T>),
    Mixed(MixedEnsemble<T>),
}

impl<T: Real> QuantumState<T> {
    pub fn basis(&self) -> &Arc<CompositeBasis> {
        match self {
            QuantumState::Pure(s) => &s.basis,
            QuantumState::Mixed(m) => &m.members[0].1.basis,
        }
    }

    fn members(&self) -> Vec<(T, &StateVector<T>)> {
        match self {
            QuantumState::Pure(s) => vec![(T::one(), s)],
            QuantumState::Mixed(m) => m.members.iter().map(|(w, s)| (*w, s)).collect(),
        }
    }
}

/// Photon part of the initial state; electrons always start on level 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhotonSeed<T> {
    Fock(u32),
    /// Coherent state with the given mean photon number.
    Coherent(T),
    /// Thermal state with the given mean photon number.
    Thermal(T),
}

fn fock_index(basis: &CompositeBasis, n: u32) -> Result<usize> {
    if n > basis.n_max() {
        return Err(QfelError::Capacity(format!("Fock seed |{n}⟩ requires n_max >= {n}, basis has {}", basis.n_max())));
    }
    basis.ground_index(n).ok_or_else(|| {
        QfelError::Domain(format!(
            "Fock seed |{n}⟩ with electrons on level 0 lies outside charge sector {:?}",
            basis.charge_sector()
        ))
    })
}

fn require_unrestricted(basis: &CompositeBasis, what: &str) -> Result<()> {
    match basis.charge_sector() {
        None => Ok(()),
        Some(c) => domain(format!("{what} seed spans several charge sectors; basis is restricted to c={c}")),
    }
}

/// Builds the initial state `|seed⟩ ⊗ |all electrons on μ = 0⟩`.
pub fn initial_state<T: Real>(basis: &Arc<CompositeBasis>, seed: PhotonSeed<T>) -> Result<QuantumState<T>> {
    match seed {
        PhotonSeed::Fock(n) => Ok(QuantumState::Pure(StateVector::basis_state(basis.clone(), fock_index(basis, n)?)?)),
        PhotonSeed::Coherent(mean) => {
            let mean = mean.to_f64_lossy();
            if !(mean >= 0.0) {
                return domain("coherent mean photon number must be nonnegative");
            }
            require_unrestricted(basis, "coherent")?;
            let probs = poisson(mean, basis.n_max());
            let tail = poisson_tail(mean, basis.n_max());
            if tail >= COHERENT_TAIL {
                let mut need = basis.n_max();
                while poisson_tail(mean, need) >= COHERENT_TAIL {
                    need += 1;
                }
                return Err(QfelError::Capacity(format!(
                    "coherent seed with mean {mean} leaves tail mass {tail:.3e} at n_max={}; requires n_max >= {need}",
                    basis.n_max()
                )));
            }
            let total: f64 = probs.iter().sum();
            let mut amps = vec![Cx::new(T::zero(), T::zero()); basis.dim()];
            for (n, p) in probs.iter().enumerate() {
                amps[fock_index(basis, n as u32)?] = re(T::lit((p / total).sqrt()));
            }
            Ok(QuantumState::Pure(StateVector::new(basis.clone(), amps)?))
        }
        PhotonSeed::Thermal(mean) => {
            let mean = mean.to_f64_lossy();
            if !(mean >= 0.0) {
                return domain("thermal mean photon number must be nonnegative");
            }
            if mean == 0.0 {
                return initial_state(basis, PhotonSeed::Fock(0));
            }
            require_unrestricted(basis, "thermal")?;
            let ratio = mean / (1.0 + mean);
            // tail beyond n is ratio^(n+1)
            let mut cut = 0u32;
            while ratio.powi(cut as i32 + 1) >= THERMAL_TAIL {
                cut += 1;
            }
            if cut > basis.n_max() {
                return Err(QfelError::Capacity(format!(
                    "thermal seed with mean {mean} leaves tail mass {:.3e} at n_max={}; requires n_max >= {cut}",
                    ratio.powi(basis.n_max() as i32 + 1),
                    basis.n_max()
                )));
            }
            let weights: Vec<f64> = (0..=cut).map(|n| ratio.powi(n as i32) / (1.0 + mean)).collect();
            let total: f64 = weights.iter().sum();
            let members = weights
                .iter()
                .enumerate()
                .map(|(n, w)| Ok((T::lit(w / total), StateVector::basis_state(basis.clone(), fock_index(basis, n as u32)?)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(QuantumState::Mixed(MixedEnsemble::new(members, T::lit(1e-9))?))
        }
    }
}

fn poisson(mean: f64, n_max: u32) -> Vec<f64> {
    let mut p = Vec::with_capacity(n_max as usize + 1);
    let mut term = (-mean).exp();
    p.push(term);
    for n in 1..=n_max {
        term *= mean / n as f64;
        p.push(term);
    }
    p
}

fn poisson_tail(mean: f64, n_max: u32) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let p = poisson(mean, n_max);
    let mut term = *p.last().unwrap_or(&0.0);
    let mut tail = 0.0;
    let mut n = n_max;
    loop {
        n += 1;
        term *= mean / n as f64;
        tail += term;
        if term < 1e-300 || (n as f64 > mean && term < tail * 1e-17) {
            break;
        }
    }
    tail
}

/// Expectation values reported along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observables<T> {
    pub n_mean: T,
    pub n2_mean: T,
    /// `⟨n̂²⟩ − ⟨n̂⟩²`, clamped at zero for rounding-level negatives.
    pub n_var: T,
    /// `⟨Υ_z⟩ = ⟨Υ_{00} − Υ_{11}⟩`.
    pub upsilon_z: T,
    pub charge: T,
    pub norm: T,
}

fn finish<T: Real>(n_mean: T, n2_mean: T, upsilon_z: T, charge: T, norm: T) -> Observables<T> {
    let mut n_var = n2_mean - n_mean * n_mean;
    if n_var < T::zero() && n_var >= -T::lit(VARIANCE_CLAMP) {
        n_var = T::zero();
    }
    Observables { n_mean, n2_mean, n_var, upsilon_z, charge, norm }
}

fn pure_observables<T: Real>(basis: &CompositeBasis, amps: &[Cx<T>]) -> Observables<T> {
    let (mut n1, mut n2, mut z, mut c, mut norm) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for (i, a) in amps.iter().enumerate() {
        let p = a.norm_sqr();
        if p == T::zero() {
            continue;
        }
        let n = T::from_usize(basis.photons(i) as usize);
        n1 += p * n;
        n2 += p * n * n;
        z += p * T::from_i64(basis.occupation(i, 0) as i64 - basis.occupation(i, 1) as i64);
        c += p * T::from_i64(basis.charge(i));
        norm += p;
    }
    finish(n1, n2, z, c, norm)
}

fn combine<T: Real>(parts: &[(T, Observables<T>)]) -> Observables<T> {
    let s = |f: fn(&Observables<T>) -> T| parts.iter().map(|(w, o)| *w * f(o)).sum::<T>();
    finish(s(|o| o.n_mean), s(|o| o.n2_mean), s(|o| o.upsilon_z), s(|o| o.charge), s(|o| o.norm))
}

/// Observables of a pure state or of an ensemble (weight-linear in the members).
pub fn observables<T: Real>(state: &QuantumState<T>) -> Observables<T> {
    let parts: Vec<(T, Observables<T>)> =
        state.members().into_iter().map(|(w, s)| (w, pure_observables(&s.basis, &s.amps))).collect();
    combine(&parts)
}

/// Right-hand side of `i dψ/dτ = G(τ) ψ`.
#[derive(Clone, Copy, Debug)]
pub enum Generator<'a, T> {
    /// Time-independent Hamiltonian.
    Static(&'a SparseOp<T>),
    /// Rotating-frame Hamiltonian; states evolve under `Ĥ′(−τ) = ε Σ Ĥ_μ e^{−2iμτ}`.
    Rotating { components: &'a FourierComponents<T>, epsilon: T },
}

impl<'a, T: Real> Generator<'a, T> {
    pub fn rotating(components: &'a FourierComponents<T>, params: &ModelParams<T>) -> Self {
        Generator::Rotating { components, epsilon: params.epsilon() }
    }

    pub fn dim(&self) -> usize {
        match self {
            Generator::Static(h) => h.dim(),
            Generator::Rotating { components, .. } => components.dim(),
        }
    }

    /// `Σ_j w_j G(τ_j)` for `(w_j, τ_j)` pairs.
    fn combined(&self, samples: &[(T, T)]) -> LinearCombination<'a, T> {
        match *self {
            Generator::Static(h) => {
                let w: T = samples.iter().map(|(w, _)| *w).sum();
                let mut lc = LinearCombination::new(h.dim());
                lc.push(re(w), h).expect("own dimension");
                lc
            }
            Generator::Rotating { components, epsilon } => {
                let mut lc = LinearCombination::new(components.dim());
                for mu in components.indices() {
                    let m = T::from_i64(mu as i64);
                    let coef = samples
                        .iter()
                        .fold(Cx::new(T::zero(), T::zero()), |acc, &(w, t)| acc + phase(-T::two() * m * t) * (w * epsilon));
                    lc.push(coef, components.get(mu)).expect("own dimension");
                }
                lc
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Classical fourth-order Runge–Kutta.
    Rk4,
    /// Fourth-order commutator-free exponential integrator (two exponentials per step).
    CommutatorFree4,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Rk4 => "rk4",
            Scheme::CommutatorFree4 => "cf4",
        })
    }
}

/// Time-stepping and audit settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig<T> {
    pub scheme: Scheme,
    /// Initial step; each grid interval is split into equal substeps no longer than this.
    pub step: T,
    /// Step halving stops once observables move less than `rtol` (relative, floor 1).
    pub rtol: T,
    pub max_halvings: u32,
    /// Allowed `|norm − 1|` per unit τ (minimum span 1).
    pub norm_drift_tol: T,
    /// Allowed population on outer window levels or on the photon cutoff.
    pub leakage_tol: T,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            scheme: Scheme::CommutatorFree4,
            step: T::PI() / T::lit(40.0),
            rtol: T::lit(1e-7),
            max_halvings: 8,
            norm_drift_tol: T::lit(1e-9),
            leakage_tol: T::lit(1e-2),
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > T::zero()) {
            return domain("integrator step must be positive");
        }
        if !(self.rtol > T::zero() && self.rtol <= T::lit(1e-3)) {
            return domain(format!("rtol must lie in (0, 1e-3], got {}", self.rtol));
        }
        if !(self.norm_drift_tol > T::zero() && self.leakage_tol > T::zero()) {
            return domain("audit tolerances must be positive");
        }
        Ok(())
    }
}

/// Integrator metadata and audit results attached to a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorMeta<T> {
    pub scheme: Scheme,
    /// Step actually used after halving (largest over ensemble members).
    pub step: T,
    pub halvings: u32,
    pub max_norm_drift: T,
    /// Largest population found on the outer window levels (below 0 or above 1).
    pub max_edge_population: T,
    pub max_cutoff_population: T,
    /// Audit thresholds that were exceeded (but by less than 10x).
    pub flags: Vec<String>,
}

/// Time series of observables on a τ grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub tau: Vec<T>,
    pub records: Vec<Observables<T>>,
    pub n_electrons: u32,
    pub meta: IntegratorMeta<T>,
}

pub const TRAJECTORY_HEADER: &str = "tau,n_mean,n_var,inversion,norm,charge";

/// Shortest round-trip-safe representation with 17 significant digits.
pub fn format_sig17(x: f64) -> String {
    format!("{x:.16e}")
}

impl<T: Real> Trajectory<T> {
    /// CSV with header `tau,n_mean,n_var,inversion,norm,charge`; inversion is `⟨Υ_z⟩/N`.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.tau.len() + 1));
        s.push_str(TRAJECTORY_HEADER);
        s.push('\n');
        let n = T::from_usize(self.n_electrons as usize);
        for (t, r) in self.tau.iter().zip(&self.records) {
            let cols = [*t, r.n_mean, r.n_var, r.upsilon_z / n, r.norm, r.charge];
            let line: Vec<String> = cols.iter().map(|v| format_sig17(v.to_f64_lossy())).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }
}

/// `exp(s·A) v` by a truncated Taylor series with substeps of norm at most 1.
pub fn expm_action<T: Real>(op: &impl LinearOperator<T>, s: Cx<T>, v: &[Cx<T>]) -> Vec<Cx<T>> {
    let bound = s.norm() * op.norm1_bound();
    let substeps = bound.ceil().to_f64_lossy().max(1.0) as usize;
    let h = s / T::from_usize(substeps);
    let eps = T::epsilon();
    let zero = Cx::new(T::zero(), T::zero());
    let mut out = v.to_vec();
    let mut term = vec![zero; v.len()];
    let mut next = vec![zero; v.len()];
    let inf = |x: &[Cx<T>]| x.iter().fold(T::zero(), |m, z| m.max(z.norm()));
    for _ in 0..substeps {
        term.copy_from_slice(&out);
        for k in 1..=40 {
            next.iter_mut().for_each(|z| *z = zero);
            op.apply_add(&term, h / T::from_usize(k), &mut next);
            std::mem::swap(&mut term, &mut next);
            for (o, t) in out.iter_mut().zip(&term) {
                *o += *t;
            }
            if inf(&term) <= eps * inf(&out) {
                break;
            }
        }
    }
    out
}

fn minus_i<T: Real>() -> Cx<T> {
    Cx::new(T::zero(), -T::one())
}

fn cf4_step<T: Real>(gen: &Generator<'_, T>, psi: &[Cx<T>], t: T, h: T) -> Vec<Cx<T>> {
    let s3 = T::lit(3.0).sqrt();
    let c1 = T::half() - s3 / T::lit(6.0);
    let c2 = T::half() + s3 / T::lit(6.0);
    let a1 = T::lit(0.25) - s3 / T::lit(6.0);
    let a2 = T::lit(0.25) + s3 / T::lit(6.0);
    let (t1, t2) = (t + c1 * h, t + c2 * h);
    let first = gen.combined(&[(a2, t1), (a1, t2)]);
    let mid = expm_action(&first, minus_i::<T>() * h, psi);
    let second = gen.combined(&[(a1, t1), (a2, t2)]);
    expm_action(&second, minus_i::<T>() * h, &mid)
}

fn rk4_step<T: Real>(gen: &Generator<'_, T>, psi: &[Cx<T>], t: T, h: T) -> Vec<Cx<T>> {
    let zero = Cx::new(T::zero(), T::zero());
    let f = |tau: T, x: &[Cx<T>]| {
        let mut y = vec![zero; x.len()];
        gen.combined(&[(T::one(), tau)]).apply_add(x, minus_i(), &mut y);
        y
    };
    let axpy = |x: &[Cx<T>], k: &[Cx<T>], c: T| x.iter().zip(k).map(|(a, b)| a + b * c).collect::<Vec<_>>();
    let half = h * T::half();
    let k1 = f(t, psi);
    let k2 = f(t + half, &axpy(psi, &k1, half));
    let k3 = f(t + half, &axpy(psi, &k2, half));
    let k4 = f(t + h, &axpy(psi, &k3, h));
    let sixth = h / T::lit(6.0);
    psi.iter()
        .enumerate()
        .map(|(i, p)| p + (k1[i] + k2[i] * T::two() + k3[i] * T::two() + k4[i]) * sixth)
        .collect()
}

struct Audit<T> {
    max_norm_drift: T,
    max_edge: T,
    max_cutoff: T,
}

fn leakage<T: Real>(basis: &CompositeBasis, amps: &[Cx<T>]) -> (T, T) {
    let w = basis.window();
    let (mut edge, mut cut) = (T::zero(), T::zero());
    for (i, a) in amps.iter().enumerate() {
        let p = a.norm_sqr();
        let occ = basis.occupations(i);
        if (w.mu_min() < 0 && occ[0] > 0) || (w.mu_max() > 1 && occ[occ.len() - 1] > 0) {
            edge += p;
        }
        if basis.photons(i) == basis.n_max() {
            cut += p;
        }
    }
    (edge, cut)
}

fn run_fixed<T: Real>(
    state: &StateVector<T>,
    gen: &Generator<'_, T>,
    grid: &[T],
    step: T,
    scheme: Scheme,
) -> (Vec<Observables<T>>, Audit<T>) {
    let basis = &state.basis;
    let mut psi = state.amps.clone();
    let norm0 = state.norm_sqr();
    let mut records = Vec::with_capacity(grid.len());
    let mut audit = Audit { max_norm_drift: T::zero(), max_edge: T::zero(), max_cutoff: T::zero() };
    let mut observe = |psi: &[Cx<T>], audit: &mut Audit<T>| {
        let o = pure_observables(basis, psi);
        let (edge, cut) = leakage(basis, psi);
        audit.max_norm_drift = audit.max_norm_drift.max((o.norm - norm0).abs());
        audit.max_edge = audit.max_edge.max(edge);
        audit.max_cutoff = audit.max_cutoff.max(cut);
        records.push(o);
    };
    observe(&psi, &mut audit);
    for w in grid.windows(2) {
        psi = advance(gen, psi, w[0], w[1], step, scheme);
        observe(&psi, &mut audit);
    }
    (records, audit)
}

fn advance<T: Real>(gen: &Generator<'_, T>, mut psi: Vec<Cx<T>>, from: T, to: T, step: T, scheme: Scheme) -> Vec<Cx<T>> {
    let span = to - from;
    let n = (span / step).ceil().to_f64_lossy().max(1.0) as usize;
    let h = span / T::from_usize(n);
    for j in 0..n {
        let t = from + h * T::from_usize(j);
        psi = match scheme {
            Scheme::CommutatorFree4 => cf4_step(gen, &psi, t, h),
            Scheme::Rk4 => rk4_step(gen, &psi, t, h),
        };
    }
    psi
}

/// Fixed-step propagation returning the state at every grid point (no halving, no audit).
pub fn propagate<T: Real>(
    state: &StateVector<T>,
    generator: &Generator<'_, T>,
    grid: &[T],
    step: T,
    scheme: Scheme,
) -> Result<Vec<StateVector<T>>> {
    check_grid(grid)?;
    if !(step > T::zero()) {
        return domain("integrator step must be positive");
    }
    if generator.dim() != state.basis.dim() {
        return Err(QfelError::DimensionMismatch { left: generator.dim(), right: state.basis.dim() });
    }
    let mut out = vec![state.clone()];
    for w in grid.windows(2) {
        let psi = advance(generator, out.last().expect("nonempty").amps.clone(), w[0], w[1], step, scheme);
        out.push(StateVector { basis: state.basis.clone(), amps: psi });
    }
    Ok(out)
}

fn max_change<T: Real>(a: &[Observables<T>], b: &[Observables<T>]) -> T {
    let rel = |x: T, y: T| (x - y).abs() / T::one().max(x.abs());
    a.iter()
        .zip(b)
        .map(|(p, q)| rel(p.n_mean, q.n_mean).max(rel(p.n2_mean, q.n2_mean)).max(rel(p.upsilon_z, q.upsilon_z)))
        .fold(T::zero(), T::max)
}

struct MemberRun<T> {
    records: Vec<Observables<T>>,
    audit: Audit<T>,
    step: T,
    halvings: u32,
}

fn evolve_member<T: Real>(
    state: &StateVector<T>,
    gen: &Generator<'_, T>,
    grid: &[T],
    config: &IntegratorConfig<T>,
) -> Result<MemberRun<T>> {
    let mut step = config.step;
    let (mut prev, _) = run_fixed(state, gen, grid, step, config.scheme);
    let mut last_change = T::infinity();
    for halvings in 1..=config.max_halvings {
        step = step * T::half();
        let (records, audit) = run_fixed(state, gen, grid, step, config.scheme);
        last_change = max_change(&prev, &records);
        if last_change < config.rtol {
            return Ok(MemberRun { records, audit, step, halvings });
        }
        prev = records;
    }
    Err(QfelError::Integration(format!(
        "observables still changed by {last_change:e} after {} step halvings (step {step}); rtol {}",
        config.max_halvings, config.rtol
    )))
}

fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.is_empty() || grid[0] != T::zero() {
        return domain("the τ grid must start at 0");
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return domain("the τ grid must be strictly ascending");
    }
    Ok(())
}

/// Integrates `i dψ/dτ = G(τ) ψ` over `grid`, halving the step until converged, and audits
/// norm drift and leakage. Ensembles evolve member by member.
pub fn evolve<T: Real>(
    state: &QuantumState<T>,
    generator: &Generator<'_, T>,
    grid: &[T],
    config: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    config.validate()?;
    check_grid(grid)?;
    if generator.dim() != state.basis().dim() {
        return Err(QfelError::DimensionMismatch { left: generator.dim(), right: state.basis().dim() });
    }
    let mut parts: Vec<(T, Vec<Observables<T>>)> = Vec::new();
    let mut meta = IntegratorMeta {
        scheme: config.scheme,
        step: T::zero(),
        halvings: 0,
        max_norm_drift: T::zero(),
        max_edge_population: T::zero(),
        max_cutoff_population: T::zero(),
        flags: Vec::new(),
    };
    for (w, member) in state.members() {
        let run = evolve_member(member, generator, grid, config)?;
        meta.step = meta.step.max(run.step);
        meta.halvings = meta.halvings.max(run.halvings);
        meta.max_norm_drift = meta.max_norm_drift.max(run.audit.max_norm_drift);
        meta.max_edge_population = meta.max_edge_population.max(run.audit.max_edge);
        meta.max_cutoff_population = meta.max_cutoff_population.max(run.audit.max_cutoff);
        parts.push((w, run.records));
    }
    let span = T::one().max(*grid.last().expect("nonempty grid"));
    let checks = [
        ("norm drift", meta.max_norm_drift, config.norm_drift_tol * span),
        ("window-edge population", meta.max_edge_population, config.leakage_tol),
        ("photon-cutoff population", meta.max_cutoff_population, config.leakage_tol),
    ];
    for (what, value, limit) in checks {
        if value > limit * T::lit(10.0) {
            return Err(QfelError::Integration(format!("{what} {value:e} exceeds 10x the audit threshold {limit:e}")));
        }
        if value > limit {
            meta.flags.push(format!("{what} {value:e} above audit threshold {limit:e}"));
        }
    }
    let records = (0..grid.len())
        .map(|k| combine(&parts.iter().map(|(w, r)| (*w, r[k])).collect::<Vec<_>>()))
        .collect();
    Ok(Trajectory { tau: grid.to_vec(), records, n_electrons: state.basis().n_electrons(), meta })
}

/// `n + 1` evenly spaced points on `[0, end]`.
pub fn uniform_grid<T: Real>(end: T, n: usize) -> Vec<T> {
    (0..=n).map(|k| end * T::from_usize(k) / T::from_usize(n.max(1))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_ladder::{enumerate_basis, LadderWindow};
    use crate::hamiltonians::{dicke_hamiltonian, fourier_components, lab_frame_parts};

    fn shared(n: u32, lo: i32, hi: i32, n_max: u32, sector: Option<i64>) -> Arc<CompositeBasis> {
        Arc::new(enumerate_basis(n, LadderWindow::new(lo, hi).unwrap(), n_max, sector).unwrap())
    }

    #[test]
    fn vacuum_seed_observables() {
        let b = shared(3, -1, 2, 4, None);
        let s = initial_state::<f64>(&b, PhotonSeed::Fock(0)).unwrap();
        let o = observables(&s);
        assert_eq!((o.n_mean, o.n_var, o.upsilon_z, o.charge, o.norm), (0.0, 0.0, 3.0, 0.0, 1.0));
        let QuantumState::Pure(v) = &s else { panic!() };
        assert_eq!(v.amplitudes()[b.ground_index(0).unwrap()], re(1.0));
    }

    #[test]
    fn fock_seed_has_no_variance() {
        let b = shared(1, 0, 1, 8, None);
        let o = observables(&initial_state::<f64>(&b, PhotonSeed::Fock(5)).unwrap());
        assert_eq!(o.n_mean, 5.0);
        assert_eq!(o.n_var, 0.0);
        assert!(matches!(initial_state::<f64>(&b, PhotonSeed::Fock(9)), Err(QfelError::Capacity(_))));
    }

    #[test]
    fn coherent_seed_mean() {
        let b = shared(1, 0, 1, 20, None);
        let o = observables(&initial_state::<f64>(&b, PhotonSeed::Coherent(1.0)).unwrap());
        assert!((o.n_mean - 1.0).abs() < 1e-6);
        assert!((o.n_var - 1.0).abs() < 1e-6);
        let small = shared(1, 0, 1, 5, None);
        let err = initial_state::<f64>(&small, PhotonSeed::Coherent(4.0)).unwrap_err();
        assert!(matches!(err, QfelError::Capacity(ref m) if m.contains("requires n_max >=")), "{err}");
    }

    #[test]
    fn thermal_seed_moments() {
        let b = shared(1, 0, 1, 30, None);
        let s = initial_state::<f64>(&b, PhotonSeed::Thermal(1.0)).unwrap();
        let o = observables(&s);
        // truncation tail below 1e-6 shifts the second moment by O(1e-3)
        assert!((o.n_mean - 1.0).abs() < 1e-4);
        assert!((o.n_var - 2.0).abs() < 2e-3);
        let QuantumState::Mixed(m) = &s else { panic!() };
        assert!((m.members().iter().map(|(w, _)| w).sum::<f64>() - 1.0).abs() < 1e-12);
        let small = shared(1, 0, 1, 10, None);
        assert!(matches!(initial_state::<f64>(&small, PhotonSeed::Thermal(1.0)), Err(QfelError::Capacity(_))));
    }

    #[test]
    fn seeds_respect_sector() {
        let b = shared(2, -1, 2, 6, Some(0));
        assert!(initial_state::<f64>(&b, PhotonSeed::Fock(0)).is_ok());
        assert!(matches!(initial_state::<f64>(&b, PhotonSeed::Fock(1)), Err(QfelError::Domain(_))));
        assert!(initial_state::<f64>(&b, PhotonSeed::Coherent(1.0)).is_err());
    }

    #[test]
    fn ensemble_weights_validated() {
        let b = shared(1, 0, 1, 2, None);
        let s = StateVector::<f64>::basis_state(b.clone(), 0).unwrap();
        assert!(MixedEnsemble::new(vec![(0.5, s.clone())], 1e-9).is_err());
        assert!(MixedEnsemble::new(vec![(-0.5, s.clone()), (1.5, s.clone())], 1e-9).is_err());
        assert!(MixedEnsemble::new(vec![(0.25, s.clone()), (0.75, s)], 1e-9).is_ok());
    }

    #[test]
    fn zero_generator_keeps_observables() {
        let b = shared(2, -1, 2, 8, None);
        let zero = SparseOp::zeros(b.dim());
        let s = initial_state::<f64>(&b, PhotonSeed::Coherent(0.5)).unwrap();
        let tr = evolve(&s, &Generator::Static(&zero), &uniform_grid(5.0, 10), &IntegratorConfig::default()).unwrap();
        let first = tr.records[0];
        assert!(tr.records.iter().all(|r| *r == first));
    }

    #[test]
    fn single_electron_vacuum_rabi() {
        let b = shared(1, 0, 1, 3, None);
        let p = ModelParams::new(1, 0.2, 0.0).unwrap();
        let h = dicke_hamiltonian(&b, &p);
        let s = initial_state::<f64>(&b, PhotonSeed::Fock(0)).unwrap();
        let grid = uniform_grid(20.0, 40);
        for scheme in [Scheme::CommutatorFree4, Scheme::Rk4] {
            let cfg = IntegratorConfig { scheme, ..Default::default() };
            let tr = evolve(&s, &Generator::Static(&h), &grid, &cfg).unwrap();
            for (t, r) in tr.tau.iter().zip(&tr.records) {
                assert!((r.n_mean - (0.2 * t).sin().powi(2)).abs() < 1e-8, "{scheme} τ={t}");
            }
        }
    }

    #[test]
    fn cf4_is_fourth_order() {
        let b = shared(2, -1, 2, 4, None);
        let p = ModelParams::from_alpha_kappa(2, 0.8, 0.7).unwrap();
        let h = fourier_components(&b, &p);
        let g = Generator::rotating(&h, &p);
        let s = initial_state::<f64>(&b, PhotonSeed::Fock(1)).unwrap();
        let QuantumState::Pure(v) = &s else { panic!() };
        let grid = [0.0, 2.0];
        let reference = run_fixed(v, &g, &grid, 1.0 / 1024.0, Scheme::CommutatorFree4).0[1].n_mean;
        let err = |h: f64| (run_fixed(v, &g, &grid, h, Scheme::CommutatorFree4).0[1].n_mean - reference).abs();
        let (e1, e2) = (err(0.1), err(0.05));
        let order = (e1 / e2).log2();
        assert!(order > 3.5 && order < 4.6, "observed order {order} ({e1:e}, {e2:e})");
        let r_err = |h: f64| (run_fixed(v, &g, &grid, h, Scheme::Rk4).0[1].n_mean - reference).abs();
        // RK4 reaches its asymptotic rate only at smaller steps
        let rk_order = (r_err(1.0 / 64.0) / r_err(1.0 / 128.0)).log2();
        assert!(rk_order > 3.5, "rk4 order {rk_order}");
    }

    #[test]
    fn rotating_frame_matches_lab_frame() {
        let b = shared(2, -2, 3, 6, None);
        let p = ModelParams::from_alpha_kappa(2, 0.3, 1.2).unwrap();
        let (h0, h1) = lab_frame_parts(&b, &p);
        let lab = h0.add(&h1).unwrap();
        let comps = fourier_components(&b, &p);
        let s = initial_state::<f64>(&b, PhotonSeed::Fock(1)).unwrap();
        let grid = uniform_grid(6.0, 12);
        let cfg = IntegratorConfig { leakage_tol: 0.5, ..Default::default() };
        let a = evolve(&s, &Generator::Static(&lab), &grid, &cfg).unwrap();
        let r = evolve(&s, &Generator::rotating(&comps, &p), &grid, &cfg).unwrap();
        for (x, y) in a.records.iter().zip(&r.records) {
            assert!((x.n_mean - y.n_mean).abs() < 1e-7, "{} vs {}", x.n_mean, y.n_mean);
            assert!((x.upsilon_z - y.upsilon_z).abs() < 1e-7);
        }
    }

    #[test]
    fn charge_conserved_under_full_hamiltonian() {
        let b = shared(3, -2, 3, 8, None);
        let p = ModelParams::from_alpha_kappa(3, 0.4, 0.3).unwrap();
        let comps = fourier_components(&b, &p);
        let s = initial_state::<f64>(&b, PhotonSeed::Coherent(0.5)).unwrap();
        let cfg = IntegratorConfig { leakage_tol: 0.5, ..Default::default() };
        let tr = evolve(&s, &Generator::rotating(&comps, &p), &uniform_grid(10.0, 20), &cfg).unwrap();
        let c0 = tr.records[0].charge;
        assert!(tr.records.iter().all(|r| (r.charge - c0).abs() < 1e-8));
        assert!(tr.meta.max_norm_drift < 1e-9 * 10.0);
    }

    #[test]
    fn ensemble_observables_are_weight_linear() {
        let b = shared(2, -1, 2, 30, None);
        let p = ModelParams::from_alpha_kappa(2, 0.3, 0.0).unwrap();
        let h = dicke_hamiltonian(&b, &p);
        let s = initial_state::<f64>(&b, PhotonSeed::Thermal(0.5)).unwrap();
        let grid = uniform_grid(3.0, 6);
        let cfg = IntegratorConfig::default();
        let tr = evolve(&s, &Generator::Static(&h), &grid, &cfg).unwrap();
        let QuantumState::Mixed(m) = &s else { panic!() };
        let mut n_sum = vec![0.0; grid.len()];
        let mut n2_sum = vec![0.0; grid.len()];
        for (w, member) in m.members() {
            let t = evolve(&QuantumState::Pure(member.clone()), &Generator::Static(&h), &grid, &cfg).unwrap();
            for k in 0..grid.len() {
                n_sum[k] += w * t.records[k].n_mean;
                n2_sum[k] += w * t.records[k].n2_mean;
            }
        }
        for k in 0..grid.len() {
            assert_eq!(tr.records[k].n_mean, n_sum[k]);
            assert_eq!(tr.records[k].n2_mean, n2_sum[k]);
        }
    }

    #[test]
    fn grid_and_config_validation() {
        let b = shared(1, 0, 1, 2, None);
        let h = SparseOp::zeros(b.dim());
        let s = initial_state::<f64>(&b, PhotonSeed::Fock(0)).unwrap();
        let g = Generator::Static(&h);
        let cfg = IntegratorConfig::default();
        assert!(evolve(&s, &g, &[0.5, 1.0], &cfg).is_err());
        assert!(evolve(&s, &g, &[0.0, 1.0, 1.0], &cfg).is_err());
        assert!(evolve(&s, &g, &[0.0, 1.0], &IntegratorConfig { rtol: 0.1, ..cfg }).is_err());
        assert!(evolve(&s, &g, &[0.0, 1.0], &IntegratorConfig { step: 0.0, ..cfg }).is_err());
    }

    #[test]
    fn leakage_beyond_ten_times_threshold_is_error() {
        let b = shared(1, -1, 2, 4, None);
        let s = StateVector::<f64>::basis_state(b.clone(), b.index_of(&[0, 0, 0, 1], 0).unwrap()).unwrap();
        let h = SparseOp::zeros(b.dim());
        let err = evolve(&QuantumState::Pure(s), &Generator::Static(&h), &[0.0, 1.0], &IntegratorConfig::default());
        assert!(matches!(err, Err(QfelError::Integration(_))));
    }

    #[test]
    fn csv_layout() {
        let b = shared(2, 0, 1, 2, None);
        let h = SparseOp::zeros(b.dim());
        let s = initial_state::<f64>(&b, PhotonSeed::Fock(1)).unwrap();
        let tr = evolve(&s, &Generator::Static(&h), &[0.0, 0.5], &IntegratorConfig::default()).unwrap();
        let csv = tr.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(!csv.contains('\r'));
        let cols: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols, vec![0.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(format_sig17(0.1), "1.0000000000000001e-1");
    }
}
