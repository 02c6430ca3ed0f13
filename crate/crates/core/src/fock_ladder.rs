//! Permutation-symmetric many-electron Fock basis on a momentum ladder, tensored with a
//! truncated photon mode, and the sparse operators acting on it.
//!
//! Electron states are occupation vectors `m = (m_{mu_min}, …, m_{mu_max})` with `Σ m = N`.
//! Level `μ` carries momentum `p − μq`.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{domain, QfelError, Result};
use crate::scalar::{re, Cx, Real};
use crate::sparse::SparseOp;

/// Basis-size cap used when none is given.
pub const DEFAULT_MAX_DIM: usize = 5_000_000;

/// Contiguous range of ladder levels `mu_min..=mu_max`, always containing 0 and 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LadderWindow {
    mu_min: i32,
    mu_max: i32,
}

impl LadderWindow {
    pub fn new(mu_min: i32, mu_max: i32) -> Result<Self> {
        if mu_min > 0 || mu_max < 1 {
            return domain(format!(
                "window {{{mu_min}..{mu_max}}} must contain the resonant levels 0 and 1"
            ));
        }
        Ok(Self { mu_min, mu_max })
    }

    pub fn mu_min(&self) -> i32 {
        self.mu_min
    }

    pub fn mu_max(&self) -> i32 {
        self.mu_max
    }

    /// Number of levels.
    pub fn len(&self) -> usize {
        (self.mu_max - self.mu_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, mu: i32) -> bool {
        (self.mu_min..=self.mu_max).contains(&mu)
    }

    /// Position of level `mu` inside an occupation vector.
    pub fn slot(&self, mu: i32) -> Option<usize> {
        self.contains(mu).then(|| (mu - self.mu_min) as usize)
    }

    pub fn levels(&self) -> impl Iterator<Item = i32> + Clone {
        self.mu_min..=self.mu_max
    }
}

impl std::fmt::Display for LadderWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{{}..{}}}", self.mu_min, self.mu_max)
    }
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// All occupation vectors of `N` bosonic electrons over a window, in descending
/// lexicographic order (`(N,0,…)` first).
#[derive(Clone, Debug)]
pub struct SymmetricElectronBasis {
    n_electrons: u32,
    window: LadderWindow,
    states: Vec<Box<[u32]>>,
    index: HashMap<Box<[u32]>, usize>,
}

impl SymmetricElectronBasis {
    pub fn new(n_electrons: u32, window: LadderWindow) -> Result<Self> {
        Self::with_cap(n_electrons, window, DEFAULT_MAX_DIM)
    }

    pub fn with_cap(n_electrons: u32, window: LadderWindow, cap: usize) -> Result<Self> {
        if n_electrons == 0 {
            return domain("the number of electrons must be at least 1");
        }
        let count = Self::count(n_electrons, window);
        if count > cap as u128 {
            return Err(QfelError::Capacity(format!(
                "{count} electron states for N={n_electrons} on window {window} exceed the cap of {cap}"
            )));
        }
        let l = window.len();
        let mut states = Vec::with_capacity(count as usize);
        let mut current = vec![0u32; l];
        fill(&mut states, &mut current, 0, n_electrons);
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(Self { n_electrons, window, states, index })
    }

    /// `binomial(N + L − 1, L − 1)`.
    pub fn count(n_electrons: u32, window: LadderWindow) -> u128 {
        let l = window.len() as u64;
        binomial(n_electrons as u64 + l - 1, l - 1)
    }

    pub fn n_electrons(&self) -> u32 {
        self.n_electrons
    }

    pub fn window(&self) -> LadderWindow {
        self.window
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &[u32] {
        &self.states[i]
    }

    pub fn index_of(&self, occupations: &[u32]) -> Option<usize> {
        self.index.get(occupations).copied()
    }

    /// `Σ_μ μ·m_μ` for state `i`.
    pub fn ladder_sum(&self, i: usize) -> i64 {
        ladder_sum(self.window, &self.states[i])
    }
}

fn fill(out: &mut Vec<Box<[u32]>>, current: &mut [u32], slot: usize, remaining: u32) {
    if slot + 1 == current.len() {
        current[slot] = remaining;
        out.push(current.to_vec().into_boxed_slice());
        return;
    }
    for m in (0..=remaining).rev() {
        current[slot] = m;
        fill(out, current, slot + 1, remaining - m);
    }
    current[slot] = 0;
}

fn ladder_sum(window: LadderWindow, occ: &[u32]) -> i64 {
    window.levels().zip(occ).map(|(mu, &m)| mu as i64 * m as i64).sum()
}

#[derive(Clone, Copy, Debug)]
struct PhotonRange {
    start: usize,
    n_lo: u32,
    count: u32,
}

/// Electron basis ⊗ photon Fock states `0..=n_max`, optionally restricted to one
/// charge sector `c = n − Σ μ m_μ`.
///
/// Composite states are ordered by electron state first, photon number second.
#[derive(Clone, Debug)]
pub struct CompositeBasis {
    electron: SymmetricElectronBasis,
    n_max: u32,
    charge_sector: Option<i64>,
    states: Vec<(u32, u32)>,
    ranges: Vec<PhotonRange>,
}

impl CompositeBasis {
    pub fn new(
        n_electrons: u32,
        window: LadderWindow,
        n_max: u32,
        charge_sector: Option<i64>,
    ) -> Result<Self> {
        Self::with_cap(n_electrons, window, n_max, charge_sector, DEFAULT_MAX_DIM)
    }

    pub fn with_cap(
        n_electrons: u32,
        window: LadderWindow,
        n_max: u32,
        charge_sector: Option<i64>,
        cap: usize,
    ) -> Result<Self> {
        let electron = SymmetricElectronBasis::with_cap(n_electrons, window, cap)?;
        let mut ranges = Vec::with_capacity(electron.len());
        let mut total: usize = 0;
        for e in 0..electron.len() {
            let (n_lo, count) = match charge_sector {
                None => (0, n_max + 1),
                Some(c) => {
                    let n = c + electron.ladder_sum(e);
                    if (0..=n_max as i64).contains(&n) {
                        (n as u32, 1)
                    } else {
                        (0, 0)
                    }
                }
            };
            ranges.push(PhotonRange { start: total, n_lo, count });
            total += count as usize;
            if total > cap {
                return Err(QfelError::Capacity(format!(
                    "basis for N={n_electrons}, window {window}, n_max={n_max} exceeds the cap of {cap} states"
                )));
            }
        }
        let mut states = Vec::with_capacity(total);
        for (e, r) in ranges.iter().enumerate() {
            for n in r.n_lo..r.n_lo + r.count {
                states.push((e as u32, n));
            }
        }
        Ok(Self { electron, n_max, charge_sector, states, ranges })
    }

    pub fn electron(&self) -> &SymmetricElectronBasis {
        &self.electron
    }

    pub fn window(&self) -> LadderWindow {
        self.electron.window
    }

    pub fn n_electrons(&self) -> u32 {
        self.electron.n_electrons
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn charge_sector(&self) -> Option<i64> {
        self.charge_sector
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Occupation vector of composite state `i`.
    pub fn occupations(&self, i: usize) -> &[u32] {
        self.electron.state(self.states[i].0 as usize)
    }

    /// Occupation of level `mu` in composite state `i` (0 outside the window).
    pub fn occupation(&self, i: usize, mu: i32) -> u32 {
        self.window().slot(mu).map_or(0, |s| self.occupations(i)[s])
    }

    pub fn photons(&self, i: usize) -> u32 {
        self.states[i].1
    }

    pub fn electron_index(&self, i: usize) -> usize {
        self.states[i].0 as usize
    }

    /// Conserved charge `n − Σ μ m_μ` of state `i`.
    pub fn charge(&self, i: usize) -> i64 {
        self.photons(i) as i64 - self.electron.ladder_sum(self.electron_index(i))
    }

    pub fn index_of(&self, occupations: &[u32], photons: u32) -> Option<usize> {
        let e = self.electron.index_of(occupations)?;
        self.index_of_parts(e, photons)
    }

    fn index_of_parts(&self, electron: usize, photons: u32) -> Option<usize> {
        let r = self.ranges[electron];
        (photons >= r.n_lo && photons < r.n_lo + r.count).then(|| r.start + (photons - r.n_lo) as usize)
    }

    /// Index of `|n⟩ ⊗ |all N electrons at μ = 0⟩`.
    pub fn ground_index(&self, photons: u32) -> Option<usize> {
        let mut occ = vec![0u32; self.window().len()];
        occ[self.window().slot(0).expect("window contains 0")] = self.n_electrons();
        self.index_of(&occ, photons)
    }

    /// States whose occupied levels lie at least `margin` levels from both window edges
    /// and whose photon number is at most `n_max − margin`.
    pub fn interior_indices(&self, margin: u32) -> Vec<usize> {
        let w = self.window();
        let lo = w.mu_min() + margin as i32;
        let hi = w.mu_max() - margin as i32;
        (0..self.dim())
            .filter(|&i| {
                self.photons(i) + margin <= self.n_max
                    && w.levels().zip(self.occupations(i)).all(|(mu, &m)| m == 0 || (lo..=hi).contains(&mu))
            })
            .collect()
    }

    /// True when state `i` has an electron on the first or last window level.
    pub fn touches_window_edge(&self, i: usize) -> bool {
        let occ = self.occupations(i);
        occ[0] > 0 || occ[occ.len() - 1] > 0
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }
}

/// Shorthand for [`CompositeBasis::new`].
pub fn enumerate_basis(
    n_electrons: u32,
    window: LadderWindow,
    n_max: u32,
    charge_sector: Option<i64>,
) -> Result<CompositeBasis> {
    CompositeBasis::new(n_electrons, window, n_max, charge_sector)
}

/// One elementary factor of an operator product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Factor {
    /// Photon annihilation `a`.
    Annihilate,
    /// Photon creation `a†` (zero on `n_max`).
    Create,
    /// Photon number `a†a`.
    Number,
    /// Collective jump `Υ_{to,from}`; zero if either level is outside the window.
    Jump(i32, i32),
}

impl Factor {
    pub fn adjoint(self) -> Self {
        match self {
            Factor::Annihilate => Factor::Create,
            Factor::Create => Factor::Annihilate,
            Factor::Number => Factor::Number,
            Factor::Jump(to, from) => Factor::Jump(from, to),
        }
    }
}

/// `coeff · f_1 f_2 … f_k`, written left to right as in the algebra (applied right to left).
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorString<T> {
    pub coeff: Cx<T>,
    pub factors: Vec<Factor>,
}

impl<T: Real> OperatorString<T> {
    pub fn new(coeff: T, factors: impl Into<Vec<Factor>>) -> Self {
        Self { coeff: re(coeff), factors: factors.into() }
    }

    pub fn adjoint(&self) -> Self {
        Self { coeff: self.coeff.conj(), factors: self.factors.iter().rev().map(|f| f.adjoint()).collect() }
    }
}

/// Applies a product of factors to one basis state without restricting intermediate
/// images to the charge sector. Returns the image index and amplitude.
fn apply_factors(
    basis: &CompositeBasis,
    factors: &[Factor],
    state: usize,
    occ: &mut Vec<u32>,
) -> Option<(usize, f64)> {
    let w = basis.window();
    occ.clear();
    occ.extend_from_slice(basis.occupations(state));
    let mut n = basis.photons(state);
    let mut amp = 1.0f64;
    for f in factors.iter().rev() {
        match *f {
            Factor::Annihilate => {
                if n == 0 {
                    return None;
                }
                amp *= (n as f64).sqrt();
                n -= 1;
            }
            Factor::Create => {
                if n >= basis.n_max() {
                    return None;
                }
                n += 1;
                amp *= (n as f64).sqrt();
            }
            Factor::Number => {
                if n == 0 {
                    return None;
                }
                amp *= n as f64;
            }
            Factor::Jump(to, from) => {
                let (t, s) = (w.slot(to)?, w.slot(from)?);
                let m_from = occ[s];
                if m_from == 0 {
                    return None;
                }
                if t == s {
                    amp *= m_from as f64;
                } else {
                    amp *= (m_from as f64 * (occ[t] + 1) as f64).sqrt();
                    occ[s] -= 1;
                    occ[t] += 1;
                }
            }
        }
    }
    let idx = basis.index_of(occ, n)?;
    Some((idx, amp))
}

/// Materializes `Σ strings` as a sparse matrix on `basis`.
pub fn assemble<T: Real>(basis: &CompositeBasis, strings: &[OperatorString<T>]) -> SparseOp<T> {
    let mut triplets = Vec::new();
    let mut occ = Vec::with_capacity(basis.window().len());
    for col in 0..basis.dim() {
        for s in strings {
            if let Some((row, amp)) = apply_factors(basis, &s.factors, col, &mut occ) {
                triplets.push((row, col, s.coeff * T::lit(amp)));
            }
        }
    }
    SparseOp::from_triplets(basis.dim(), triplets).expect("indices come from the basis")
}

/// Collective jump `Υ_{μν}`: moves one electron from level `ν` to level `μ`.
pub fn collective_jump<T: Real>(basis: &CompositeBasis, mu: i32, nu: i32) -> Result<SparseOp<T>> {
    let w = basis.window();
    if !w.contains(mu) || !w.contains(nu) {
        return domain(format!("jump indices ({mu}, {nu}) outside window {w}"));
    }
    Ok(assemble(basis, &[OperatorString::new(T::one(), [Factor::Jump(mu, nu)])]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhotonOp {
    Annihilate,
    Create,
    Number,
}

/// Photon ladder operators; `a†|n_max⟩ = 0` by truncation.
pub fn photon_operator<T: Real>(basis: &CompositeBasis, kind: PhotonOp) -> SparseOp<T> {
    let f = match kind {
        PhotonOp::Annihilate => Factor::Annihilate,
        PhotonOp::Create => Factor::Create,
        PhotonOp::Number => Factor::Number,
    };
    assemble(basis, &[OperatorString::new(T::one(), [f])])
}

/// Diagonal operator of the conserved charge `n − Σ μ m_μ`.
pub fn charge_operator<T: Real>(basis: &CompositeBasis) -> SparseOp<T> {
    SparseOp::diagonal((0..basis.dim()).map(|i| re(T::from_i64(basis.charge(i)))))
}

/// `Υ_z = Υ_{00} − Υ_{11}`.
pub fn inversion_operator<T: Real>(basis: &CompositeBasis) -> SparseOp<T> {
    SparseOp::diagonal((0..basis.dim()).map(|i| {
        re(T::from_i64(basis.occupation(i, 0) as i64 - basis.occupation(i, 1) as i64))
    }))
}

/// Deviation of `[a, a†]` from the identity, split into states below the cutoff and the
/// top photon row where truncation necessarily breaks the relation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationAudit<T> {
    pub max_deviation_below_cutoff: T,
    pub max_deviation_at_cutoff: T,
}

pub fn truncation_audit<T: Real>(basis: &CompositeBasis) -> TruncationAudit<T> {
    let a = photon_operator::<T>(basis, PhotonOp::Annihilate);
    let ad = photon_operator::<T>(basis, PhotonOp::Create);
    let c = crate::sparse::commutator(&a, &ad).expect("same basis");
    let d = c.sub(&SparseOp::identity(basis.dim())).expect("same basis");
    let mut below = T::zero();
    let mut top = T::zero();
    for (r, col, v) in d.entries() {
        if basis.photons(r) == basis.n_max() || basis.photons(col) == basis.n_max() {
            top = top.max(v.norm());
        } else {
            below = below.max(v.norm());
        }
    }
    TruncationAudit { max_deviation_below_cutoff: below, max_deviation_at_cutoff: top }
}
