//! Small dense complex matrices: products, exponentials, eigenvalues.

use std::ops::{Index, IndexMut};

use crate::error::{QfelError, Result};
use crate::scalar::{re, Cx, Real};

/// Square row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Cx::new(T::zero(), T::zero()); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = re(T::one());
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Cx<T>) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows<const N: usize>(rows: [[Cx<T>; N]; N]) -> Self {
        Self::from_fn(N, |i, j| rows[i][j])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[Cx<T>]) -> Vec<Cx<T>> {
        (0..self.n)
            .map(|i| (0..self.n).fold(Cx::new(T::zero(), T::zero()), |s, j| s + self[(i, j)] * x[j]))
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: Cx<T>) -> Self {
        Self { n: self.n, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> Cx<T> {
        (0..self.n).fold(Cx::new(T::zero(), T::zero()), |s, i| s + self[(i, i)])
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> T {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Matrix exponential by scaling and squaring with a Taylor core.
    pub fn expm(&self) -> Self {
        let n = self.n;
        let norm = self.norm1();
        let mut squarings = 0u32;
        let mut scaled_norm = norm;
        while scaled_norm > T::half() {
            scaled_norm = scaled_norm * T::half();
            squarings += 1;
        }
        let a = self.scale(re(T::powi(T::half(), squarings as i32)));
        let mut result = Self::identity(n);
        let mut term = Self::identity(n);
        let eps = T::epsilon();
        for k in 1..=60 {
            term = term.matmul(&a).scale(re(T::one() / T::from_usize(k)));
            result = result.add(&term);
            if term.max_abs() <= eps * result.max_abs() {
                break;
            }
        }
        for _ in 0..squarings {
            result = result.matmul(&result);
        }
        result
    }

    /// Reduces to upper Hessenberg form by Householder reflections (similarity transform).
    pub fn hessenberg(&self) -> Self {
        let n = self.n;
        let mut h = self.clone();
        if n < 3 {
            return h;
        }
        for k in 0..n - 2 {
            let alpha_norm = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<T>().sqrt();
            if alpha_norm == T::zero() {
                continue;
            }
            let x0 = h[(k + 1, k)];
            let ph = if x0.norm() == T::zero() { re(T::one()) } else { x0 / x0.norm() };
            let mut v: Vec<Cx<T>> = (k + 1..n).map(|i| h[(i, k)]).collect();
            v[0] += ph * alpha_norm;
            let vnorm2: T = v.iter().map(|z| z.norm_sqr()).sum();
            if vnorm2 == T::zero() {
                continue;
            }
            let two = T::two();
            // left: H ← (I − 2vv†/|v|²) H
            for j in 0..n {
                let mut s = Cx::new(T::zero(), T::zero());
                for (idx, i) in (k + 1..n).enumerate() {
                    s += v[idx].conj() * h[(i, j)];
                }
                let f = s * (two / vnorm2);
                for (idx, i) in (k + 1..n).enumerate() {
                    let upd = v[idx] * f;
                    h[(i, j)] -= upd;
                }
            }
            // right: H ← H (I − 2vv†/|v|²)
            for i in 0..n {
                let mut s = Cx::new(T::zero(), T::zero());
                for (idx, j) in (k + 1..n).enumerate() {
                    s += h[(i, j)] * v[idx];
                }
                let f = s * (two / vnorm2);
                for (idx, j) in (k + 1..n).enumerate() {
                    let upd = f * v[idx].conj();
                    h[(i, j)] -= upd;
                }
            }
            for i in k + 2..n {
                h[(i, k)] = Cx::new(T::zero(), T::zero());
            }
        }
        h
    }

    /// Eigenvalues by shifted QR iteration on the Hessenberg form.
    pub fn eigenvalues(&self) -> Result<Vec<Cx<T>>> {
        let mut h = self.hessenberg();
        let zero = Cx::new(T::zero(), T::zero());
        let eps = T::epsilon();
        let mut out = Vec::with_capacity(self.n);
        let mut hi = self.n;
        let mut iter = 0usize;
        let mut total = 0usize;
        while hi > 0 {
            if hi == 1 {
                out.push(h[(0, 0)]);
                break;
            }
            let mut lo = hi - 1;
            while lo > 0 {
                let scale = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
                let scale = if scale == T::zero() { T::one() } else { scale };
                if h[(lo, lo - 1)].norm() <= eps * scale {
                    h[(lo, lo - 1)] = zero;
                    break;
                }
                lo -= 1;
            }
            if lo == hi - 1 {
                out.push(h[(hi - 1, hi - 1)]);
                hi -= 1;
                iter = 0;
                continue;
            }
            iter += 1;
            total += 1;
            if total > 100 * self.n.max(1) {
                return Err(QfelError::Integration("QR eigenvalue iteration did not converge".into()));
            }
            let shift = if iter % 11 == 10 {
                h[(hi - 1, hi - 1)] + re(h[(hi - 1, hi - 2)].norm() * T::lit(0.75))
            } else {
                let a = h[(hi - 2, hi - 2)];
                let b = h[(hi - 2, hi - 1)];
                let c = h[(hi - 1, hi - 2)];
                let d = h[(hi - 1, hi - 1)];
                let half_tr = (a + d) * T::half();
                let disc = ((a - d) * (a - d) * T::lit(0.25) + b * c).sqrt();
                let m1 = half_tr + disc;
                let m2 = half_tr - disc;
                if (m1 - d).norm() < (m2 - d).norm() {
                    m1
                } else {
                    m2
                }
            };
            for i in lo..hi {
                h[(i, i)] -= shift;
            }
            let mut rots = Vec::with_capacity(hi - lo - 1);
            for k in lo..hi - 1 {
                let x = h[(k, k)];
                let y = h[(k + 1, k)];
                let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
                let (g11, g12, g21, g22) = if r == T::zero() {
                    (re(T::one()), zero, zero, re(T::one()))
                } else {
                    (x.conj() / r, y.conj() / r, -y / r, x / r)
                };
                for j in k..hi {
                    let u = h[(k, j)];
                    let w = h[(k + 1, j)];
                    h[(k, j)] = g11 * u + g12 * w;
                    h[(k + 1, j)] = g21 * u + g22 * w;
                }
                rots.push((g11, g12, g21, g22));
            }
            for (idx, k) in (lo..hi - 1).enumerate() {
                let (g11, g12, g21, g22) = rots[idx];
                for i in lo..(k + 2).min(hi) {
                    let u = h[(i, k)];
                    let w = h[(i, k + 1)];
                    h[(i, k)] = u * g11.conj() + w * g12.conj();
                    h[(i, k + 1)] = u * g21.conj() + w * g22.conj();
                }
            }
            for i in lo..hi {
                h[(i, i)] += shift;
            }
        }
        Ok(out)
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = Cx<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Cx<T> {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cx<T> {
        &mut self.data[i * self.n + j]
    }
}
