//! Matrix side of the reduction: for symmetric `A` with spectrum in
//! `[delta, 1]`, `S = sum_j w_j exp(-t_j A)` satisfies
//! `(1 - eps) A^{-1} <= S <= (1 + eps) A^{-1}` in the Loewner order.
//!
//! `S` and `A` share eigenvectors, so the matrix statement reduces to the
//! scalar one at each eigenvalue. [`sandwich_check`] verifies it that way;
//! [`apply_inverse_expsum`] computes `S v` using only exponential actions.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expsum::ExpSumQuadrature;
use crate::sum::KahanSum;

pub const MAX_DIM: usize = 512;

/// Jacobi stops once every off-diagonal entry is below this times `||A||_F`.
const JACOBI_OFF_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Taylor terms allowed per scaled step of [`expm_action`].
const MAX_TAYLOR_TERMS: usize = 10_000;

/// Relative slack on the `[delta, 1]` spectrum check, covering eigenvalues
/// that land a few ulps outside after the eigensolve.
const SPECTRUM_SLACK: f64 = 1e-12;

/// Dense symmetric matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    /// Takes `n * n` row-major entries and stores `(M + M^T)/2`.
    pub fn from_row_major(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::Capacity {
                what: "matrix dimension",
                requested: n,
                limit: MAX_DIM,
            });
        }
        if data.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                found: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Format(format!("matrix entry {bad} is not finite")));
        }
        for i in 0..n {
            for j in i + 1..n {
                let avg = 0.5 * (data[i * n + j] + data[j * n + i]);
                data[i * n + j] = avg;
                data[j * n + i] = avg;
            }
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, data)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = d;
        }
        Self::from_row_major(n, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_diagonal(&vec![1.0; n])
    }

    /// Parses whitespace-separated rows, one matrix row per non-empty line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|e| Error::Parse {
                        line: lineno + 1,
                        message: format!("{tok:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.matvec_into(v, &mut out);
        out
    }

    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        for (row, o) in self.data.chunks_exact(self.n).zip(out.iter_mut()) {
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// Plain dense product `self * other` (row-major, not symmetrized).
    pub fn matmul(&self, other: &SymmetricMatrix) -> Vec<f64> {
        matmul(self.n, &self.data, &other.data)
    }
}

pub(crate) fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * n..(k + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    out
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A symmetric matrix with its eigendecomposition `A = U diag(lambda) U^T`.
#[derive(Debug, Clone)]
pub struct SpectralMatrix {
    base: SymmetricMatrix,
    eigenvalues: Vec<f64>,
    /// Row-major `U`; column `i` is the eigenvector of `eigenvalues[i]`.
    eigenvectors: Vec<f64>,
    sweeps: usize,
}

impl SpectralMatrix {
    pub fn base(&self) -> &SymmetricMatrix {
        &self.base
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[f64] {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, i: usize) -> Vec<f64> {
        let n = self.base.n;
        (0..n).map(|r| self.eigenvectors[r * n + i]).collect()
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// `U diag(f(lambda)) U^T`.
    pub fn map_spectrum<F: Fn(f64) -> f64>(&self, f: F) -> SymmetricMatrix {
        let n = self.base.n;
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for (k, &fk) in fl.iter().enumerate() {
                    s += self.eigenvectors[i * n + k] * fk * self.eigenvectors[j * n + k];
                }
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        SymmetricMatrix { n, data }
    }

    /// `U diag(f(lambda)) U^T v` without forming the matrix.
    pub fn apply_function<F: Fn(f64) -> f64>(&self, f: F, v: &[f64]) -> Vec<f64> {
        let n = self.base.n;
        let mut out = vec![0.0; n];
        for k in 0..n {
            let coef: f64 = (0..n)
                .map(|r| self.eigenvectors[r * n + k] * v[r])
                .sum::<f64>()
                * f(self.eigenvalues[k]);
            for (r, o) in out.iter_mut().enumerate() {
                *o += coef * self.eigenvectors[r * n + k];
            }
        }
        out
    }
}

/// Cyclic Jacobi eigendecomposition.
pub fn jacobi_eigh(a: &SymmetricMatrix) -> Result<SpectralMatrix> {
    let n = a.n;
    let mut m = a.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let threshold = JACOBI_OFF_TOL * a.frobenius_norm();
    let max_off = |m: &[f64]| {
        let mut worst = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                worst = worst.max(m[p * n + q].abs());
            }
        }
        worst
    };

    let mut sweeps = 0;
    while max_off(&m) > threshold {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Convergence {
                what: "Jacobi eigensolver",
                iterations: sweeps,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let g = m[r * n + p];
                    let h = m[r * n + q];
                    let new_rp = g - s * (h + g * tau);
                    let new_rq = h + s * (g - h * tau);
                    m[r * n + p] = new_rp;
                    m[p * n + r] = new_rp;
                    m[r * n + q] = new_rq;
                    m[q * n + r] = new_rq;
                }
                for r in 0..n {
                    let g = v[r * n + p];
                    let h = v[r * n + q];
                    v[r * n + p] = g - s * (h + g * tau);
                    v[r * n + q] = h + s * (g - h * tau);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let eigenvalues = order.iter().map(|&i| m[i * n + i]).collect();
    let mut eigenvectors = vec![0.0; n * n];
    for (new, &old) in order.iter().enumerate() {
        for r in 0..n {
            eigenvectors[r * n + new] = v[r * n + old];
        }
    }
    Ok(SpectralMatrix {
        base: a.clone(),
        eigenvalues,
        eigenvectors,
        sweeps,
    })
}

/// A vector together with the number of matrix-vector products it cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Counted {
    pub vector: Vec<f64>,
    pub matvecs: usize,
}

/// `exp(-t A) v` for `A` with spectrum in `[0, 1]`, to within `tol * ||v||`.
///
/// Writes `t = 2^m tau` with `tau <= 1` and applies the truncated Taylor
/// series of `exp(-tau A)` to the running vector `2^m` times. Each series
/// stops once a term's norm drops to `tol ||v|| / 2^m`.
pub fn expm_action(a: &SymmetricMatrix, t: f64, v: &[f64], tol: f64) -> Result<Vec<f64>> {
    expm_action_counted(a, t, v, tol).map(|c| c.vector)
}

pub fn expm_action_counted(a: &SymmetricMatrix, t: f64, v: &[f64], tol: f64) -> Result<Counted> {
    if !(tol > 0.0) {
        return Err(Error::Domain {
            param: "tol",
            value: tol,
            expected: "(0, inf)",
        });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain {
            param: "t",
            value: t,
            expected: "[0, inf)",
        });
    }
    if v.len() != a.n {
        return Err(Error::Dimension {
            expected: a.n,
            found: v.len(),
        });
    }
    let vnorm = norm2(v);
    if vnorm == 0.0 || t == 0.0 {
        return Ok(Counted {
            vector: v.to_vec(),
            matvecs: 0,
        });
    }
    let mut steps: u64 = 1;
    while (steps as f64) < t {
        steps *= 2;
    }
    let tau = t / steps as f64;
    let threshold = tol * vnorm / steps as f64;

    let mut x = v.to_vec();
    let mut term = vec![0.0; a.n];
    let mut next = vec![0.0; a.n];
    let mut matvecs = 0;
    for _ in 0..steps {
        term.copy_from_slice(&x);
        let mut k = 1;
        loop {
            if k > MAX_TAYLOR_TERMS {
                return Err(Error::Convergence {
                    what: "Taylor series of exp(-tau A) v",
                    iterations: MAX_TAYLOR_TERMS,
                });
            }
            a.matvec_into(&term, &mut next);
            matvecs += 1;
            let scale = -tau / k as f64;
            for (tv, nv) in term.iter_mut().zip(&next) {
                *tv = scale * nv;
            }
            for (xv, tv) in x.iter_mut().zip(&term) {
                *xv += tv;
            }
            if norm2(&term) <= threshold {
                break;
            }
            k += 1;
        }
    }
    Ok(Counted { vector: x, matvecs })
}

/// `eps / (10 sum_j w_j)`, which keeps the summed action error an order of
/// magnitude below the approximation budget.
pub fn default_per_term_tol(quad: &ExpSumQuadrature) -> f64 {
    quad.params().eps / (10.0 * quad.weight_sum())
}

/// `sum_j w_j exp(-t_j A) v`, an approximation of `A^{-1} v`.
pub fn apply_inverse_expsum(
    a: &SymmetricMatrix,
    quad: &ExpSumQuadrature,
    v: &[f64],
    per_term_tol: f64,
) -> Result<Vec<f64>> {
    apply_inverse_expsum_with(a, quad, v, per_term_tol, |_: &mut [f64]| {}).map(|c| c.vector)
}

/// As [`apply_inverse_expsum`], running `project` on every action's output.
///
/// Terms are computed in parallel and summed in ascending `j`, so the result
/// does not depend on the number of worker threads.
pub fn apply_inverse_expsum_with<P>(
    a: &SymmetricMatrix,
    quad: &ExpSumQuadrature,
    v: &[f64],
    per_term_tol: f64,
    project: P,
) -> Result<Counted>
where
    P: Fn(&mut [f64]) + Sync,
{
    if v.len() != a.n {
        return Err(Error::Dimension {
            expected: a.n,
            found: v.len(),
        });
    }
    let terms: Vec<(i64, f64, f64)> = quad.terms().collect();
    let actions: Vec<Counted> = terms
        .par_iter()
        .map(|&(j, t, _)| {
            let mut c = expm_action_counted(a, t, v, per_term_tol).map_err(|e| Error::Term {
                index: j,
                source: Box::new(e),
            })?;
            project(&mut c.vector);
            Ok(c)
        })
        .collect::<Result<_>>()?;

    let mut acc = vec![KahanSum::new(); a.n];
    let mut matvecs = 0;
    for (&(_, _, w), action) in terms.iter().zip(&actions) {
        matvecs += action.matvecs;
        for (s, &x) in acc.iter_mut().zip(&action.vector) {
            s.add(w * x);
        }
    }
    Ok(Counted {
        vector: acc.iter().map(KahanSum::total).collect(),
        matvecs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub eps: f64,
    /// `lambda_i S(lambda_i)` for each eigenvalue, ascending in `lambda`.
    pub per_eigenvalue_ratios: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

impl SandwichReport {
    /// `max_i |ratio_i - 1|`.
    pub fn max_deviation(&self) -> f64 {
        (self.max_ratio - 1.0).max(1.0 - self.min_ratio)
    }
}

/// Checks `(1 - eps) A^{-1} <= S <= (1 + eps) A^{-1}` eigenvalue by eigenvalue.
pub fn sandwich_check(a: &SymmetricMatrix, quad: &ExpSumQuadrature) -> Result<SandwichReport> {
    sandwich_from_spectrum(&jacobi_eigh(a)?, quad)
}

pub fn sandwich_from_spectrum(
    spectral: &SpectralMatrix,
    quad: &ExpSumQuadrature,
) -> Result<SandwichReport> {
    let p = quad.params();
    let (lo, hi) = (p.delta, 1.0);
    for &l in spectral.eigenvalues() {
        if l < lo * (1.0 - SPECTRUM_SLACK) || l > hi * (1.0 + SPECTRUM_SLACK) {
            return Err(Error::SpectrumOutOfRange {
                eigenvalue: l,
                lo,
                hi,
            });
        }
    }
    let ratios: Vec<f64> = spectral
        .eigenvalues()
        .iter()
        .map(|&l| l * quad.eval_unchecked(l))
        .collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SandwichReport {
        eps: p.eps,
        pass: min_ratio >= 1.0 - p.eps && max_ratio <= 1.0 + p.eps,
        per_eigenvalue_ratios: ratios,
        min_ratio,
        max_ratio,
    })
}

/// `S = sum_j w_j U diag(exp(-t_j lambda)) U^T`, assembled densely.
pub fn assemble_expsum(spectral: &SpectralMatrix, quad: &ExpSumQuadrature) -> SymmetricMatrix {
    spectral.map_spectrum(|l| quad.eval_unchecked(l))
}

/// A random orthogonal matrix (row-major) from Householder QR of a matrix
/// with entries uniform in `[-1, 1]`.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // Q accumulates the reflectors, starting from the identity.
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    for k in 0..n.saturating_sub(1) {
        let col: Vec<f64> = (k..n).map(|r| a[r * n + k]).collect();
        let alpha = -col[0].signum() * norm2(&col);
        let mut hv = col;
        hv[0] -= alpha;
        let hn = norm2(&hv);
        if hn == 0.0 {
            continue;
        }
        for x in hv.iter_mut() {
            *x /= hn;
        }
        // a <- (I - 2 v v^T) a on rows k..n
        for c in 0..n {
            let dot: f64 = (k..n).map(|r| hv[r - k] * a[r * n + c]).sum();
            for r in k..n {
                a[r * n + c] -= 2.0 * hv[r - k] * dot;
            }
        }
        // q <- q (I - 2 v v^T) on columns k..n
        for r in 0..n {
            let dot: f64 = (k..n).map(|c| q[r * n + c] * hv[c - k]).sum();
            for c in k..n {
                q[r * n + c] -= 2.0 * dot * hv[c - k];
            }
        }
    }
    q
}

/// `Q diag(eigenvalues) Q^T` for a random orthogonal `Q`.
pub fn random_with_spectrum<R: Rng + ?Sized>(
    eigenvalues: &[f64],
    rng: &mut R,
) -> Result<SymmetricMatrix> {
    let n = eigenvalues.len();
    let q = random_orthogonal(n, rng);
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..n)
                .map(|k| q[i * n + k] * eigenvalues[k] * q[j * n + k])
                .sum();
            data[i * n + j] = s;
            data[j * n + i] = s;
        }
    }
    SymmetricMatrix::from_row_major(n, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expsum::{build_quadrature, select_params};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn orthonormality_error(s: &SpectralMatrix) -> f64 {
        let n = s.base().n();
        let u = s.eigenvectors();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n).map(|r| u[r * n + i] * u[r * n + j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    #[test]
    fn construction_symmetrizes_and_validates() {
        let m = SymmetricMatrix::from_rows(&[vec![1.0, 2.0], vec![4.0, 3.0]]).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
        assert!(SymmetricMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
        assert!(SymmetricMatrix::from_row_major(MAX_DIM + 1, vec![]).is_err());
        assert!(SymmetricMatrix::parse("1 2\n2 x\n").is_err());
        let p = SymmetricMatrix::parse("# comment\n2 1\n\n1 2\n").unwrap();
        assert_eq!(p.n(), 2);
    }

    #[test]
    fn jacobi_identity_and_diagonal() {
        let s = jacobi_eigh(&SymmetricMatrix::identity(3).unwrap()).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 1.0, 1.0]);
        assert!(orthonormality_error(&s) <= 1e-12);

        let s = jacobi_eigh(&SymmetricMatrix::from_diagonal(&[0.9, 0.2]).unwrap()).unwrap();
        assert_eq!(s.eigenvalues(), &[0.2, 0.9]);
        assert_eq!(s.eigenvector(0)[1].abs(), 1.0);
        assert_eq!(s.eigenvector(1)[0].abs(), 1.0);
    }

    #[test]
    fn jacobi_recovers_planted_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut d: Vec<f64> = (0..24).map(|_| rng.gen_range(-2.0..3.0)).collect();
        let a = random_with_spectrum(&d, &mut rng).unwrap();
        let s = jacobi_eigh(&a).unwrap();
        d.sort_by(f64::total_cmp);
        for (got, want) in s.eigenvalues().iter().zip(&d) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!(orthonormality_error(&s) <= 1e-12);
        let fro = a.frobenius_norm();
        for i in 0..a.n() {
            let u = s.eigenvector(i);
            let au = a.matvec(&u);
            let r: Vec<f64> = au
                .iter()
                .zip(&u)
                .map(|(x, y)| x - s.eigenvalues()[i] * y)
                .collect();
            assert!(norm2(&r) <= 1e-10 * fro);
        }
    }

    #[test]
    fn expm_examples() {
        let zero = SymmetricMatrix::from_diagonal(&[0.0, 0.0]).unwrap();
        let v = vec![0.3, -1.7];
        assert_eq!(expm_action(&zero, 12.5, &v, 1e-12).unwrap(), v);

        let one = SymmetricMatrix::from_diagonal(&[1.0]).unwrap();
        let r = expm_action(&one, 1.0, &[1.0], 1e-14).unwrap();
        assert!((r[0] - (-1f64).exp()).abs() < 1e-14);

        assert!(expm_action(&one, 1.0, &[1.0], 0.0).is_err());
        assert!(expm_action(&one, 1.0, &[1.0, 2.0], 1e-8).is_err());
    }

    #[test]
    fn expm_matches_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0..1.0)).collect();
        let a = random_with_spectrum(&d, &mut rng).unwrap();
        let s = jacobi_eigh(&a).unwrap();
        let v: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let tol = 1e-10;
        let got = expm_action(&a, 7.3, &v, tol).unwrap();
        let want = s.apply_function(|l| (-7.3 * l).exp(), &v);
        let err: Vec<f64> = got.iter().zip(&want).map(|(x, y)| x - y).collect();
        assert!(norm2(&err) <= 10.0 * tol * norm2(&v));
    }

    #[test]
    fn apply_inverse_examples() {
        let q = build_quadrature(select_params(0.1, 0.01).unwrap());
        let tol = default_per_term_tol(&q);

        let id = SymmetricMatrix::identity(3).unwrap();
        let v = vec![1.0, -2.0, 0.5];
        let r = apply_inverse_expsum(&id, &q, &v, tol).unwrap();
        for (x, y) in r.iter().zip(&v) {
            assert!((x - y).abs() <= 0.11 * y.abs());
        }

        let a = SymmetricMatrix::from_diagonal(&[0.5, 1.0]).unwrap();
        let r = apply_inverse_expsum(&a, &q, &[1.0, 1.0], tol).unwrap();
        assert!((r[0] - 2.0).abs() <= 0.1 * 2.0);
        assert!((r[1] - 1.0).abs() <= 0.1);
        // Agrees with the scalar sum at each eigenvalue.
        assert!((r[0] - q.eval(0.5).unwrap()).abs() <= tol * q.weight_sum() * 2f64.sqrt());

        let r = apply_inverse_expsum(&a, &q, &[0.0, 0.0], tol).unwrap();
        assert_eq!(r, vec![0.0, 0.0]);
    }

    #[test]
    fn sandwich_examples() {
        let q = build_quadrature(select_params(0.1, 0.01).unwrap());
        let a = SymmetricMatrix::from_diagonal(&[0.01, 1.0]).unwrap();
        let r = sandwich_check(&a, &q).unwrap();
        assert!(r.pass);
        assert_eq!(r.per_eigenvalue_ratios.len(), 2);

        let bad = SymmetricMatrix::from_diagonal(&[0.005, 1.0]).unwrap();
        let err = sandwich_check(&bad, &q).unwrap_err();
        assert!(matches!(err, Error::SpectrumOutOfRange { eigenvalue, .. } if eigenvalue == 0.005));
    }
}
