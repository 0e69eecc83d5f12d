//! Graph-Laplacian solves carried out with heat-kernel actions only.
//!
//! For a connected graph with degree matrix `D` and weights `W`, the matrix
//! `A = (I - D^{-1/2} W D^{-1/2}) / 2` has spectrum in `[0, 1]` and a simple
//! kernel spanned by `D^{1/2} 1`. Since `L = D - W = 2 D^{1/2} A D^{1/2}`,
//! a solution of `L x = b` (for `b` orthogonal to `1`) is
//! `x = D^{-1/2} A^+ D^{-1/2} b / 2`, with `A^+` applied through the
//! exponential sum on `A`'s range. `delta` is taken from an oracle
//! eigendecomposition of `A`.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expsum::{build_quadrature, select_params};
use crate::matfun::{
    apply_inverse_expsum_with, default_per_term_tol, jacobi_eigh, norm2, SymmetricMatrix, MAX_DIM,
};

const KERNEL_RHS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Path(usize),
    Cycle(usize),
    Grid(usize, usize),
}

impl Graph {
    /// Validates and builds a graph from undirected weighted edges.
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::Capacity {
                what: "vertex count",
                requested: n,
                limit: MAX_DIM,
            });
        }
        let mut seen = BTreeSet::new();
        for (i, &(u, v, w)) in edges.iter().enumerate() {
            let line = i + 1;
            if u >= n || v >= n {
                return Err(Error::Parse {
                    line,
                    message: format!("edge ({u}, {v}) references a vertex >= {n}"),
                });
            }
            if u == v {
                return Err(Error::Parse {
                    line,
                    message: format!("self-loop at vertex {u}"),
                });
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Parse {
                    line,
                    message: format!("edge weight {w} must be positive"),
                });
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate edge ({u}, {v})"),
                });
            }
        }
        let g = Self { n, edges };
        let components = g.components();
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(g)
    }

    pub fn generate(kind: GraphKind) -> Result<Self> {
        let (n, edges) = match kind {
            GraphKind::Path(n) => {
                check_size(n, 2)?;
                (n, (0..n - 1).map(|i| (i, i + 1, 1.0)).collect())
            }
            GraphKind::Cycle(n) => {
                check_size(n, 3)?;
                (n, (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect())
            }
            GraphKind::Grid(rows, cols) => {
                check_size(rows * cols, 2)?;
                let mut edges = Vec::new();
                for r in 0..rows {
                    for c in 0..cols {
                        let v = r * cols + c;
                        if c + 1 < cols {
                            edges.push((v, v + 1, 1.0));
                        }
                        if r + 1 < rows {
                            edges.push((v, v + cols, 1.0));
                        }
                    }
                }
                (rows * cols, edges)
            }
        };
        Self::new(n, edges)
    }

    /// Parses `u v [w]` lines (0-indexed; `#` comments and blank lines skipped).
    pub fn parse_edgelist(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut lines = Vec::new();
        let mut n = 0;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 2 || toks.len() > 3 {
                return Err(bad(format!("expected `u v [w]`, got {line:?}")));
            }
            let u: usize = toks[0]
                .parse()
                .map_err(|e| bad(format!("vertex {:?}: {e}", toks[0])))?;
            let v: usize = toks[1]
                .parse()
                .map_err(|e| bad(format!("vertex {:?}: {e}", toks[1])))?;
            let w: f64 = match toks.get(2) {
                Some(t) => t.parse().map_err(|e| bad(format!("weight {t:?}: {e}")))?,
                None => 1.0,
            };
            n = n.max(u + 1).max(v + 1);
            edges.push((u, v, w));
            lines.push(lineno + 1);
        }
        // Re-map edge-position errors onto file line numbers.
        Self::new(n, edges).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line: lines[line - 1],
                message,
            },
            other => other,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for &(u, v, w) in &self.edges {
            d[u] += w;
            d[v] += w;
        }
        d
    }

    fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut count = self.n;
        for &(u, v, _) in &self.edges {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru != rv {
                parent[ru] = rv;
                count -= 1;
            }
        }
        count
    }

    /// `L = D - W`.
    pub fn laplacian(&self) -> SymmetricMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for &(u, v, w) in &self.edges {
            data[u * n + u] += w;
            data[v * n + v] += w;
            data[u * n + v] -= w;
            data[v * n + u] -= w;
        }
        SymmetricMatrix::from_row_major(n, data).expect("graph size already validated")
    }
}

fn check_size(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::Domain {
            param: "graph size",
            value: n as f64,
            expected: "large enough for the generator",
        })
    } else {
        Ok(())
    }
}

/// `(I - D^{-1/2} W D^{-1/2}) / 2`.
pub fn normalized_laplacian_scaled(g: &Graph) -> Result<SymmetricMatrix> {
    let d = g.degrees();
    if let Some(vertex) = d.iter().position(|&x| x <= 0.0) {
        return Err(Error::ZeroDegree { vertex });
    }
    let n = g.n;
    let inv_sqrt: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] = 0.5;
    }
    for &(u, v, w) in &g.edges {
        let off = -0.5 * w * inv_sqrt[u] * inv_sqrt[v];
        data[u * n + v] += off;
        data[v * n + u] += off;
    }
    SymmetricMatrix::from_row_major(n, data)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub eps: f64,
    pub delta_used: f64,
    #[serde(rename = "K")]
    pub k: usize,
    /// Taylor matrix-vector products summed over all exponential actions.
    pub matvec_count: usize,
    pub rel_error_vs_direct: f64,
    /// `||L x - b_proj|| / ||b_proj||`.
    pub residual_norm: f64,
}

fn project_out(v: &mut [f64], unit: &[f64]) {
    let dot: f64 = v.iter().zip(unit).map(|(a, b)| a * b).sum();
    for (x, u) in v.iter_mut().zip(unit) {
        *x -= dot * u;
    }
}

/// Minimum-norm solution of `L x = b` on `Im(L)`.
pub fn solve_laplacian(g: &Graph, b: &[f64], eps: f64) -> Result<(Vec<f64>, SolveReport)> {
    let n = g.n;
    if b.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: b.len(),
        });
    }
    let a = normalized_laplacian_scaled(g)?;
    let degrees = g.degrees();
    let sqrt_d: Vec<f64> = degrees.iter().map(|d| d.sqrt()).collect();

    let ones: Vec<f64> = vec![1.0 / (n as f64).sqrt(); n];
    let mut b_proj = b.to_vec();
    project_out(&mut b_proj, &ones);
    // Whatever survives projection of a kernel vector is rounding noise.
    if norm2(&b_proj) <= KERNEL_RHS_TOL * norm2(b) {
        b_proj.iter_mut().for_each(|v| *v = 0.0);
    }

    let kernel = {
        let norm = norm2(&sqrt_d);
        sqrt_d.iter().map(|x| x / norm).collect::<Vec<f64>>()
    };
    let mut rhs: Vec<f64> = b_proj.iter().zip(&sqrt_d).map(|(x, s)| x / s).collect();
    project_out(&mut rhs, &kernel);

    let spectral = jacobi_eigh(&a)?;
    let delta = spectral.eigenvalues()[1].min(1.0);
    if !(delta > 0.0) {
        return Err(Error::SpectrumOutOfRange {
            eigenvalue: delta,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let quad = build_quadrature(select_params(eps, delta)?);
    let tol = default_per_term_tol(&quad);
    let applied = apply_inverse_expsum_with(&a, &quad, &rhs, tol, |v: &mut [f64]| {
        project_out(v, &kernel)
    })?;

    let mut x: Vec<f64> = applied
        .vector
        .iter()
        .zip(&sqrt_d)
        .map(|(y, s)| 0.5 * y / s)
        .collect();
    project_out(&mut x, &ones);

    let lap = g.laplacian();
    let oracle = pseudoinverse_solve(&lap, &b_proj)?;
    let b_norm = norm2(&b_proj);
    let (rel_error_vs_direct, residual_norm) = if b_norm == 0.0 {
        (0.0, 0.0)
    } else {
        let diff: Vec<f64> = x.iter().zip(&oracle).map(|(p, q)| p - q).collect();
        let lx = lap.matvec(&x);
        let res: Vec<f64> = lx.iter().zip(&b_proj).map(|(p, q)| p - q).collect();
        (norm2(&diff) / norm2(&oracle), norm2(&res) / b_norm)
    };
    let report = SolveReport {
        eps,
        delta_used: delta,
        k: quad.len(),
        matvec_count: applied.matvecs,
        rel_error_vs_direct,
        residual_norm,
    };
    Ok((x, report))
}

/// `L^+ b` from a dense eigendecomposition, dropping eigenvalues below
/// `1e-10 ||L||_F`.
pub fn pseudoinverse_solve(l: &SymmetricMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let spectral = jacobi_eigh(l)?;
    let cutoff = 1e-10 * l.frobenius_norm();
    Ok(spectral.apply_function(|lam| if lam > cutoff { 1.0 / lam } else { 0.0 }, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators() {
        let p = Graph::generate(GraphKind::Path(3)).unwrap();
        assert_eq!(p.edges(), &[(0, 1, 1.0), (1, 2, 1.0)]);
        let c = Graph::generate(GraphKind::Cycle(4)).unwrap();
        assert_eq!(c.edges().len(), 4);
        assert!(c.degrees().iter().all(|&d| d == 2.0));
        let g = Graph::generate(GraphKind::Grid(3, 4)).unwrap();
        assert_eq!(g.n(), 12);
        assert_eq!(g.edges().len(), 3 * 3 + 2 * 4);
        assert!(Graph::generate(GraphKind::Path(1)).is_err());
    }

    #[test]
    fn edgelist_parsing() {
        let g = Graph::parse_edgelist("0 1\n1 2 2.5\n# tail\n").unwrap();
        assert_eq!(g.edges(), &[(0, 1, 1.0), (1, 2, 2.5)]);

        let err = Graph::parse_edgelist("0 1\n\n1 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = Graph::parse_edgelist("0 1\n1 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = Graph::parse_edgelist("0 1\n2 3\n").unwrap_err();
        assert!(matches!(err, Error::Disconnected { components: 2 }));
        assert!(Graph::parse_edgelist("0 0\n").is_err());
    }

    #[test]
    fn scaled_normalized_spectra() {
        let a =
            normalized_laplacian_scaled(&Graph::generate(GraphKind::Cycle(4)).unwrap()).unwrap();
        let ev = jacobi_eigh(&a).unwrap();
        let want = [0.0, 0.5, 0.5, 1.0];
        for (g, w) in ev.eigenvalues().iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
        let a = normalized_laplacian_scaled(&Graph::generate(GraphKind::Path(2)).unwrap()).unwrap();
        let ev = jacobi_eigh(&a).unwrap();
        assert!(ev.eigenvalues()[0].abs() < 1e-15);
        assert!((ev.eigenvalues()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pure_kernel_rhs_gives_zero() {
        let g = Graph::generate(GraphKind::Cycle(6)).unwrap();
        let (x, report) = solve_laplacian(&g, &[1.0; 6], 0.1).unwrap();
        assert!(norm2(&x) < 1e-12);
        assert_eq!(report.rel_error_vs_direct, 0.0);
    }

    #[test]
    fn small_path_solve() {
        let g = Graph::generate(GraphKind::Path(6)).unwrap();
        let mut b = vec![0.0; 6];
        b[0] = 1.0;
        b[5] = -1.0;
        let (x, report) = solve_laplacian(&g, &b, 0.1).unwrap();
        assert!(report.rel_error_vs_direct <= 0.12, "{report:?}");
        // Current flow on a unit path: potential drops by 1 per edge.
        for w in x.windows(2) {
            assert!((w[0] - w[1] - 1.0).abs() < 0.12);
        }
    }
}
