//! Sparse exponential sums approximating `1/x` on `[delta, 1]`.
//!
//! Substituting `t = e^s` in `1/x = int_0^inf e^{-xt} dt` gives
//! `1/x = int f_x(s) ds` with `f_x(s) = exp(-x e^s + s)`. Sampling that
//! integrand with the trapezoidal rule at spacing `h` and keeping the indices
//! `A..=B` yields
//!
//! ```text
//! 1/x ~ sum_{j=A}^{B} w_j exp(-t_j x),   t_j = e^{jh},  w_j = h e^{jh}.
//! ```
//!
//! The parameters are
//!
//! ```text
//! N = ceil(ln(24/eps) / 2)
//! h = 2 pi / (e^2 (2N + 1)^2)
//! A = floor(-ln(3/eps) / h) - 1
//! B = ceil(ln(ln(3/eps) / delta) / h) + 1
//! ```
//!
//! where the trailing `-1` / `+1` widen the window by one step on each side.
//! The infinite trapezoid sum is within `eps/3` relative error for every
//! `x > 0`, and each dropped tail costs at most another `eps/3` on `[delta, 1]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::em::fx_unchecked;
use crate::error::{Error, Result};
use crate::sum::KahanSum;

/// Slack allowed by [`infinite_sum_error_probe`] on top of `eps/3`.
pub const PROBE_SLACK: f64 = 2e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpSumParams {
    pub eps: f64,
    pub delta: f64,
    /// Euler-Maclaurin order `N` that fixes the step.
    pub order: u32,
    pub h: f64,
    /// First kept index `A` (after widening).
    pub lower: i64,
    /// Last kept index `B` (after widening).
    pub upper: i64,
    /// `floor(-ln(3/eps)/h)`, before widening.
    pub lower_cut: i64,
    /// `ceil(ln(ln(3/eps)/delta)/h)`, before widening.
    pub upper_cut: i64,
}

fn check_unit(param: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            param,
            value: v,
            expected: "(0, 1]",
        })
    }
}

/// `N` and `h` for a target accuracy, in double-double precision.
fn order_and_step(eps: f64) -> (u32, TwoFloat) {
    let n = (TwoFloat::from(24.0) / TwoFloat::from(eps)).ln() * 0.5;
    let order = f64::from(n.ceil()) as u32;
    let e = TwoFloat::from(1.0).exp();
    let m = (2 * order + 1) as f64;
    let h = twofloat::consts::PI * 2.0 / (e * e * TwoFloat::from(m * m));
    (order, h)
}

/// Integer value of an already-rounded double-double.
fn to_index(v: TwoFloat) -> i64 {
    (v.hi() as i64) + (v.lo().round() as i64)
}

impl ExpSumParams {
    pub fn select(eps: f64, delta: f64) -> Result<Self> {
        check_unit("eps", eps)?;
        check_unit("delta", delta)?;
        let (order, h) = order_and_step(eps);
        let log3 = (TwoFloat::from(3.0) / TwoFloat::from(eps)).ln();
        let lower_cut = to_index((-log3 / h).floor());
        let upper_cut = to_index(((log3 / TwoFloat::from(delta)).ln() / h).ceil());
        Ok(Self {
            eps,
            delta,
            order,
            h: h.into(),
            lower: lower_cut - 1,
            upper: upper_cut + 1,
            lower_cut,
            upper_cut,
        })
    }

    /// Number of exponential terms `B - A + 1`.
    pub fn count(&self) -> usize {
        (self.upper - self.lower + 1) as usize
    }

    /// `eps/3`, the node the lower tail must reach.
    pub fn lower_target(&self) -> f64 {
        self.eps / 3.0
    }

    /// `(1/delta) ln(3/eps)`, the node the upper tail must reach.
    pub fn upper_target(&self) -> f64 {
        (3.0 / self.eps).ln() / self.delta
    }

    /// `(e^4 / 2 pi) * 1.1 * ln(24/eps)^2 * ln(3/(eps delta)) + 4`.
    pub fn sparsity_bound(&self) -> f64 {
        let c = std::f64::consts::E.powi(4) / (2.0 * std::f64::consts::PI) * 1.1;
        let l = (24.0 / self.eps).ln();
        c * l * l * (3.0 / (self.eps * self.delta)).ln() + 4.0
    }
}

pub fn select_params(eps: f64, delta: f64) -> Result<ExpSumParams> {
    ExpSumParams::select(eps, delta)
}

/// Nodes `t_j` and weights `w_j` for `j = A..=B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpSumQuadrature {
    params: ExpSumParams,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ExpSumQuadrature {
    pub fn build(params: ExpSumParams) -> Self {
        let (nodes, weights) = (params.lower..=params.upper)
            .map(|j| {
                let t = (j as f64 * params.h).exp();
                (t, params.h * t)
            })
            .unzip();
        Self {
            params,
            nodes,
            weights,
        }
    }

    /// Assembles a quadrature from explicit terms, checking positivity and
    /// strictly increasing nodes. The node count may differ from the params.
    pub fn from_parts(params: ExpSumParams, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::Dimension {
                expected: nodes.len(),
                found: weights.len(),
            });
        }
        if nodes.is_empty() {
            return Err(Error::Format("quadrature has no terms".into()));
        }
        for (i, (&t, &w)) in nodes.iter().zip(&weights).enumerate() {
            if !(t > 0.0 && t.is_finite() && w > 0.0 && w.is_finite()) {
                return Err(Error::Format(format!(
                    "term {i} has non-positive node or weight ({t}, {w})"
                )));
            }
            if i > 0 && nodes[i - 1] >= t {
                return Err(Error::Format(format!("nodes not increasing at term {i}")));
            }
        }
        Ok(Self {
            params,
            nodes,
            weights,
        })
    }

    pub fn params(&self) -> &ExpSumParams {
        &self.params
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(j, t_j, w_j)` in ascending `j`.
    pub fn terms(&self) -> impl Iterator<Item = (i64, f64, f64)> + '_ {
        let lower = self.params.lower;
        self.nodes
            .iter()
            .zip(&self.weights)
            .enumerate()
            .map(move |(i, (&t, &w))| (lower + i as i64, t, w))
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().copied().collect::<KahanSum>().total()
    }

    /// `sum_j w_j exp(-t_j x)`; defined for all `x > 0`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) || x.is_nan() {
            return Err(Error::Domain {
                param: "x",
                value: x,
                expected: "(0, inf)",
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * (-t * x).exp())
            .collect::<KahanSum>()
            .total()
    }

    pub fn to_file(&self) -> QuadratureFile {
        QuadratureFile {
            eps: self.params.eps,
            delta: self.params.delta,
            order: self.params.order,
            h: self.params.h,
            lower: self.params.lower,
            upper: self.params.upper,
            count: self.len(),
            terms: self.terms().map(|(j, t, w)| Term { j, t, w }).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("quadrature serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: QuadratureFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        file.into_quadrature()
    }

    /// CSV with header `j,t,w`; floats use shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,t,w\n");
        for (j, t, w) in self.terms() {
            out.push_str(&format!("{j},{t:?},{w:?}\n"));
        }
        out
    }
}

pub fn build_quadrature(params: ExpSumParams) -> ExpSumQuadrature {
    ExpSumQuadrature::build(params)
}

pub fn eval_expsum(quad: &ExpSumQuadrature, x: f64) -> Result<f64> {
    quad.eval(x)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Term {
    pub j: i64,
    pub t: f64,
    pub w: f64,
}

/// On-disk form of a quadrature, as written by `gen --format json`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuadratureFile {
    pub eps: f64,
    pub delta: f64,
    #[serde(rename = "N")]
    pub order: u32,
    pub h: f64,
    #[serde(rename = "A")]
    pub lower: i64,
    #[serde(rename = "B")]
    pub upper: i64,
    #[serde(rename = "K")]
    pub count: usize,
    pub terms: Vec<Term>,
}

impl QuadratureFile {
    pub fn into_quadrature(self) -> Result<ExpSumQuadrature> {
        check_unit("eps", self.eps)?;
        check_unit("delta", self.delta)?;
        if self.terms.len() != self.count {
            return Err(Error::Format(format!(
                "K = {} but {} terms listed",
                self.count,
                self.terms.len()
            )));
        }
        for (i, term) in self.terms.iter().enumerate() {
            if term.j != self.lower + i as i64 {
                return Err(Error::Format(format!(
                    "term {i} has index {} (expected {})",
                    term.j,
                    self.lower + i as i64
                )));
            }
        }
        let params = ExpSumParams {
            eps: self.eps,
            delta: self.delta,
            order: self.order,
            h: self.h,
            lower: self.lower,
            upper: self.upper,
            lower_cut: self.lower + 1,
            upper_cut: self.upper - 1,
        };
        let (nodes, weights) = self.terms.into_iter().map(|t| (t.t, t.w)).unzip();
        ExpSumQuadrature::from_parts(params, nodes, weights)
    }
}

/// Result of grid-checking `|x S(x) - 1| <= eps` on `[delta, 1]`.
///
/// The grid is a smoke test of the guarantee, not a proof: it samples
/// `grid_size` log-uniform points including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorCertificate {
    pub eps: f64,
    pub delta: f64,
    pub grid_size: usize,
    pub max_rel_error: f64,
    pub argmax_x: f64,
    pub pass: bool,
}

/// The `i`-th of `n` log-uniform points on `[lo, 1]`, endpoints exact.
fn log_grid_point(lo: f64, i: usize, n: usize) -> f64 {
    if i == 0 {
        lo
    } else if i + 1 == n {
        1.0
    } else {
        (lo.ln() * (1.0 - i as f64 / (n - 1) as f64)).exp()
    }
}

pub fn certify(quad: &ExpSumQuadrature, grid_size: usize) -> Result<ErrorCertificate> {
    if grid_size < 2 {
        return Err(Error::Domain {
            param: "grid",
            value: grid_size as f64,
            expected: ">= 2",
        });
    }
    let delta = quad.params.delta;
    // Ties go to the smaller index so the result does not depend on how the
    // grid is split between workers.
    let (max_rel_error, idx) = (0..grid_size)
        .into_par_iter()
        .map(|i| {
            let x = log_grid_point(delta, i, grid_size);
            ((x * quad.eval_unchecked(x) - 1.0).abs(), i)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(ErrorCertificate {
        eps: quad.params.eps,
        delta,
        grid_size,
        max_rel_error,
        argmax_x: log_grid_point(delta, idx, grid_size),
        pass: max_rel_error <= quad.params.eps,
    })
}

/// `|x h sum_j f_x(jh) - 1|` for the (numerically) infinite trapezoid sum.
///
/// The index window is wide enough that each dropped tail, bounded by its
/// closed-form integral, is below `eps * 1e-3 / x`.
pub fn infinite_sum_error_probe(eps: f64, x: f64) -> Result<f64> {
    check_unit("eps", eps)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain {
            param: "x",
            value: x,
            expected: "(0, inf)",
        });
    }
    let (_, h) = order_and_step(eps);
    let h: f64 = h.into();
    let budget = eps * 1e-3;
    // Lower tail <= e^{Ah} and upper tail <= e^{-x e^{Bh}} / x.
    let lower = (((budget / x).ln()) / h).floor() as i64 - 1;
    let upper = (((1.0 / budget).ln() / x).ln() / h).ceil() as i64 + 1;
    let sum: KahanSum = (lower..=upper)
        .map(|j| h * fx_unchecked(x, j as f64 * h))
        .collect();
    Ok((x * sum.total() - 1.0).abs())
}

/// Closed-form majorants `(x^{-1}(1 - e^{-x t_A}), x^{-1} e^{-x t_B})` of the
/// sums dropped below `A` and above `B`.
pub fn tail_bounds(params: &ExpSumParams, x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) {
        return Err(Error::Domain {
            param: "x",
            value: x,
            expected: "(0, inf)",
        });
    }
    let t_lo = (params.lower as f64 * params.h).exp();
    let t_hi = (params.upper as f64 * params.h).exp();
    Ok((-(-x * t_lo).exp_m1() / x, (-x * t_hi).exp() / x))
}

/// The dropped tails `h sum_{j<A} f_x(jh)` and `h sum_{j>B} f_x(jh)`,
/// summed until further terms are negligible.
pub fn empirical_tails(params: &ExpSumParams, x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) {
        return Err(Error::Domain {
            param: "x",
            value: x,
            expected: "(0, inf)",
        });
    }
    let h = params.h;
    let mut lower = KahanSum::new();
    let mut j = params.lower - 1;
    loop {
        let term = h * fx_unchecked(x, j as f64 * h);
        lower.add(term);
        // Below the peak the terms shrink geometrically by e^{-h}.
        if (j as f64) * h < -x.ln() && term <= 1e-20 * lower.total().max(f64::MIN_POSITIVE) {
            break;
        }
        if term == 0.0 && (j as f64) * h < -x.ln() {
            break;
        }
        j -= 1;
    }
    let mut upper = KahanSum::new();
    let mut j = params.upper + 1;
    loop {
        let s = j as f64 * h;
        let term = h * fx_unchecked(x, s);
        upper.add(term);
        if s > -x.ln() && (term == 0.0 || term <= 1e-20 * upper.total()) {
            break;
        }
        j += 1;
    }
    Ok((lower.total(), upper.total()))
}
