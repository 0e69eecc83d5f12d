//! Exact Bernoulli numbers, Bernoulli polynomials on `[0, 1]`, and the
//! bounds used by the trapezoid error analysis.
//!
//! Numbers are built by the recursion `sum_{j<k} C(k, j) b_j = 0` in exact
//! rational arithmetic. Floating point only enters when a polynomial is
//! evaluated or a number is exported.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use twofloat::TwoFloat;

use crate::error::{Error, Result};

/// Largest index a [`BernoulliTable`] may be built up to.
pub const MAX_KMAX: usize = 256;

/// Exact Bernoulli numbers `b_0 ..= b_kmax` (with `b_1 = -1/2`).
#[derive(Debug, Clone)]
pub struct BernoulliTable {
    values: Vec<BigRational>,
}

/// Binomial coefficients `C(k, 0..=k)` as big integers.
pub(crate) fn binomial_row(k: usize) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(k + 1);
    let mut c = BigInt::one();
    row.push(c.clone());
    for j in 0..k {
        c = c * BigInt::from(k - j) / BigInt::from(j + 1);
        row.push(c.clone());
    }
    row
}

impl BernoulliTable {
    /// Builds `b_0 ..= b_kmax`.
    pub fn new(kmax: usize) -> Result<Self> {
        if kmax > MAX_KMAX {
            return Err(Error::Capacity {
                what: "bernoulli kmax",
                requested: kmax,
                limit: MAX_KMAX,
            });
        }
        let mut values: Vec<BigRational> = Vec::with_capacity(kmax + 1);
        values.push(BigRational::one());
        for m in 1..=kmax {
            if m >= 3 && m % 2 == 1 {
                values.push(BigRational::zero());
                continue;
            }
            // sum_{j=0}^{m} C(m+1, j) b_j = 0, solved for b_m.
            let row = binomial_row(m + 1);
            let mut acc = BigRational::zero();
            for (j, b) in values.iter().enumerate() {
                if !b.is_zero() {
                    acc += BigRational::from_integer(row[j].clone()) * b;
                }
            }
            values.push(-acc / BigRational::from_integer(BigInt::from(m + 1)));
        }
        Ok(Self { values })
    }

    pub fn kmax(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[BigRational] {
        &self.values
    }

    pub fn get(&self, k: usize) -> Result<&BigRational> {
        self.values.get(k).ok_or(Error::Index {
            what: "bernoulli index",
            index: k,
            max: self.kmax(),
        })
    }

    /// `b_k` rounded to the nearest `f64`.
    pub fn value_f64(&self, k: usize) -> Result<f64> {
        Ok(rational_to_f64(self.get(k)?))
    }

    /// Exact residual of the defining identity `sum_{j<k} C(k, j) b_j` for
    /// `2 <= k <= kmax + 1`. Zero for every `k` in a correct table.
    pub fn recursion_residual(&self, k: usize) -> Result<BigRational> {
        if k < 2 || k > self.kmax() + 1 {
            return Err(Error::Index {
                what: "recursion order",
                index: k,
                max: self.kmax() + 1,
            });
        }
        let row = binomial_row(k);
        let mut acc = BigRational::zero();
        for (c, b) in row.iter().zip(&self.values).take(k) {
            acc += BigRational::from_integer(c.clone()) * b;
        }
        Ok(acc)
    }

    /// Double-double coefficients of `B_k(s)`, highest power first.
    fn poly_coeffs(&self, k: usize) -> Result<Vec<TwoFloat>> {
        if k > self.kmax() {
            return Err(Error::Index {
                what: "bernoulli polynomial degree",
                index: k,
                max: self.kmax(),
            });
        }
        // B_k(s) = sum_j C(k, j) b_j s^{k-j}; j = 0 is the leading term.
        let row = binomial_row(k);
        Ok((0..=k)
            .map(|j| {
                let c = BigRational::from_integer(row[j].clone()) * &self.values[j];
                rational_to_twofloat(&c)
            })
            .collect())
    }

    /// Evaluates `B_k(s)` for `s` in `[0, 1]`.
    pub fn poly_eval(&self, k: usize, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain {
                param: "s",
                value: s,
                expected: "[0, 1]",
            });
        }
        let coeffs = self.poly_coeffs(k)?;
        Ok(horner(&coeffs, s).into())
    }

    /// A reusable evaluator for one fixed degree, used inside quadrature loops.
    pub fn poly(&self, k: usize) -> Result<BernoulliPoly> {
        Ok(BernoulliPoly {
            degree: k,
            coeffs: self.poly_coeffs(k)?,
        })
    }
}

/// `B_k` with its coefficients already converted to double-double.
#[derive(Debug, Clone)]
pub struct BernoulliPoly {
    degree: usize,
    coeffs: Vec<TwoFloat>,
}

impl BernoulliPoly {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `B_k(s)`; callers keep `s` in `[0, 1]`.
    pub fn eval(&self, s: f64) -> f64 {
        horner(&self.coeffs, s).into()
    }

    /// The periodic extension `B_k(s - floor(s))`.
    pub fn eval_periodic(&self, s: f64) -> f64 {
        horner(&self.coeffs, s - s.floor()).into()
    }
}

// The coefficients of B_k cancel heavily at s = 1 (their sum is b_k), so
// the recurrence runs in double-double.
fn horner(coeffs: &[TwoFloat], s: f64) -> TwoFloat {
    coeffs
        .iter()
        .fold(TwoFloat::from(0.0), |acc, &c| acc * s + c)
}

/// Splits a rational into `hi + lo` with `lo` the rounded remainder.
fn rational_to_twofloat(r: &BigRational) -> TwoFloat {
    let hi = approx_f64(r);
    let lo = match BigRational::from_float(hi) {
        Some(h) => approx_f64(&(r - h)),
        None => 0.0,
    };
    TwoFloat::new_add(hi, lo)
}

/// `f64` of a big rational, rounded through a double-double split so that
/// large values land on the nearest float.
pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    rational_to_twofloat(r).into()
}

/// Within an ulp or two; robust to numerators and denominators that
/// individually overflow `f64`.
fn approx_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() {
            return n / d;
        }
    }
    // Shift both to ~64 significant bits, divide, rescale.
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift_n = (nb - 64).max(0);
    let shift_d = (db - 64).max(0);
    let n = (r.numer() >> shift_n as usize).to_f64().unwrap_or(0.0);
    let d = (r.denom() >> shift_d as usize).to_f64().unwrap_or(1.0);
    let exp = (shift_n - shift_d) as i32;
    n / d * 2f64.powi(exp)
}

/// Outcome of checking `|B_2k(s)|/(2k)! <= |b_2k|/(2k)! <= 4/(2 pi)^{2k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub pass: bool,
    /// Smallest relative slack seen over both inequalities; negative on failure.
    pub worst_margin: f64,
    /// Order `2k` where the worst margin occurred.
    pub worst_order: usize,
    pub worst_s: f64,
}

/// Relative slack allowed on the polynomial inequality, which is tight at
/// `s = 0` and `s = 1` and therefore only holds up to float rounding there.
const POLY_BOUND_SLACK: f64 = 1e-12;

pub fn verify_bernoulli_bound(
    table: &BernoulliTable,
    kmax: usize,
    grid: usize,
) -> Result<BoundReport> {
    if 2 * kmax > table.kmax() {
        return Err(Error::Index {
            what: "bound order 2k",
            index: 2 * kmax,
            max: table.kmax(),
        });
    }
    if grid < 2 {
        return Err(Error::Domain {
            param: "grid",
            value: grid as f64,
            expected: ">= 2",
        });
    }
    let mut report = BoundReport {
        pass: true,
        worst_margin: f64::INFINITY,
        worst_order: 0,
        worst_s: 0.0,
    };
    for k in 0..=kmax {
        let order = 2 * k;
        let b_abs = table.value_f64(order)?.abs();
        let closed = 4.0 * (2.0 * PI).powi(-(order as i32));
        // Both sides share the 1/(2k)! factor, so compare without it.
        let log_fact = ln_factorial(order);
        let b_scaled = (b_abs.ln() - log_fact).exp();
        let margin = 1.0 - b_scaled / closed;
        if margin < report.worst_margin {
            report.worst_margin = margin;
            report.worst_order = order;
            report.worst_s = f64::NAN;
        }
        let poly = table.poly(order)?;
        for i in 0..grid {
            let s = i as f64 / (grid - 1) as f64;
            let v = poly.eval(s).abs();
            let m = 1.0 - v / b_abs;
            if m < report.worst_margin {
                report.worst_margin = m;
                report.worst_order = order;
                report.worst_s = s;
            }
            if m < -POLY_BOUND_SLACK {
                report.pass = false;
            }
        }
        if margin < 0.0 {
            report.pass = false;
        }
    }
    Ok(report)
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `zeta(2k)` from Euler's closed form `(-1)^{k+1} b_2k (2 pi)^{2k} / (2 (2k)!)`.
pub fn zeta_even(table: &BernoulliTable, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain {
            param: "k",
            value: 0.0,
            expected: ">= 1",
        });
    }
    let b = table.get(2 * k)?;
    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
    let mag = rational_to_f64(&b.abs());
    let ln_val = mag.ln() + (2 * k) as f64 * (2.0 * PI).ln() - 2f64.ln() - ln_factorial(2 * k);
    let signed = if b.is_negative() { -1.0 } else { 1.0 };
    Ok(sign * signed * ln_val.exp())
}
