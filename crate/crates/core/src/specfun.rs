//! Bessel functions of the first kind of real order, their zeros, and Gamma.
//!
//! `J_ν(x)` is evaluated by one of three schemes:
//!
//! * ascending power series when `x² <= 4(ν + 1)`;
//! * Hankel's asymptotic expansion when `x >= max(25, ν²)`;
//! * Miller's backward recurrence, normalized with
//!   `(x/2)^ν / Γ(ν+1) = Σ_k (ν+2k)/(ν+k) · Π_{i≤k}(ν+i)/i · J_{ν+2k}(x)`, in between.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Order of a Bessel function: a finite nonnegative real.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if nu.is_finite() && nu >= 0.0 {
            Ok(BesselOrder(nu))
        } else {
            Err(Error::Domain(format!("Bessel order must be finite and >= 0, got {nu}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

// Lanczos sum for z >= 0.5, returns (t, series) with Γ(z) = √(2π) t^{z-1/2} e^{-t} series.
fn lanczos(z: f64) -> (f64, f64) {
    let z = z - 1.0;
    let mut s = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        s += c / (z + i as f64);
    }
    (z + LANCZOS_G + 0.5, s)
}

/// Γ(x) for x > 0 via the Lanczos approximation (g = 7, nine terms),
/// with `Γ(x) = Γ(x+1)/x` below 1/2.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma_fn requires x > 0, got {x}")));
    }
    if x < 0.5 {
        return Ok(gamma_fn(x + 1.0)? / x);
    }
    if x > 171.7 {
        return Ok(f64::INFINITY);
    }
    if x == x.floor() && x <= 23.0 {
        let mut f = 1.0;
        for i in 2..x as u64 {
            f *= i as f64;
        }
        return Ok(f);
    }
    let (t, s) = lanczos(x);
    Ok((2.0 * std::f64::consts::PI).sqrt() * t.powf(x - 0.5) * (-t).exp() * s)
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    if x < 0.5 {
        return Ok(ln_gamma(x + 1.0)? - x.ln());
    }
    if x < 20.0 {
        return Ok(gamma_fn(x)?.ln());
    }
    let (t, s) = lanczos(x);
    Ok(0.5 * (2.0 * std::f64::consts::PI).ln() + (x - 0.5) * t.ln() - t + s.ln())
}

fn check_args(nu: f64, x: f64) -> Result<()> {
    BesselOrder::new(nu)?;
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("Bessel argument must be finite and >= 0, got {x}")));
    }
    Ok(())
}

fn use_series(nu: f64, x: f64) -> bool {
    x * x <= 4.0 * (nu + 1.0)
}

fn use_hankel(nu: f64, x: f64) -> bool {
    x >= (nu * nu).max(25.0)
}

pub(crate) fn j_series(nu: f64, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (nu + k));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() || k > 500.0 {
            break;
        }
    }
    let half = 0.5 * x;
    let lead = if nu < 150.0 && nu * half.ln() > -700.0 {
        half.powf(nu) / gamma_fn(nu + 1.0).unwrap_or(f64::INFINITY)
    } else {
        (nu * half.ln() - ln_gamma(nu + 1.0).unwrap_or(f64::INFINITY)).exp()
    };
    lead * sum
}

pub(crate) fn j_hankel(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        let mag = term.abs();
        if mag > prev {
            break;
        }
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if mag < 1e-17 * p.abs() {
            break;
        }
        prev = mag;
    }
    let chi = x - (0.5 * nu + 0.25) * std::f64::consts::PI;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

// Returns (J_ν(x), J_{ν+1}(x)).
pub(crate) fn j_miller(nu: f64, x: f64) -> (f64, f64) {
    let start = ((x - nu).max(0.0) + 50.0 + 12.0 * x.cbrt()).ceil() as usize;
    let top = start + start % 2;
    let log_form = nu * x.max(2.0).ln() > 600.0;
    let half = 0.5 * x;
    let ln_lhs = nu * half.ln() - ln_gamma(nu + 1.0).unwrap_or(f64::INFINITY);

    // ln of Π_{i≤k} (ν+i)/i for the normalization weights
    let kmax = top / 2;
    let mut ln_prod = vec![0.0; kmax + 1];
    for k in 1..=kmax {
        ln_prod[k] = ln_prod[k - 1] + ((nu + k as f64) / k as f64).ln();
    }
    let mut prod = vec![1.0; kmax + 1];
    if !log_form {
        for k in 1..=kmax {
            prod[k] = prod[k - 1] * (nu + k as f64) / k as f64;
        }
    }
    let weight = |k: usize| -> f64 {
        let kf = k as f64;
        let ratio = if nu == 0.0 && k == 0 { 1.0 } else { (nu + 2.0 * kf) / (nu + kf) };
        if log_form {
            ratio * (ln_prod[k] - ln_lhs).exp()
        } else {
            ratio * prod[k]
        }
    };

    let mut f_next = 0.0; // f_{n+1}
    let mut f = 1e-30; // f_n
    let mut sum = 0.0;
    let mut f1 = 0.0;
    let mut n = top;
    loop {
        if n % 2 == 0 {
            sum += weight(n / 2) * f;
        }
        if n == 1 {
            f1 = f;
        }
        if n == 0 {
            break;
        }
        let f_prev = 2.0 * (nu + n as f64) / x * f - f_next;
        f_next = f;
        f = f_prev;
        n -= 1;
        if f.abs() > 1e250 {
            f *= 1e-250;
            f_next *= 1e-250;
            sum *= 1e-250;
            f1 *= 1e-250;
        }
    }
    let scale = if log_form { 1.0 / sum } else { (half.powf(nu) / gamma_fn(nu + 1.0).unwrap()) / sum };
    (f * scale, f1 * scale)
}

fn j_unchecked(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    if use_series(nu, x) {
        j_series(nu, x)
    } else if use_hankel(nu, x) {
        j_hankel(nu, x)
    } else {
        j_miller(nu, x).0
    }
}

/// J_ν(x) for real ν >= 0 and x >= 0.
pub fn bessel_j(nu: f64, x: f64) -> Result<f64> {
    check_args(nu, x)?;
    Ok(j_unchecked(nu, x))
}

fn jp_unchecked(nu: f64, x: f64) -> f64 {
    nu * j_unchecked(nu, x) / x - j_unchecked(nu + 1.0, x)
}

/// J'_ν(x) = ν J_ν(x)/x − J_{ν+1}(x) for x > 0.
pub fn bessel_j_prime(nu: f64, x: f64) -> Result<f64> {
    check_args(nu, x)?;
    if x <= 0.0 {
        return Err(Error::Domain("bessel_j_prime requires x > 0".into()));
    }
    Ok(jp_unchecked(nu, x))
}

/// The first positive zeros of J_ν.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroTable {
    pub nu: BesselOrder,
    pub zeros: Vec<f64>,
}

impl ZeroTable {
    pub fn count(&self) -> usize {
        self.zeros.len()
    }

    /// The k-th zero, 1-based.
    pub fn get(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.zeros.get(i).copied())
    }
}

/// Lower and upper bounds for the k-th zero: the classical bracket
/// `π(k + ν/2 − 1/4)` vs `π(k + ν/4 − 1/8)`, ordered by whether ν <= 1/2.
pub fn zero_bracket(nu: f64, k: usize) -> (f64, f64) {
    let kf = k as f64;
    let a = std::f64::consts::PI * (kf + nu / 2.0 - 0.25);
    let b = std::f64::consts::PI * (kf + nu / 4.0 - 0.125);
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn refine_zero(nu: f64, k: usize, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut flo = j_unchecked(nu, lo);
    loop {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 || mid <= lo || mid >= hi {
            break;
        }
        let fm = j_unchecked(nu, mid);
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let mut z = 0.5 * (lo + hi);
    for _ in 0..2 {
        let fz = j_unchecked(nu, z);
        let dz = jp_unchecked(nu, z);
        if dz == 0.0 || fz == 0.0 {
            break;
        }
        let cand = z - fz / dz;
        // keep Newton inside the final bracket, with a little room for rounding
        let pad = 4.0 * f64::EPSILON * z;
        if cand >= lo - pad && cand <= hi + pad {
            z = cand;
        }
    }
    let res = j_unchecked(nu, z).abs();
    let tol = 1e-12 * jp_unchecked(nu, z).abs().max(1.0);
    if res > tol {
        return Err(Error::ZeroRefinement { nu, k, residual: res });
    }
    Ok(z)
}

/// The first `count` positive zeros of J_ν, bracketed by [`zero_bracket`]
/// (confirmed by a sign change, otherwise scanned in steps of π/8 from the
/// previous zero), then bisected and polished by two Newton steps.
pub fn bessel_zeros(nu: f64, count: usize) -> Result<ZeroTable> {
    let order = BesselOrder::new(nu)?;
    if count == 0 {
        return Err(Error::InvalidParams("zero count must be positive".into()));
    }
    let mut zeros: Vec<f64> = Vec::with_capacity(count);
    for k in 1..=count {
        let prev = zeros.last().copied().unwrap_or(0.0);
        let (a, b) = zero_bracket(nu, k);
        let pad = 1e-9 * b.max(1.0);
        let (lo, hi) = ((a - pad).max(prev + 1e-12), b + pad);
        let bracket = if lo < hi && j_unchecked(nu, lo) * j_unchecked(nu, hi) < 0.0 {
            Some((lo, hi))
        } else {
            let step = std::f64::consts::PI / 8.0;
            let mut x0 = if prev > 0.0 { prev + 1e-9 * prev } else { nu.max(step) * 0.5 };
            let mut f0 = j_unchecked(nu, x0);
            let mut found = None;
            for _ in 0..10_000 {
                let x1 = x0 + step;
                let f1 = j_unchecked(nu, x1);
                if f0 * f1 < 0.0 {
                    found = Some((x0, x1));
                    break;
                }
                x0 = x1;
                f0 = f1;
            }
            found
        };
        let (lo, hi) = bracket.ok_or(Error::BracketFailure { nu, k })?;
        let z = refine_zero(nu, k, lo, hi)?;
        if z <= prev {
            return Err(Error::BracketFailure { nu, k });
        }
        zeros.push(z);
    }
    Ok(ZeroTable { nu: order, zeros })
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn recurrence_identity(nu in 0.0f64..20.0, x in 0.05f64..120.0) {
            let j0 = bessel_j(nu, x).unwrap();
            let j1 = bessel_j(nu + 1.0, x).unwrap();
            let jp = bessel_j_prime(nu, x).unwrap();
            let scale = j0.abs().max(j1.abs()).max(1e-12) * x.max(1.0);
            prop_assert!((x * jp - nu * j0 + x * j1).abs() <= 1e-10 * scale);
        }

        #[test]
        fn three_term_recurrence(nu in 1.0f64..15.0, x in 0.5f64..80.0) {
            let a = bessel_j(nu - 1.0, x).unwrap();
            let b = bessel_j(nu, x).unwrap();
            let c = bessel_j(nu + 1.0, x).unwrap();
            let scale = a.abs() + (2.0 * nu / x * b).abs() + c.abs();
            prop_assert!((a + c - 2.0 * nu / x * b).abs() <= 1e-11 * scale.max(1e-300));
        }

        #[test]
        fn gamma_recurrence(x in 0.01f64..60.0) {
            let g = gamma_fn(x).unwrap();
            let g1 = gamma_fn(x + 1.0).unwrap();
            prop_assert!((g1 / (x * g) - 1.0).abs() < 1e-12);
        }
    }
}
