//! Exact rational coefficients.
//!
//! `Rat` is an arbitrary-precision rational, always in lowest terms with a
//! positive denominator (guaranteed by the backing implementation). All
//! coefficient arithmetic in the engine is exact; nothing here rounds.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{EngineError, Result};

pub type Rat = BigRational;

/// Rational from an integer pair. Panics on zero denominator.
pub fn rat(num: i64, den: i64) -> Rat {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

/// Parse "p/q" or "p" (exact fraction string, as used in the JSON interchange).
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = num
        .parse()
        .map_err(|_| EngineError::Parameter(format!("bad fraction {s:?}")))?;
    let d: BigInt = den
        .parse()
        .map_err(|_| EngineError::Parameter(format!("bad fraction {s:?}")))?;
    if d.is_zero() {
        return Err(EngineError::Parameter(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(n, d))
}

/// Exact fraction string "p/q" (or "p" when the denominator is one).
pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // fall back to separate conversions for extreme magnitudes
        let n = r.numer().to_f64().unwrap_or(f64::MAX * r.numer().signum().to_f64().unwrap_or(1.0));
        let d = r.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

/// Exact square root of a rational if it is a perfect square.
pub fn rat_sqrt_exact(r: &Rat) -> Option<Rat> {
    if r.is_negative() {
        return None;
    }
    let ns = r.numer().sqrt();
    let ds = r.denom().sqrt();
    if &(&ns * &ns) == r.numer() && &(&ds * &ds) == r.denom() {
        Some(BigRational::new(ns, ds))
    } else {
        None
    }
}

/// Bernoulli number B_n (convention B_1 = -1/2), via the standard recurrence
/// sum_{j=0}^{n} C(n+1, j) B_j = 0.
pub fn bernoulli(n: usize) -> Rat {
    let mut b: Vec<Rat> = Vec::with_capacity(n + 1);
    for m in 0..=n {
        if m == 0 {
            b.push(Rat::one());
            continue;
        }
        // B_m = -1/(m+1) * sum_{j=0}^{m-1} C(m+1, j) B_j
        let mut acc = Rat::zero();
        let mut binom = Rat::one(); // C(m+1, 0)
        for (j, bj) in b.iter().enumerate().take(m) {
            acc += &binom * bj;
            // C(m+1, j+1) = C(m+1, j) * (m+1-j)/(j+1)
            binom *= rat((m + 1 - j) as i64, (j + 1) as i64);
        }
        b.push(-acc / rat_int((m + 1) as i64));
    }
    b.pop().unwrap()
}

/// Bernoulli polynomial value B_n(1): equal to B_n except B_1(1) = +1/2.
pub fn bernoulli_at_one(n: usize) -> Rat {
    if n == 1 {
        rat(1, 2)
    } else {
        bernoulli(n)
    }
}

/// Exact factorial as a rational.
pub fn factorial(n: usize) -> Rat {
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= BigInt::from(k);
    }
    BigRational::from_integer(acc)
}
