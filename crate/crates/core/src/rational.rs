//! Exact rationals for edge weights, thresholds and efficiency figures.

use num_rational::Ratio;
use thiserror::Error;

/// Non-negative exact rational.
pub type Rational = Ratio<u64>;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot parse {0:?} as a non-negative rational")]
pub struct ParseRationalError(pub String);

/// Parses `7`, `3/2` or a plain decimal such as `0.05` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: u64 = num.trim().parse().map_err(|_| err())?;
        let den: u64 = den.trim().parse().map_err(|_| err())?;
        if den == 0 {
            return Err(err());
        }
        return Ok(Rational::new(num, den));
    }
    let (whole, frac) = match s.split_once('.') {
        Some((w, f)) => (w, f),
        None => (s, ""),
    };
    let digits_ok = |d: &str| d.chars().all(|c| c.is_ascii_digit());
    if !digits_ok(whole) || !digits_ok(frac) || (whole.is_empty() && frac.is_empty()) {
        return Err(err());
    }
    if frac.len() > 18 {
        return Err(err());
    }
    let scale = 10u64.pow(frac.len() as u32);
    let whole: u64 = if whole.is_empty() {
        0
    } else {
        whole.parse().map_err(|_| err())?
    };
    let frac: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse().map_err(|_| err())?
    };
    let num = whole
        .checked_mul(scale)
        .and_then(|w| w.checked_add(frac))
        .ok_or_else(err)?;
    Ok(Rational::new(num, scale))
}

pub fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
