//! Value parsers for complex numbers, degree ranges and number lists.

use hullscope_core::Complex64;

/// `re` or `re,im`.
pub fn complex(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("bad number `{t}` in `{s}`: {e}"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected `re` or `re,im`, got `{s}`")),
    }
}

/// A degree list, kept as one clap value so ranges expand in place.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(transparent)]
pub struct Degrees(pub Vec<usize>);

/// `lo..hi` (inclusive), `a,b,c`, or a single integer.
pub fn degrees(s: &str) -> Result<Degrees, String> {
    degree_list(s).map(Degrees)
}

fn degree_list(s: &str) -> Result<Vec<usize>, String> {
    let int = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad integer `{t}`: {e}"));
    if let Some((lo, hi)) = s.split_once("..") {
        let (lo, hi) = (int(lo)?, int(hi.trim_start_matches('='))?);
        if lo > hi {
            return Err(format!("empty range `{s}`"));
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',').map(int).collect()
}

/// Comma-separated reals.
pub fn reals(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number `{t}`: {e}")))
        .collect()
}

/// `lo,hi` with `lo < hi`.
pub fn interval(s: &str) -> Result<(f64, f64), String> {
    match reals(s)?.as_slice() {
        [lo, hi] if lo < hi => Ok((*lo, *hi)),
        _ => Err(format!("expected `lo,hi` with lo < hi, got `{s}`")),
    }
}

/// Ascending polynomial coefficients, kept as one clap value.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(transparent)]
pub struct Coefficients(pub Vec<Complex64>);

/// Ascending coefficients `re,im;re,im;...`.
pub fn coefficients(s: &str) -> Result<Coefficients, String> {
    s.split(';').map(complex).collect::<Result<_, _>>().map(Coefficients)
}
