//! Bracketed bisection.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

/// Bisection on a sign change of `f` over `[lo, hi]`.
///
/// Stops when `|f(mid)| <= ftol` or the bracket is narrower than `xtol`.
/// Returns `None` when the endpoints do not straddle a root.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, bracket: Bracket, xtol: f64, ftol: f64) -> Option<f64> {
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return None;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() <= ftol || (hi - lo) <= xtol || mid <= lo || mid >= hi {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, Bracket { lo: 0.0, hi: 2.0 }, 1e-15, 0.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn no_sign_change() {
        assert!(bisect(|x| x * x + 1.0, Bracket { lo: -1.0, hi: 1.0 }, 1e-12, 0.0).is_none());
    }
}
