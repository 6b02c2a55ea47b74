//! Scalar search routines shared by the certification modules.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of `f` on `[a, b]`.
///
/// Assumes `f` is unimodal on the bracket. Returns `(argmax, max)`, where the
/// reported maximum also accounts for the bracket end points.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let mut best = (lo, f(lo));
    let fhi = f(hi);
    if fhi > best.1 {
        best = (hi, fhi);
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iter = 0;
    while hi - lo > tol && iter < 200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
        iter += 1;
    }
    for (x, fx) in [(x1, f1), (x2, f2)] {
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Golden-section search for the minimum of `f` on `[a, b]`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_section_max(|x| -f(x), a, b, tol);
    (x, -v)
}

/// Bisection for a sign change of `f` on `[a, b]`.
///
/// `f(a)` and `f(b)` must have opposite signs (zero counts as either). Iterates
/// until the bracket stops shrinking in floating point.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    let flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    let lo_negative = flo < 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `count` evenly spaced points covering `[a, b]` inclusive.
pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (count - 1) as f64;
            (0..count)
                .map(|i| if i + 1 == count { b } else { a + step * i as f64 })
                .collect()
        }
    }
}

/// `count` logarithmically spaced points covering `[a, b]`, `0 < a < b`.
pub fn logspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    let mut out: Vec<f64> = linspace(la, lb, count).into_iter().map(f64::exp).collect();
    if count > 0 {
        out[0] = a;
    }
    if count > 1 {
        out[count - 1] = b;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_section_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, -1.0, 2.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn golden_reports_endpoint_maximum() {
        let (x, v) = golden_section_max(|x| x, 0.0, 1.0, 1e-10);
        assert_eq!(x, 1.0);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn bisect_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn spacing_endpoints_exact() {
        let v = linspace(0.05, 3.0, 120);
        assert_eq!(v[0], 0.05);
        assert_eq!(v[119], 3.0);
        let l = logspace(1e-3, 10.0, 5);
        assert!((l[0] - 1e-3).abs() < 1e-15 && (l[4] - 10.0).abs() < 1e-12);
    }
}
