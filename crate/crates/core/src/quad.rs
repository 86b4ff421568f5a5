//! Adaptive Simpson quadrature.

/// Integrates `f` over `[a, b]` to the requested relative tolerance (with an
/// absolute floor of `tol * 1e-3` for integrals near zero).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    // Split into a few panels first so narrow peaks are not stepped over by
    // the initial three-point estimate.
    const PANELS: usize = 16;
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    let coarse: f64 = (0..PANELS)
        .map(|k| {
            let lo = a + k as f64 * h;
            let hi = lo + h;
            (hi - lo) / 6.0 * (f(lo) + 4.0 * f(0.5 * (lo + hi)) + f(hi))
        })
        .sum();
    let abs_tol = (tol * coarse.abs()).max(tol * 1e-3);
    for k in 0..PANELS {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == PANELS { b } else { lo + h };
        let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson(&f, lo, hi, fa, fm, fb, whole, abs_tol / PANELS as f64, 60);
    }
    total
}

/// Integrates `f` over `[a, ∞)` through the substitution `x = a + u / (1 - u)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    integrate(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - u;
            let v = f(a + u / w) / (w * w);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

#[allow(clippy::too_many_arguments)]
fn simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (b - a) < 1e-14 {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-10);
        assert!((v - 9.0).abs() < 1e-9);
        let v = integrate_to_infinity(|x| (-x).exp(), 0.0, 1e-10);
        assert!((v - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn empty_interval() {
        assert_eq!(integrate(|_| 1.0, 2.0, 2.0, 1e-8), 0.0);
        assert_eq!(integrate(|_| 1.0, 3.0, 2.0, 1e-8), 0.0);
    }
}
