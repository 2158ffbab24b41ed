//! Small numerical utilities shared across modules: compensated summation,
//! adaptive quadrature, least-squares line fits, and the counter-based normal
//! generator used for reproducible stochastic sampling.

/// Neumaier compensated summation. Exact enough that conservation checks at
/// the 1e-12 level measure the scheme, not the accumulator.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (sign, lo, hi) = if a <= b { (1.0, a, b) } else { (-1.0, b, a) };
    let fl = f(lo);
    let fh = f(hi);
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    let whole = simpson(lo, hi, fl, fm, fh);
    sign * simpson_recurse(f, lo, hi, fl, fm, fh, whole, tol, 50)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &dyn Fn(f64) -> f64,
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
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson quadrature split at the given breakpoints, so that the
/// subdivision never straddles a kink of a piecewise-defined integrand (and
/// cannot be fooled by sample points coinciding with table knots).
pub fn adaptive_simpson_split(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: f64,
) -> f64 {
    let (sign, lo, hi) = if a <= b { (1.0, a, b) } else { (-1.0, b, a) };
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&c| c > lo && c < hi)
        .collect();
    cuts.sort_by(|x, y| x.total_cmp(y));
    let mut total = 0.0;
    let mut left = lo;
    for c in cuts.into_iter().chain(std::iter::once(hi)) {
        total += adaptive_simpson(f, left, c, tol);
        left = c;
    }
    sign * total
}

/// Ordinary least squares fit `y ≈ slope·x + intercept` with goodness of fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fit a line through `(x, y)` pairs. Requires at least two distinct x values;
/// returns `None` otherwise. A perfectly flat response gives `r_squared = 1`.
pub fn fit_line(points: &[(f64, f64)]) -> Option<LineFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(x, y) in points {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res = syy - slope * sxy;
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

// --- counter-based random numbers -------------------------------------------
//
// The stochastic forcing must be addressable: the increment for (seed, path,
// mode, step) has to be computable without generating any predecessor, so that
// ensemble members can run in any order, in parallel, and reproduce exactly.
// Sequential generators do not offer that; a keyed hash does. The splitmix64
// finalizer below is a well-studied 64-bit mixer; two mixed words feed a
// Box–Muller transform, which consumes a fixed number of words per normal
// (unlike ziggurat sampling) and therefore keys cleanly.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Collapse a list of words into one well-mixed key.
pub fn counter_key(words: &[u64]) -> u64 {
    let mut h = GOLDEN;
    for &w in words {
        h = mix64(h ^ w).wrapping_add(GOLDEN);
    }
    mix64(h)
}

#[inline]
fn unit_open(bits: u64) -> f64 {
    // 53 high bits -> (0, 1): offset by half an ulp so 0 is never produced.
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw addressed by `key`. Different keys give independent
/// draws; the same key always gives the same draw.
pub fn standard_normal(key: u64) -> f64 {
    let u1 = unit_open(mix64(key.wrapping_add(GOLDEN)));
    let u2 = unit_open(mix64(key.wrapping_add(GOLDEN.wrapping_mul(2))));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancellation() {
        // 1 + 1e100 - 1e100 + 1 = 2 exactly under compensation.
        let s = neumaier_sum([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(s, 2.0);
    }

    #[test]
    fn simpson_integrates_polynomials_exactly() {
        // Simpson is exact on cubics; the adaptive wrapper must preserve that.
        let v = adaptive_simpson(&|x| x * x * x - 2.0 * x, -1.0, 2.0, 1e-12);
        let exact = (16.0 - 1.0) / 4.0 - (4.0 - 1.0);
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn simpson_handles_kinks_and_reversed_limits() {
        let v = adaptive_simpson(&|x: f64| x.abs().sqrt(), 0.0, 1.0, 1e-10);
        assert!((v - 2.0 / 3.0).abs() < 1e-8, "{v}");
        let rev = adaptive_simpson(&|x: f64| x.abs().sqrt(), 1.0, 0.0, 1e-10);
        assert!((rev + 2.0 / 3.0).abs() < 1e-8, "{rev}");
    }

    #[test]
    fn line_fit_exact_on_a_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.5 * i as f64 - 2.0)).collect();
        let fit = fit_line(&pts).unwrap();
        assert!((fit.slope - 3.5).abs() < 1e-12);
        assert!((fit.intercept + 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn line_fit_detects_scatter() {
        let pts = [(0.0, 0.0), (1.0, 5.0), (2.0, -1.0), (3.0, 4.0), (4.0, 0.5)];
        let fit = fit_line(&pts).unwrap();
        assert!(fit.r_squared < 0.5, "r2 = {}", fit.r_squared);
    }

    #[test]
    fn counter_normals_have_sane_moments() {
        let n = 200_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..n {
            let z = standard_normal(counter_key(&[42, i]));
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn counter_normals_are_reproducible_and_keyed() {
        let a = standard_normal(counter_key(&[1, 2, 3, 4]));
        let b = standard_normal(counter_key(&[1, 2, 3, 4]));
        let c = standard_normal(counter_key(&[1, 2, 3, 5]));
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(a.to_bits(), c.to_bits());
    }
}
