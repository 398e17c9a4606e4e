//! Small numerical building blocks shared by the rest of the crate:
//! Gauss–Legendre rules, adaptive Gauss–Kronrod integration, Brent's root
//! finder and golden-section extremum search.

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { p0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One 15-point Kronrod panel; returns `(kronrod, |kronrod - gauss|)`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

pub const MAX_QUAD_DEPTH: u32 = 48;

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]` to absolute
/// tolerance `tol`. The range is first split at every point of `breaks` lying
/// strictly inside it, so piecewise-smooth integrands with known kinks
/// integrate at full order.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, breaks: &[f64]) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut points = Vec::with_capacity(cuts.len() + 2);
    points.push(lo);
    points.extend(cuts);
    points.push(hi);

    let pieces = (points.len() - 1) as f64;
    let mut total = 0.0;
    for w in points.windows(2) {
        total += adapt(&f, w[0], w[1], tol / pieces, 0)?;
    }
    Ok(sign * total)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let (value, err) = gk15(f, a, b);
    // 50 eps keeps the loop from chasing roundoff on large integrands.
    if err <= tol.max(50.0 * f64::EPSILON * value.abs()) {
        return Ok(value);
    }
    if depth >= MAX_QUAD_DEPTH {
        return Err(Error::QuadratureFailure { a, b, tol, depth });
    }
    let mid = 0.5 * (a + b);
    Ok(adapt(f, a, mid, 0.5 * tol, depth + 1)? + adapt(f, mid, b, 0.5 * tol, depth + 1)?)
}

/// Brent's method on a bracketing interval. Stops when the bracket is
/// narrower than `xtol` (plus a few ulps) or the function hits zero.
pub fn brent<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::RootNotFound { lo, hi });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Ok(b)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[lo, hi]`. Returns the best
/// point seen, endpoints included.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut best = if f(lo) <= f(hi) { (lo, f(lo)) } else { (hi, f(hi)) };
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    for (x, fx) in [(x1, f1), (x2, f2)] {
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Minimum of `f` over a uniform grid of `n` points on `[lo, hi]`, refined by
/// golden section in the cells adjacent to the best grid point.
pub fn grid_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, tol: f64) -> (f64, f64) {
    let n = n.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let at = |i: usize| if i == n - 1 { hi } else { lo + step * i as f64 };
    let mut best_i = 0;
    let mut best = f64::INFINITY;
    for i in 0..n {
        let v = f(at(i));
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let left = at(best_i.saturating_sub(1));
    let right = at((best_i + 1).min(n - 1));
    let (x, v) = golden_min(&f, left, right, tol);
    if v < best {
        (x, v)
    } else {
        (at(best_i), best)
    }
}

/// Maximum counterpart of [`grid_min`].
pub fn grid_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, tol: f64) -> (f64, f64) {
    let (x, v) = grid_min(|x| -f(x), lo, hi, n, tol);
    (x, -v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 8, 16, 24] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            // degree 2n-1 monomial with even power
            let deg = if (2 * n - 1) % 2 == 0 { 2 * n - 1 } else { 2 * n - 2 };
            let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
            let exact = 2.0 / (deg as f64 + 1.0);
            assert!((approx - exact).abs() < 1e-13, "n={n}: {approx} vs {exact}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn kronrod_handles_kinks_when_told_about_them() {
        let f = |x: f64| (x - 0.3).abs();
        let exact = 0.5 * 0.09 + 0.5 * 0.49;
        let v = integrate(f, 0.0, 1.0, 1e-14, &[0.3]).unwrap();
        assert!((v - exact).abs() < 1e-15);
        let v = integrate(f, 0.0, 1.0, 1e-12, &[]).unwrap();
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn kronrod_reports_failure_on_nonintegrable_singularity() {
        let err = integrate(|x: f64| 1.0 / x, 0.0, 1.0, 1e-12, &[]).unwrap_err();
        assert!(matches!(err, Error::QuadratureFailure { .. }));
    }

    #[test]
    fn brent_finds_sqrt2() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-14);
        assert!(matches!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12), Err(Error::RootNotFound { .. })));
    }

    #[test]
    fn grid_extrema_refine_past_the_grid() {
        let (x, v) = grid_max(|x| -(x - 0.123_456_789).powi(2), 0.0, 1.0, 11, 1e-12);
        assert!((x - 0.123_456_789).abs() < 1e-6);
        assert!(v.abs() < 1e-12);
    }
}
