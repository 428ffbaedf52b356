//! Adaptive Gauss–Kronrod (7/15) quadrature for the integration tests, and
//! the quadrature consistency checks built on it.
#![allow(dead_code)]

use drawdown_core::analytics::{joint_density_max_value, lt_tau_n_max_tail, magnitude_inner_integral};
use drawdown_core::model::laplace_coeffs;
use drawdown_core::{DrawdownSpec, ModelParams};

const XK: [f64; 8] = [
    0.991_455_371_120_812_639,
    0.949_107_912_342_758_525,
    0.864_864_423_359_769_073,
    0.741_531_185_599_394_440,
    0.586_087_235_467_691_130,
    0.405_845_151_377_397_167,
    0.207_784_955_007_898_468,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_553,
    0.104_790_010_322_250_184,
    0.140_653_259_715_525_919,
    0.169_004_726_639_267_903,
    0.190_350_578_064_785_410,
    0.204_432_940_075_298_892,
    0.209_482_141_084_727_828,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693,
    0.279_705_391_489_276_668,
    0.381_830_050_505_118_945,
    0.417_959_183_673_469_388,
];

fn gk15(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut kronrod = WK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let d = h * XK[j];
        let s = f(c - d) + f(c + d);
        kronrod += WK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive: keep bisecting the panel with the largest error
/// estimate until the summed estimate drops below `tol`.
fn adapt(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let (v, e) = gk15(f, lo, hi);
    let mut panels = vec![(lo, hi, v, e)];
    for _ in 0..MAX_PANELS {
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= tol {
            break;
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (l, h, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (l + h);
        if mid <= l || mid >= h {
            break;
        }
        for (pl, ph) in [(l, mid), (mid, h)] {
            let (pv, pe) = gk15(f, pl, ph);
            panels.push((pl, ph, pv, pe));
        }
    }
    panels.iter().map(|p| p.2).sum()
}

const MAX_PANELS: usize = 2_000;

/// `int_lo^hi f` to absolute accuracy about `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    adapt(&f, lo, hi, tol)
}

/// `int_lo^hi f` with the integrand's jump or kink points given explicitly.
pub fn integrate_pieces(f: impl Fn(f64) -> f64, lo: f64, hi: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut points: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    points.push(lo);
    points.push(hi);
    points.sort_by(f64::total_cmp);
    points
        .windows(2)
        .map(|w| adapt(&f, w[0], w[1], tol / (points.len() as f64)))
        .sum()
}

/// `int_lo^inf f` for an integrand decaying at least exponentially on the
/// length `scale`, summed panel by panel until panels stop contributing.
pub fn integrate_to_infinity(f: impl Fn(f64) -> f64, lo: f64, scale: f64, tol: f64) -> f64 {
    let mut total = 0.0;
    let mut quiet = 0;
    let mut left = lo;
    for _ in 0..10_000 {
        let panel = adapt(&f, left, left + scale, tol * 1e-3);
        total += panel;
        left += scale;
        if panel.abs() <= tol * 1e-3 {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    total
}

/// Worst case of a consistency check: the deviation and where it occurred.
#[derive(Debug, Clone, Default)]
pub struct Worst {
    pub deviation: f64,
    pub at: String,
}

impl Worst {
    fn update(&mut self, deviation: f64, at: impl FnOnce() -> String) {
        if !(deviation <= self.deviation) {
            self.deviation = deviation;
            self.at = at();
        }
    }
}

/// `(mu, sigma, a, lambda)` for the joint-density check.
pub const DENSITY_CASES: [(f64, f64, f64, f64); 5] = [
    (0.1, 0.2, 0.1, 1.0),
    (0.0, 0.2, 0.1, 0.5),
    (-0.1, 0.12, 0.1, 2.0),
    (0.3, 0.5, 0.25, 0.1),
    (-0.4, 0.3, 0.05, 5.0),
];

/// Largest absolute gap between the joint density of `(M, X)` at the n-th
/// drawdown, integrated over the value, and the closed-form max-tail transform.
pub fn density_vs_max_tail(max_n: u32) -> Worst {
    let mut worst = Worst::default();
    for (mu, sigma, a, lambda) in DENSITY_CASES {
        let params = ModelParams::new(mu, sigma).unwrap();
        let spec = DrawdownSpec::new(a).unwrap();
        let coeffs = laplace_coeffs(&params, &spec, lambda).unwrap();
        for n in 1..=max_n {
            for x in [0.02, 0.1, 0.37, 1.0] {
                let density = |y| joint_density_max_value(&coeffs, n, x, y).unwrap();
                // Kinks at x - (n - m) a; beyond x the density decays like e^{-b y}.
                let lo = x - n as f64 * a;
                let breaks: Vec<f64> = (0..n).map(|m| x - (n - m) as f64 * a).collect();
                let near = integrate_pieces(density, lo, x, &breaks, 1e-14);
                let far = integrate_to_infinity(density, x, 2.0 / coeffs.b, 1e-15);
                let expected = lt_tau_n_max_tail(&coeffs, n, x).unwrap();
                worst.update((near + far - expected).abs(), || format!("mu={mu} a={a} n={n} x={x}"));
            }
        }
    }
    worst
}

/// Largest relative gap between the binomial closed form of the magnitude
/// CDF inner integral and quadrature.
pub fn magnitude_integral_vs_quadrature() -> Worst {
    let mut worst = Worst::default();
    for b in [0.5, 3.0, 11.7, 40.0] {
        for a in [0.05, 0.1, 0.3] {
            for m in 0..=8u32 {
                let closed = magnitude_inner_integral(b, m, a);
                let shift = m as f64 * a;
                let numeric = integrate_to_infinity(
                    |y| (-b * y).exp() * y * (y + shift).powi(m as i32 - 1),
                    0.0,
                    1.0 / b,
                    1e-16 * closed.abs(),
                );
                worst.update((numeric - closed).abs() / closed.abs(), || format!("b={b} a={a} m={m}"));
            }
        }
    }
    worst
}

#[test]
fn quadrature_self_check() {
    let v = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-14);
    assert!((v - 2.0).abs() < 1e-13);
    let v = integrate_to_infinity(|x| x * (-x).exp(), 0.0, 1.0, 1e-14);
    assert!((v - 1.0).abs() < 1e-13);
    let step = integrate_pieces(|x| if x < 0.3 { 1.0 } else { 2.0 }, 0.0, 1.0, &[0.3], 1e-14);
    assert!((step - 1.7).abs() < 1e-13);
}
