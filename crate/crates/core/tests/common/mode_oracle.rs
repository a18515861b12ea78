//! Dense root scan of the textbook HE11 dispersion relation.

use super::bessel_oracle::{j_series, k_integral};
use num_complex::Complex64 as C;
use std::f64::consts::PI;

/// Textbook HE11 equation in U with series/integral Bessel functions,
/// solved by a dense scan and bisection.
pub fn neff_root_scan(a: f64, n: f64, lambda0: f64) -> f64 {
    let v = 2.0 * PI * a * (n * n - 1.0).sqrt() / lambda0;
    let f = |u: f64| {
        let w = (v * v - u * u).sqrt();
        let j0 = j_series(0, C::new(u, 0.0)).re;
        let j1 = j_series(1, C::new(u, 0.0)).re;
        let k0 = k_integral(0, C::new(w, 0.0)).re;
        let k1 = k_integral(1, C::new(w, 0.0)).re;
        let jr = (j0 - j1 / u) / (u * j1);
        let kr = (-k0 - k1 / w) / (w * k1);
        let neff2 = (n * n * w * w + u * u) / (v * v);
        let m = 1.0 / (u * u) + 1.0 / (w * w);
        (jr + kr) * (n * n * jr + kr) - neff2 * m * m
    };
    let hi = v.min(2.404_825_557_695_773) * (1.0 - 1e-10);
    let steps = 2000;
    let mut prev = (hi * 1e-4, f(hi * 1e-4));
    let mut bracket = None;
    for i in 1..=steps {
        let u = hi * 1e-4 + (hi - hi * 1e-4) * i as f64 / steps as f64;
        let cur = f(u);
        if cur.signum() != prev.1.signum() {
            bracket = Some((prev.0, u, prev.1));
            break;
        }
        prev = (u, cur);
    }
    let (mut lo, mut up, flo) = bracket.expect("root bracket");
    for _ in 0..100 {
        let mid = 0.5 * (lo + up);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            up = mid;
        }
    }
    let u = 0.5 * (lo + up);
    ((n * n * (v * v - u * u) + u * u) / (v * v)).sqrt()
}
