//! Brute-force cylinder emissivity: a fixed number of angular orders and a
//! plain trapezoid rule in ξ, with the T-matrix written out term by term.

use fibertherm::specfun::bessel_set;
use num_complex::Complex64 as C;
use std::f64::consts::PI;

/// Bracket Re T + |T|² + |T×|² summed over both polarizations; zero for
/// orders whose cylinder functions leave the double range (T underflows).
pub fn bracket(l: i32, xi: f64, k0a: f64, eps: C) -> f64 {
    let q = k0a * (1.0 - xi * xi).sqrt();
    let q1 = k0a * (eps - xi * xi).sqrt();
    let (Ok(o), Ok(i)) = (bessel_set(l, C::new(q, 0.0)), bessel_set(l, q1)) else {
        return 0.0;
    };
    let d = i.dj / (q1 * i.j);
    let hh = o.dh1 / (q * o.h1);
    let jj = o.dj / (q * o.j);
    let d1 = d - hh / eps;
    let d2 = d - hh;
    let d3 = d - jj / eps;
    let d4 = d - jj;
    let k = (l as f64) * xi / eps.sqrt() * (1.0 / (q1 * q1) - 1.0 / (q * q));
    let den = d1 * d2 - k * k;
    let ratio = o.j / o.h1;
    let tpp = -ratio * (d1 * d4 - k * k) / den;
    let tll = -ratio * (d2 * d3 - k * k) / den;
    let tx = 2.0 * C::i() * k / (PI * eps.sqrt() * (q * o.h1).powi(2)) / den;
    let v = tpp.re + tpp.norm_sqr() + tll.re + tll.norm_sqr() + 2.0 * tx.norm_sqr();
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// ε(ν) with l ∈ [-l_max, l_max] and an n_xi-point trapezoid on ξ ∈ [-1, 1].
pub fn emissivity_brute(k0a: f64, eps: C, l_max: i32, n_xi: usize) -> f64 {
    let h = 2.0 / (n_xi - 1) as f64;
    let mut total = 0.0;
    // endpoints ξ = ±1 contribute zero (grazing incidence)
    for m in 1..n_xi - 1 {
        let xi = -1.0 + m as f64 * h;
        let mut s = 0.0;
        for l in -l_max..=l_max {
            s += bracket(l, xi, k0a, eps);
        }
        total += s;
    }
    -2.0 / (PI * k0a) * total * h
}

/// The 2000-point trapezoid with one Richardson step against 4000 points.
/// Near grazing the l = 0 elements vary like 1/ln(1-ξ²), so the plain
/// trapezoid error falls only linearly in the step.
pub fn emissivity_brute_extrapolated(k0a: f64, eps: C, l_max: i32) -> f64 {
    let coarse = emissivity_brute(k0a, eps, l_max, 2001);
    let fine = emissivity_brute(k0a, eps, l_max, 4001);
    2.0 * fine - coarse
}
