//! Brute-force flat-interface emissivity: plain trapezoid rules in ln ν and θ
//! with a Fresnel evaluation written out independently of the library.

use fibertherm::materials::{CornerSelector, RefractiveIndexTable};
use num_complex::Complex64;
use std::f64::consts::PI;

const H: f64 = 6.626_070_15e-34;
const KB: f64 = 1.380_649e-23;
const C: f64 = 299_792_458.0;

fn reflectivity(theta: f64, n: Complex64) -> f64 {
    let (s, c) = theta.sin_cos();
    let w = (n * n - Complex64::new(s * s, 0.0)).sqrt();
    let te = ((Complex64::new(c, 0.0) - w) / (Complex64::new(c, 0.0) + w)).norm_sqr();
    let tm = ((n * n * c - w) / (n * n * c + w)).norm_sqr();
    0.5 * (te + tm)
}

pub fn interface_emissivity_trapezoid(
    temp: f64,
    table: &RefractiveIndexTable,
    corner: CornerSelector,
    n_nu: usize,
    n_theta: usize,
) -> f64 {
    let (lam_lo, lam_hi) = table.coverage();
    let s = KB * temp / H;
    let lo = (1e-3 * s).max(C / lam_hi).ln();
    let hi = (50.0 * s).min(C / lam_lo).ln();
    let du = (hi - lo) / n_nu as f64;
    let dth = 0.5 * PI / n_theta as f64;
    let mut total = 0.0;
    for i in 0..=n_nu {
        let nu = (lo + i as f64 * du).exp();
        let n = table.nk_at(C / nu, corner).unwrap();
        let mut hemi = 0.0;
        for j in 1..n_theta {
            let th = j as f64 * dth;
            hemi += (1.0 - reflectivity(th, n)) * th.cos() * th.sin();
        }
        hemi *= 2.0 * dth;
        let x = H * nu / (KB * temp);
        let planck = 2.0 * PI * nu * nu / (C * C) * H * nu / x.exp_m1();
        let w = if i == 0 || i == n_nu { 0.5 } else { 1.0 };
        total += w * hemi * planck * nu;
    }
    let sigma = 2.0 * PI.powi(5) * KB.powi(4) / (15.0 * C * C * H.powi(3));
    total * du / (sigma * temp.powi(4))
}
