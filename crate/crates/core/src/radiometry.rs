//! Blackbody radiometry and the flat-interface ("Planck") radiator.
//!
//! The interface model treats every surface element of the fiber as a
//! polished half-space of silica: its directional emissivity is 1 - R from
//! Fresnel's equations, averaged over the hemisphere and the Planck spectrum.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::constants::{C0, H_PLANCK, K_B, SIGMA_B};
use crate::error::{Context, Error, Result};
use crate::materials::{CornerSelector, RefractiveIndexTable};
use crate::numeric::{brent_root, integrate_adaptive, GaussLegendre};

/// Reduced photon energies hν/(k_B T) bounding the Planck window.
pub const WINDOW_X: (f64, f64) = (1e-3, 50.0);

/// Hemispherical spectral emissive power of a black body [W s/m²].
pub fn planck_spectral_power(nu: f64, temp: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("Planck spectrum needs ν > 0, got {nu}")));
    }
    if !(temp >= 0.0) {
        return Err(Error::Domain(format!("Planck spectrum needs T ≥ 0, got {temp}")));
    }
    Ok(planck_unchecked(nu, temp))
}

pub(crate) fn planck_unchecked(nu: f64, temp: f64) -> f64 {
    if temp == 0.0 {
        return 0.0;
    }
    let x = H_PLANCK * nu / (K_B * temp);
    if x > 700.0 {
        return 0.0;
    }
    2.0 * PI * nu * nu / (C0 * C0) * H_PLANCK * nu / x.exp_m1()
}

/// Frequencies [Hz] at hν/(k_B T) = 1e-3 and 50.
pub fn planck_window(temp: f64) -> (f64, f64) {
    let s = K_B * temp / H_PLANCK;
    (WINDOW_X.0 * s, WINDOW_X.1 * s)
}

/// Fraction of σT⁴ emitted below reduced energy `x`.
pub fn planck_fraction_below(x: f64) -> f64 {
    let total = PI.powi(4) / 15.0;
    if x <= 0.0 {
        return 0.0;
    }
    if x < 0.05 {
        // x³/3 - x⁴/8 + x⁵/60
        return (x.powi(3) / 3.0 - x.powi(4) / 8.0 + x.powi(5) / 60.0) / total;
    }
    let v = integrate_adaptive(
        |t: f64| if t == 0.0 { 0.0 } else { t.powi(3) / t.exp_m1() },
        0.0,
        x,
        1e-12,
        0.0,
    )
    .unwrap_or(f64::NAN);
    v / total
}

/// Fraction of σT⁴ emitted above reduced energy `x`.
pub fn planck_fraction_above(x: f64) -> f64 {
    // ∫_x^∞ t³/(e^t - 1) dt = Σ_k e^{-kx}(x³/k + 3x²/k² + 6x/k³ + 6/k⁴)
    let total = PI.powi(4) / 15.0;
    let mut s = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-kf * x).exp()
            * (x.powi(3) / kf + 3.0 * x * x / kf.powi(2) + 6.0 * x / kf.powi(3) + 6.0 / kf.powi(4));
        s += term;
        if term < 1e-18 * s {
            break;
        }
    }
    s / total
}

/// Planck power missing from an integral restricted to [nu_lo, nu_hi].
pub fn planck_truncation(temp: f64, nu_lo: f64, nu_hi: f64) -> f64 {
    let s = H_PLANCK / (K_B * temp);
    planck_fraction_below(nu_lo * s) + planck_fraction_above(nu_hi * s)
}

/// ∫ P_ν dν over the Planck window, by adaptive quadrature in ln ν.
pub fn planck_integral(temp: f64) -> Result<f64> {
    let (a, b) = planck_window(temp);
    integrate_adaptive(
        |u: f64| {
            let nu = u.exp();
            planck_unchecked(nu, temp) * nu
        },
        a.ln(),
        b.ln(),
        1e-11,
        0.0,
    )
}

/// Frequency of the spectral maximum, from the root of 3(1 - e^{-x}) = x.
pub fn planck_peak_frequency(temp: f64) -> Result<f64> {
    let x = brent_root(|x| 3.0 * (-(-x).exp_m1()) - x, 1.0, 5.0, 1e-15)?;
    Ok(x * K_B * temp / H_PLANCK)
}

/// Unpolarized reflectivity of a vacuum/medium interface at incidence θ.
///
/// `_nu` is accepted for symmetry with the spectral callers; the frequency
/// dependence enters only through `n2`.
pub fn fresnel_reflectivity(_nu: f64, theta: f64, n2: Complex64) -> f64 {
    let c = theta.cos();
    let s2 = theta.sin().powi(2);
    let n2sq = n2 * n2;
    let root = (n2sq - s2).sqrt();
    let rs = (c - root) / (c + root);
    let rp = (n2sq * c - root) / (n2sq * c + root);
    let r = 0.5 * (rs.norm_sqr() + rp.norm_sqr());
    if r.is_finite() {
        r.clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// Hemispherical spectral emissivity of a flat interface,
/// 2 ∫ (1 - R) cos θ sin θ dθ with 64-point Gauss-Legendre in θ.
pub fn interface_spectral_emissivity(nu: f64, n2: Complex64) -> f64 {
    let g = GaussLegendre::new(64);
    2.0 * g.integrate(0.0, 0.5 * PI, |th| {
        (1.0 - fresnel_reflectivity(nu, th, n2)) * th.cos() * th.sin()
    })
}

/// Quadrature settings for the interface emissivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceOptions {
    /// Largest tolerated fraction of σT⁴ outside the table coverage.
    pub tail_tolerance: f64,
    pub rtol: f64,
}

impl Default for InterfaceOptions {
    fn default() -> Self {
        InterfaceOptions {
            tail_tolerance: 1e-6,
            rtol: 1e-8,
        }
    }
}

/// Frequency interval of the Planck window at `temp` clipped to the table,
/// after checking that the clipped tails stay below `tail_tolerance`.
pub fn covered_window(
    temp: f64,
    table: &RefractiveIndexTable,
    tail_tolerance: f64,
) -> Result<(f64, f64)> {
    let (w_lo, w_hi) = planck_window(temp);
    let (c_lo, c_hi) = table.frequency_coverage();
    let lo = w_lo.max(c_lo);
    let hi = w_hi.min(c_hi);
    let missing = planck_truncation(temp, lo, hi);
    if !(missing <= tail_tolerance) || lo >= hi {
        let edge = if c_lo > w_lo { c_lo } else { c_hi };
        return Err(Error::Coverage {
            what: "frequency (Hz) needed for the Planck window",
            value: edge,
            lo: w_lo,
            hi: w_hi,
        })
        .with_context(|| {
            format!("T = {temp} K: {missing:.2e} of σT⁴ falls outside the table coverage")
        });
    }
    Ok((lo, hi))
}

/// Total hemispherical emissivity of a flat silica/vacuum interface.
pub fn interface_hemispherical_emissivity(
    temp: f64,
    table: &RefractiveIndexTable,
    corner: CornerSelector,
) -> Result<f64> {
    interface_emissivity_with(temp, table, corner, InterfaceOptions::default())
}

pub fn interface_emissivity_with(
    temp: f64,
    table: &RefractiveIndexTable,
    corner: CornerSelector,
    opts: InterfaceOptions,
) -> Result<f64> {
    if !(temp > 0.0) {
        return Err(Error::Domain(format!("emissivity needs T > 0, got {temp}")));
    }
    let (lo, hi) = covered_window(temp, table, opts.tail_tolerance)?;
    // break the ln ν axis at the table nodes where the optical data kinks
    let mut breaks: Vec<f64> = vec![lo.ln()];
    for s in table.samples().iter().rev() {
        let nu = C0 / s.wavelength;
        if nu > lo && nu < hi {
            breaks.push(nu.ln());
        }
    }
    breaks.push(hi.ln());
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let mut err: Option<Error> = None;
        let v = integrate_adaptive(
            |u: f64| {
                let nu = u.exp();
                match table.nk_at(C0 / nu, corner) {
                    Ok(n2) => interface_spectral_emissivity(nu, n2) * planck_unchecked(nu, temp) * nu,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                }
            },
            w[0],
            w[1],
            opts.rtol,
            1e-14 * SIGMA_B * temp.powi(4),
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        total += v;
    }
    Ok((total / (SIGMA_B * temp.powi(4))).clamp(0.0, 1.0))
}

/// Net radiated power of an area `area` of interface [W].
pub fn interface_radiated_power(
    temp: f64,
    ambient: f64,
    area: f64,
    table: &RefractiveIndexTable,
    corner: CornerSelector,
) -> Result<f64> {
    if !(temp > 0.0 && ambient > 0.0) {
        return Err(Error::Domain("interface power needs T, T0 > 0".into()));
    }
    let e = interface_hemispherical_emissivity(temp, table, corner)?;
    // ε ≤ 1 bounds the absorbed term; skip it (and its coverage check) when negligible
    let e0 = if (ambient / temp).powi(4) < 1e-15 {
        0.0
    } else {
        interface_hemispherical_emissivity(ambient, table, corner)?
    };
    Ok((e * temp.powi(4) - e0 * ambient.powi(4)) * SIGMA_B * area)
}

/// Interface emissivity sampled on a temperature grid for one corner.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceEmissivityCurve {
    pub corner: CornerSelector,
    pub temps: Vec<f64>,
    pub emissivity: Vec<f64>,
}

impl InterfaceEmissivityCurve {
    pub fn compute(
        table: &RefractiveIndexTable,
        corner: CornerSelector,
        temps: &[f64],
        opts: InterfaceOptions,
    ) -> Result<Self> {
        let emissivity = temps
            .par_iter()
            .map(|&t| interface_emissivity_with(t, table, corner, opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(InterfaceEmissivityCurve {
            corner,
            temps: temps.to_vec(),
            emissivity,
        })
    }

    pub fn mean(&self) -> f64 {
        self.emissivity.iter().sum::<f64>() / self.emissivity.len() as f64
    }
}

/// Curves for all four corners plus the indices of the lowest and highest
/// traces (by mean over the grid); only those two propagate downstream.
pub fn extremal_interface_curves(
    table: &RefractiveIndexTable,
    temps: &[f64],
    opts: InterfaceOptions,
) -> Result<(Vec<InterfaceEmissivityCurve>, usize, usize)> {
    let curves = CornerSelector::ALL
        .iter()
        .map(|&c| InterfaceEmissivityCurve::compute(table, c, temps, opts))
        .collect::<Result<Vec<_>>>()?;
    let by_mean = |a: &usize, b: &usize| curves[*a].mean().total_cmp(&curves[*b].mean());
    let lo = (0..4).min_by(by_mean).unwrap();
    let hi = (0..4).max_by(by_mean).unwrap();
    Ok((curves, lo, hi))
}
