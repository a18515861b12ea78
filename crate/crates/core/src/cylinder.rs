//! Far-field thermal emission of an infinite homogeneous cylinder from
//! fluctuational electrodynamics.
//!
//! Emission is expressed through the cylinder's T-matrix in the basis of
//! cylindrical vector waves labelled by the angular index `l`, the axial
//! direction cosine `ξ = k_z/k₀` and the polarization P ∈ {⊥, ∥}. For each
//! (l, ξ) the absorbed fraction of an incoming wave is
//! `-(Re T_PP + |T_PP|² + |T_PP̄|²)`, which vanishes for lossless material.
//! The spectral emissivity normalizes the emitted power per unit length to
//! a black surface of the same circumference.
//!
//! All wave quantities are handled in dimensionless form: `x = q a` and
//! `x₁ = q₁ a` with `q = k₀√(1-ξ²)`, `q₁ = k₀√(ε-ξ²)`.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::constants::{C0, H_PLANCK, K_B};
use crate::error::{Context, Error, Result};
use crate::io::{format_num, sha256_hex};
use crate::materials::{CornerSelector, RefractiveIndexTable};
use crate::numeric::{linear_fit, logspace, CubicSpline, GaussLegendre};
use crate::radiometry::{planck_truncation, planck_unchecked, planck_window};
use crate::specfun::{bessel_set, cylinder_batch, cylinder_batch_scaled, CylinderBatch};

type C = Complex64;

/// Division that stays finite when |b| exceeds sqrt(f64::MAX).
#[inline]
fn cdiv(a: C, b: C) -> C {
    if b.re.abs() >= b.im.abs() {
        let r = b.im / b.re;
        let d = b.re + b.im * r;
        C::new((a.re + a.im * r) / d, (a.im - a.re * r) / d)
    } else {
        let r = b.re / b.im;
        let d = b.re * r + b.im;
        C::new((a.re * r + a.im) / d, (a.im * r - a.re) / d)
    }
}

/// T-matrix elements at one (l, ξ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TMatrixBlock {
    pub l: i32,
    pub xi: f64,
    pub t_perp: C,
    pub t_par: C,
    /// T^{⊥∥} = T^{∥⊥}
    pub t_cross: C,
}

impl TMatrixBlock {
    /// Re T_PP + |T_PP|² + |T_PP̄|² for P = ⊥ and P = ∥.
    pub fn unitarity_residuals(&self) -> (f64, f64) {
        let c = self.t_cross.norm_sqr();
        (
            self.t_perp.re + self.t_perp.norm_sqr() + c,
            self.t_par.re + self.t_par.norm_sqr() + c,
        )
    }

    /// Sum of both residuals; minus the absorbed fraction summed over P.
    pub fn bracket(&self) -> f64 {
        let (a, b) = self.unitarity_residuals();
        a + b
    }

    /// Same sum with the polarization labels exchanged.
    pub fn bracket_swapped(&self) -> f64 {
        let swapped = TMatrixBlock {
            t_perp: self.t_par,
            t_par: self.t_perp,
            ..*self
        };
        swapped.bracket()
    }
}

/// Per-(ν, ε) quantities shared by all (l, ξ).
#[derive(Debug, Clone, Copy)]
struct Medium {
    eps: C,
    sqrt_eps: C,
}

impl Medium {
    fn new(eps: C) -> Self {
        Medium {
            eps,
            sqrt_eps: eps.sqrt(),
        }
    }
}

/// Core T-matrix formula from the cylinder functions at one order.
///
/// `j, dj, h, dh` are J_l, J_l', H1_l, H1_l' at x (outside), `j1, dj1` are
/// J_l, J_l' at x₁ (inside). Products J·Δ₃, J·Δ₄ are formed directly so
/// that zeros of J(x) cause no trouble.
#[allow(clippy::too_many_arguments)]
#[inline]
fn t_block(
    l: i32,
    xi: f64,
    m: Medium,
    x: f64,
    x1: C,
    j: C,
    dj: C,
    h: C,
    dh: C,
    j1: C,
    dj1: C,
) -> TMatrixBlock {
    let d = cdiv(dj1, x1 * j1);
    let hr = cdiv(dh, h * x);
    let d1 = d - hr / m.eps;
    let d2 = d - hr;
    let djx = dj / x;
    let jd3 = j * d - djx / m.eps;
    let jd4 = j * d - djx;
    let k = (l as f64) * xi / m.sqrt_eps * (1.0 / (x1 * x1) - 1.0 / (x * x));
    let k2 = k * k;
    let den = d1 * d2 - k2;
    let inv_h = cdiv(C::new(1.0, 0.0), h);
    let t_perp = -cdiv(inv_h * (d1 * jd4 - j * k2), den);
    let t_par = -cdiv(inv_h * (d2 * jd3 - j * k2), den);
    let inv_xh = inv_h / x;
    let t_cross = cdiv(2.0 * C::i() * k * inv_xh * inv_xh, PI * m.sqrt_eps * den);
    TMatrixBlock {
        l,
        xi,
        t_perp,
        t_par,
        t_cross,
    }
}

fn dimensionless_args(xi: f64, k0a: f64, eps: C) -> (f64, C) {
    let x = k0a * (1.0 - xi * xi).sqrt();
    let x1 = k0a * (eps - xi * xi).sqrt();
    (x, x1)
}

/// T-matrix elements for angular index `l`, axial cosine `xi`, frequency
/// `nu` [Hz], radius `a` [m] and relative permittivity `eps` (μ = 1).
pub fn t_matrix(l: i32, xi: f64, nu: f64, a: f64, eps: C) -> Result<TMatrixBlock> {
    if !(xi.abs() < 1.0) {
        return Err(Error::Domain(format!("axial cosine ξ = {xi} outside (-1, 1)")));
    }
    if !(a > 0.0 && nu > 0.0) {
        return Err(Error::Domain(format!("need a > 0 and ν > 0 (a = {a}, ν = {nu})")));
    }
    if !(eps.re.is_finite() && eps.im.is_finite() && eps.im >= 0.0) {
        return Err(Error::Domain(format!("permittivity {eps} must be finite with Im ε ≥ 0")));
    }
    let k0a = 2.0 * PI * nu / C0 * a;
    t_matrix_dimensionless(l, xi, k0a, eps)
        .with_context(|| format!("T-matrix at l = {l}, ξ = {xi}, ν = {nu:e} Hz"))
}

/// As [`t_matrix`] with the size parameter k₀a given directly.
pub fn t_matrix_dimensionless(l: i32, xi: f64, k0a: f64, eps: C) -> Result<TMatrixBlock> {
    let (x, x1) = dimensionless_args(xi, k0a, eps);
    let o = bessel_set(l, C::new(x, 0.0))?;
    let i = bessel_set(l, x1)?;
    Ok(t_block(
        l,
        xi,
        Medium::new(eps),
        x,
        x1,
        o.j,
        o.dj,
        o.h1,
        o.dh1,
        i.j,
        i.dj,
    ))
}

/// Settings for the (l, ξ) summation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissivityOptions {
    /// Relative agreement required between successive ξ-rule orders.
    pub xi_rtol: f64,
    /// Absolute floor on the same test, in emissivity units.
    pub xi_atol: f64,
    pub xi_min_nodes: usize,
    pub xi_max_nodes: usize,
    /// Bound on the neglected l-tail relative to the mode sum.
    pub l_tail_rtol: f64,
    /// Temperature range [K] whose Planck spectra weight the absolute floor.
    /// With a range set, `xi_atol` bounds the error of ε(ν) times the
    /// largest fraction of σT⁴ per unit ln ν at that frequency, so spectral
    /// regions that carry no power are not resolved to full precision.
    pub planck_weight: Option<(f64, f64)>,
}

impl EmissivityOptions {
    /// Options weighted by the temperature range a grid was built for.
    pub fn for_grid(grid: &FrequencyGrid) -> Self {
        EmissivityOptions {
            planck_weight: grid.temperature_range(),
            ..Self::default()
        }
    }

    /// Absolute tolerance in emissivity units at frequency `nu`.
    pub fn absolute_tolerance(&self, nu: f64) -> f64 {
        match self.planck_weight {
            None => self.xi_atol,
            Some((t_lo, t_hi)) => {
                let s = H_PLANCK * nu / K_B;
                let x_lo = s / t_hi;
                let x_hi = s / t_lo;
                // x⁴/(eˣ-1) peaks at x ≈ 3.9207
                let x = 3.920_690_395_f64.clamp(x_lo, x_hi);
                let w = if x > 700.0 {
                    0.0
                } else {
                    x.powi(4) / x.exp_m1() / (PI.powi(4) / 15.0)
                };
                (self.xi_atol / w).min(1.0)
            }
        }
    }

    /// Short text form used in cache metadata.
    pub fn fingerprint(&self) -> String {
        let w = match self.planck_weight {
            None => "none".to_string(),
            Some((a, b)) => format!("{}-{}", format_num(a), format_num(b)),
        };
        format!(
            "rtol={} atol={} nodes={}..{} ltail={} weight={}",
            format_num(self.xi_rtol),
            format_num(self.xi_atol),
            self.xi_min_nodes,
            self.xi_max_nodes,
            format_num(self.l_tail_rtol),
            w
        )
    }
}

impl Default for EmissivityOptions {
    fn default() -> Self {
        EmissivityOptions {
            xi_rtol: 1e-5,
            xi_atol: 1e-8,
            xi_min_nodes: 16,
            xi_max_nodes: 1024,
            l_tail_rtol: 1e-6,
            planck_weight: None,
        }
    }
}

/// One emissivity value with the resolution it needed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissivitySample {
    pub emissivity: f64,
    pub l_max: usize,
    pub xi_nodes: usize,
}

fn l_cap(x: f64, x1: C) -> usize {
    let s = x.max(x1.norm());
    (s + 4.0 * s.cbrt() + 20.0).ceil() as usize
}

/// S(0) + 2 Σ_{l≥1} S(l) at one ξ, where S is the bracket summed over P.
/// Returns the sum and the highest l that contributed.
pub fn mode_sum(xi: f64, k0a: f64, eps: C, tail_rtol: f64) -> Result<(f64, usize)> {
    let (x, x1) = dimensionless_args(xi, k0a, eps);
    let m = Medium::new(eps);
    let mut cap = l_cap(x, x1);
    for _ in 0..3 {
        let outer = cylinder_batch(cap, C::new(x, 0.0), true)?;
        // only J'/J is needed inside, which survives large Im x₁
        let inner = cylinder_batch_scaled(cap, x1)?;
        let (sum, used, tail) = sum_batches(xi, m, x, &outer, &inner);
        let truncated = used + 1 < cap;
        if truncated || tail.abs() <= tail_rtol * sum.abs() || sum == 0.0 {
            return Ok((sum, used));
        }
        cap *= 2;
    }
    Err(Error::NonConvergence(format!(
        "mode sum at ξ = {xi}, k₀a = {k0a} not converged by l_max = {}",
        cap / 2
    )))
}

/// Returns (total, last l used, contribution of the last five orders).
fn sum_batches(xi: f64, m: Medium, x: f64, outer: &CylinderBatch, inner: &CylinderBatch) -> (f64, usize, f64) {
    let n = outer.len().min(inner.len());
    let mut total = 0.0;
    let mut tail = 0.0;
    let mut used = 0;
    for l in 0..n {
        let b = t_block(
            l as i32,
            xi,
            m,
            x,
            inner.x,
            outer.j[l],
            outer.dj[l],
            outer.h1[l],
            outer.dh1[l],
            inner.j[l],
            inner.dj[l],
        );
        let s = b.bracket();
        if !s.is_finite() {
            break;
        }
        let w = if l == 0 { 1.0 } else { 2.0 };
        total += w * s;
        used = l;
        if l + 5 >= n {
            tail += w * s;
        }
    }
    (total, used, tail)
}

/// ∫₀¹ dξ of the mode sum at one GL order, via ξ = sin φ.
fn xi_integral(k0a: f64, eps: C, nodes: usize, tail_rtol: f64) -> Result<(f64, usize)> {
    let g = GaussLegendre::new(nodes);
    let mut total = 0.0;
    let mut lmax = 0;
    for (phi, w) in g.mapped(0.0, 0.5 * PI) {
        let (s, l) = mode_sum(phi.sin(), k0a, eps, tail_rtol)?;
        total += w * phi.cos() * s;
        lmax = lmax.max(l);
    }
    Ok((total, lmax))
}

/// Spectral emissivity for size parameter k₀a and permittivity ε.
///
/// Gauss-Legendre orders double from `xi_min_nodes` up to `xi_max_nodes`.
/// Near-lossless bands of thick cylinders carry whispering-gallery
/// resonances far narrower than any fixed rule resolves; if doubling stalls,
/// the integral is redone by adaptive Gauss-Kronrod subdivision, which
/// concentrates nodes on the peaks.
pub fn emissivity_dimensionless(k0a: f64, eps: C, opts: &EmissivityOptions) -> Result<EmissivitySample> {
    let scale = -4.0 / (PI * k0a);
    let mut n = opts.xi_min_nodes.max(2);
    let (mut prev, mut lmax) = xi_integral(k0a, eps, n, opts.l_tail_rtol)?;
    let (mut diff, mut val) = (f64::INFINITY, 0.0);
    while 2 * n <= opts.xi_max_nodes {
        let m = 2 * n;
        let (cur, l) = xi_integral(k0a, eps, m, opts.l_tail_rtol)?;
        lmax = lmax.max(l);
        diff = ((cur - prev) * scale).abs();
        val = cur * scale;
        if diff <= opts.xi_rtol * val.abs() + opts.xi_atol {
            return Ok(EmissivitySample {
                emissivity: val.max(0.0),
                l_max: lmax,
                xi_nodes: m,
            });
        }
        prev = cur;
        n = m;
    }
    let mut evals = 0usize;
    let mut failure: Option<Error> = None;
    let adaptive = crate::numeric::integrate_adaptive(
        |phi: f64| {
            evals += 1;
            match mode_sum(phi.sin(), k0a, eps, opts.l_tail_rtol) {
                Ok((s, l)) => {
                    lmax = lmax.max(l);
                    s * phi.cos()
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        0.5 * PI,
        opts.xi_rtol,
        opts.xi_atol / scale.abs(),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    match adaptive {
        Ok(v) => Ok(EmissivitySample {
            emissivity: (v * scale).max(0.0),
            l_max: lmax,
            xi_nodes: n.max(evals),
        }),
        Err(_) => Err(Error::NonConvergence(format!(
            "ξ integral at k₀a = {k0a}, ε = {eps} not converged with {n} Gauss-Legendre nodes \
             (change {diff:.2e} on {val:.3e}) nor by adaptive subdivision; l_max = {lmax}"
        ))),
    }
}

/// Spectral hemispherical emissivity of a cylinder of radius `a` at `nu`.
pub fn cylinder_spectral_emissivity(
    nu: f64,
    a: f64,
    table: &RefractiveIndexTable,
    corner: CornerSelector,
    opts: &EmissivityOptions,
) -> Result<EmissivitySample> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("cylinder radius must be positive, got {a}")));
    }
    let eps = table.dielectric_at(C0 / nu, corner)?;
    let k0a = 2.0 * PI * nu / C0 * a;
    let local = EmissivityOptions {
        xi_atol: opts.absolute_tolerance(nu),
        planck_weight: None,
        ..*opts
    };
    emissivity_dimensionless(k0a, eps, &local)
        .with_context(|| format!("emissivity at ν = {nu:e} Hz, a = {a:e} m, corner {corner}"))
}

/// Log-spaced frequency nodes covering the Planck windows of a temperature
/// range, clipped to the optical table.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub nu: Vec<f64>,
    hash: String,
    temps: Option<(f64, f64)>,
}

/// Default node density of [`FrequencyGrid`].
pub const NODES_PER_DECADE: f64 = 160.0;
/// Tolerated Planck fraction outside a frequency grid.
pub const GRID_TAIL_TOLERANCE: f64 = 1e-5;

impl FrequencyGrid {
    pub fn from_nodes(nu: Vec<f64>) -> Result<Self> {
        if nu.len() < 2 || nu.windows(2).any(|w| !(w[1] > w[0])) || !(nu[0] > 0.0) {
            return Err(Error::Domain("frequency grid must be positive and increasing".into()));
        }
        let text: Vec<String> = nu.iter().map(|v| format_num(*v)).collect();
        let hash = sha256_hex(text.join(",").as_bytes());
        Ok(FrequencyGrid {
            nu,
            hash,
            temps: None,
        })
    }

    /// Union of the Planck windows for T ∈ [t_lo, t_hi], clipped to the table;
    /// fails if the clipped tails exceed `tail_tol` of σT⁴ at either end.
    pub fn for_temperatures(
        t_lo: f64,
        t_hi: f64,
        table: &RefractiveIndexTable,
        per_decade: f64,
        tail_tol: f64,
    ) -> Result<Self> {
        if !(t_lo > 0.0 && t_hi >= t_lo) {
            return Err(Error::Domain(format!("bad temperature range [{t_lo}, {t_hi}]")));
        }
        let (c_lo, c_hi) = table.frequency_coverage();
        let lo = planck_window(t_lo).0.max(c_lo);
        let hi = planck_window(t_hi).1.min(c_hi);
        for t in [t_lo, t_hi] {
            let missing = planck_truncation(t, lo, hi);
            if missing > tail_tol {
                return Err(Error::Coverage {
                    what: "frequency (Hz) for the Planck window",
                    value: if planck_window(t).0 < c_lo { c_lo } else { c_hi },
                    lo: planck_window(t).0,
                    hi: planck_window(t).1,
                })
                .with_context(|| format!("T = {t} K loses {missing:.2e} of σT⁴"));
            }
        }
        let n = ((hi / lo).log10() * per_decade).ceil() as usize + 1;
        let mut grid = Self::from_nodes(logspace(lo, hi, n.max(2)))?;
        grid.temps = Some((t_lo, t_hi));
        Ok(grid)
    }

    /// Temperature range the grid was built for, if any.
    pub fn temperature_range(&self) -> Option<(f64, f64)> {
        self.temps
    }

    /// Content hash of the node list.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn range(&self) -> (f64, f64) {
        (self.nu[0], *self.nu.last().unwrap())
    }
}

/// Emissivity spectrum of one cylinder radius and corner.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmissivity {
    pub radius: f64,
    pub corner: CornerSelector,
    pub nu: Vec<f64>,
    pub emissivity: Vec<f64>,
    /// Highest angular index that contributed anywhere on the grid.
    pub l_max: usize,
    /// Largest ξ-rule order needed anywhere on the grid.
    pub xi_nodes: usize,
    pub grid_hash: String,
    pub table_hash: String,
}

impl SpectralEmissivity {
    pub fn compute(
        radius: f64,
        table: &RefractiveIndexTable,
        corner: CornerSelector,
        grid: &FrequencyGrid,
        opts: &EmissivityOptions,
    ) -> Result<Self> {
        let samples = grid
            .nu
            .par_iter()
            .map(|&nu| cylinder_spectral_emissivity(nu, radius, table, corner, opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectralEmissivity {
            radius,
            corner,
            nu: grid.nu.clone(),
            emissivity: samples.iter().map(|s| s.emissivity).collect(),
            l_max: samples.iter().map(|s| s.l_max).max().unwrap_or(0),
            xi_nodes: samples.iter().map(|s| s.xi_nodes).max().unwrap_or(0),
            grid_hash: grid.hash().to_string(),
            table_hash: table.content_hash(),
        })
    }

    /// Emitted power per unit length at `temp`, ∫ ε P_ν 2πa dν [W/m].
    pub fn gross_power_per_length(&self, temp: f64) -> Result<f64> {
        if !(temp > 0.0) {
            return Err(Error::Domain(format!("temperature must be positive, got {temp}")));
        }
        let lo = self.nu[0];
        let hi = *self.nu.last().unwrap();
        let missing = planck_truncation(temp, lo, hi);
        if missing > GRID_TAIL_TOLERANCE {
            let (w_lo, w_hi) = planck_window(temp);
            return Err(Error::Coverage {
                what: "emissivity spectrum frequency (Hz)",
                value: if w_lo < lo { lo } else { hi },
                lo: w_lo,
                hi: w_hi,
            })
            .with_context(|| format!("T = {temp} K loses {missing:.2e} of σT⁴"));
        }
        // trapezoid in ln ν
        let f = |i: usize| self.emissivity[i] * planck_unchecked(self.nu[i], temp) * self.nu[i];
        let mut s = 0.0;
        for i in 1..self.nu.len() {
            s += 0.5 * (f(i) + f(i - 1)) * (self.nu[i] / self.nu[i - 1]).ln();
        }
        Ok(s * 2.0 * PI * self.radius)
    }

    /// Net exchange per unit length with surroundings at `ambient` [W/m].
    pub fn power_per_length(&self, temp: f64, ambient: f64) -> Result<f64> {
        Ok(self.gross_power_per_length(temp)? - self.gross_power_per_length(ambient)?)
    }

    pub fn power_curve(&self, temps: &[f64], ambient: f64) -> Result<RadiatedPowerCurve> {
        let h0 = self.gross_power_per_length(ambient)?;
        let power = temps
            .iter()
            .map(|&t| Ok(self.gross_power_per_length(t)? - h0))
            .collect::<Result<Vec<_>>>()?;
        Ok(RadiatedPowerCurve {
            radius: self.radius,
            corner: self.corner,
            temps: temps.to_vec(),
            power,
        })
    }
}

/// Net radiated power per unit length on a temperature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiatedPowerCurve {
    pub radius: f64,
    pub corner: CornerSelector,
    pub temps: Vec<f64>,
    pub power: Vec<f64>,
}

impl RadiatedPowerCurve {
    /// Least-squares exponent p of P ∝ T^p over temperatures in [t_lo, t_hi].
    pub fn exponent(&self, t_lo: f64, t_hi: f64) -> Result<f64> {
        power_law_exponent(&self.temps, &self.power, t_lo, t_hi)
    }
}

/// Least-squares slope of ln P against ln T over [t_lo, t_hi].
pub fn power_law_exponent(temps: &[f64], power: &[f64], t_lo: f64, t_hi: f64) -> Result<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = temps
        .iter()
        .zip(power)
        .filter(|(t, p)| **t >= t_lo && **t <= t_hi && **p > 0.0)
        .map(|(t, p)| (t.ln(), p.ln()))
        .unzip();
    if lx.len() < 2 {
        return Err(Error::Domain(format!(
            "need two positive samples in [{t_lo}, {t_hi}] K for an exponent fit"
        )));
    }
    Ok(linear_fit(&lx, &ly).0)
}

/// Net radiated power per unit length of a cylinder at T with surroundings
/// at T₀, through a frequency grid spanning both temperatures.
pub fn cylinder_radiated_power_per_length(
    temp: f64,
    ambient: f64,
    a: f64,
    table: &RefractiveIndexTable,
    corner: CornerSelector,
) -> Result<f64> {
    if !(temp > 0.0 && ambient > 0.0) {
        return Err(Error::Domain("cylinder power needs T, T0 > 0".into()));
    }
    let grid = FrequencyGrid::for_temperatures(
        temp.min(ambient),
        temp.max(ambient),
        table,
        NODES_PER_DECADE,
        GRID_TAIL_TOLERANCE,
    )?;
    let spec = SpectralEmissivity::compute(a, table, corner, &grid, &EmissivityOptions::for_grid(&grid))?;
    spec.power_per_length(temp, ambient)
}

/// Relative change of the emitted power when every k is raised by `k_eff`.
pub fn pollutant_deviation(
    a: f64,
    table: &RefractiveIndexTable,
    corner: CornerSelector,
    k_eff: f64,
    temp: f64,
) -> Result<f64> {
    if !(k_eff >= 0.0) {
        return Err(Error::Domain(format!("k_eff must be ≥ 0, got {k_eff}")));
    }
    if k_eff == 0.0 {
        return Ok(0.0);
    }
    let grid = FrequencyGrid::for_temperatures(temp, temp, table, NODES_PER_DECADE, GRID_TAIL_TOLERANCE)?;
    let opts = EmissivityOptions::for_grid(&grid);
    let clean = SpectralEmissivity::compute(a, table, corner, &grid, &opts)?;
    let dirty_table = table.with_extra_k(k_eff)?;
    let dirty = SpectralEmissivity::compute(a, &dirty_table, corner, &grid, &opts)?;
    pollutant_deviation_from(&clean, &dirty, temp)
}

/// Same comparison from two precomputed spectra.
pub fn pollutant_deviation_from(
    clean: &SpectralEmissivity,
    dirty: &SpectralEmissivity,
    temp: f64,
) -> Result<f64> {
    if clean.grid_hash != dirty.grid_hash || clean.radius != dirty.radius {
        return Err(Error::CacheMismatch(
            "pollutant comparison needs spectra on the same grid and radius".into(),
        ));
    }
    let h = clean.gross_power_per_length(temp)?;
    let hp = dirty.gross_power_per_length(temp)?;
    Ok((hp - h) / h)
}

/// Gross emitted power per unit length tabulated over radius and
/// temperature, interpolated along the taper in ln a (cubic spline of ln H).
#[derive(Debug, Clone)]
pub struct RadiusPowerModel {
    pub radii: Vec<f64>,
    pub temps: Vec<f64>,
    /// `gross[i][j]`: radius i, temperature j [W/m].
    pub gross: Vec<Vec<f64>>,
    splines: Vec<CubicSpline>,
}

impl RadiusPowerModel {
    pub fn from_spectra(spectra: &[SpectralEmissivity], temps: &[f64]) -> Result<Self> {
        let mut sorted: Vec<&SpectralEmissivity> = spectra.iter().collect();
        sorted.sort_by(|a, b| a.radius.total_cmp(&b.radius));
        let gross = sorted
            .iter()
            .map(|s| {
                temps
                    .iter()
                    .map(|&t| s.gross_power_per_length(t))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_table(sorted.iter().map(|s| s.radius).collect(), temps.to_vec(), gross)
    }

    pub fn from_table(radii: Vec<f64>, temps: Vec<f64>, gross: Vec<Vec<f64>>) -> Result<Self> {
        if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("radius model needs ≥ 2 increasing radii".into()));
        }
        if gross.len() != radii.len() || gross.iter().any(|g| g.len() != temps.len()) {
            return Err(Error::Domain("radius model table has the wrong shape".into()));
        }
        let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let splines = (0..temps.len())
            .map(|j| {
                let ly = gross.iter().map(|g| g[j].max(1e-300).ln()).collect();
                CubicSpline::new(lx.clone(), ly)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RadiusPowerModel {
            radii,
            temps,
            gross,
            splines,
        })
    }

    /// Gross power on the temperature grid at radius `a`.
    pub fn gross_at(&self, a: f64) -> Result<Vec<f64>> {
        let lo = self.radii[0];
        let hi = *self.radii.last().unwrap();
        // tolerate rounding at the ends of the tabulated range
        if !(a >= lo * (1.0 - 1e-9) && a <= hi * (1.0 + 1e-9)) {
            return Err(Error::Coverage {
                what: "radius (m) for the tabulated emission model",
                value: a,
                lo,
                hi,
            });
        }
        let la = a.ln();
        Ok(self.splines.iter().map(|s| s.eval(la).exp()).collect())
    }

    /// Largest relative deviation between the interpolated table and a
    /// directly computed spectrum at its radius.
    pub fn probe_error(&self, direct: &SpectralEmissivity) -> Result<f64> {
        let interp = self.gross_at(direct.radius)?;
        let mut worst: f64 = 0.0;
        for (t, v) in self.temps.iter().zip(interp) {
            let d = direct.gross_power_per_length(*t)?;
            worst = worst.max((v / d - 1.0).abs());
        }
        Ok(worst)
    }
}
