//! Taper geometry and the guided-optics readout chain.
//!
//! The fiber is a silica rod in vacuum (the original core is ignored). Its
//! fundamental HE11 mode supplies two things: the surface intensity that
//! shapes the heating along the taper, and the effective index whose
//! temperature dependence turns a temperature field into an optical path
//! length change.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use crate::error::{Context, Error, Result};
use crate::io::{parse_numeric_rows, CsvTable};
use crate::materials::SilicaThermalProperties;
use crate::numeric::{brent_root, GaussLegendre};
use crate::specfun::{bessel_j01_real, bessel_k01_scaled_real};

/// Probe wavelength [m].
pub const PROBE_WAVELENGTH: f64 = 852e-9;
/// Silica index at the probe wavelength and room temperature.
pub const SILICA_INDEX_852: f64 = 1.4525;
/// Optical path change per transmission peak, λ₀/2 [m].
pub const PEAK_SPACING: f64 = PROBE_WAVELENGTH / 2.0;
/// First zero of J_0; the HE11 transverse parameter U stays below it.
const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

/// Taper construction parameters. Angles are radius slopes dr/dz.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaperParameters {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub r1: f64,
    pub r2: f64,
    pub waist_radius: f64,
    pub waist_length: f64,
    pub cladding_radius: f64,
    /// Scale of the exponential section a = a_w exp(s / L_exp).
    pub exp_length: f64,
    /// Axial cell size [m].
    pub dz: f64,
    /// Simulated length beyond each end of the waist [m].
    pub margin: f64,
}

impl TaperParameters {
    /// Resonator #1: 10 mm waist.
    pub fn tof1() -> Self {
        TaperParameters {
            theta1: 5e-3,
            theta2: 2e-3,
            theta3: 4e-3,
            r1: 40e-6,
            r2: 15e-6,
            waist_radius: 250e-9,
            waist_length: 10e-3,
            cladding_radius: 62.5e-6,
            exp_length: 3.338e-3,
            dz: 1e-4,
            margin: 10e-3,
        }
    }

    /// Resonator #2: 5 mm waist, otherwise as #1.
    pub fn tof2() -> Self {
        TaperParameters {
            waist_length: 5e-3,
            ..Self::tof1()
        }
    }

    /// All radii and slopes multiplied by `f`; the profile scales pointwise.
    pub fn scaled(&self, f: f64) -> Self {
        TaperParameters {
            theta1: self.theta1 * f,
            theta2: self.theta2 * f,
            theta3: self.theta3 * f,
            r1: self.r1 * f,
            r2: self.r2 * f,
            waist_radius: self.waist_radius * f,
            cladding_radius: self.cladding_radius * f,
            ..*self
        }
    }

    /// Radius where the exponential section hands over to the Θ₃ slope
    /// (slopes match there).
    pub fn r3(&self) -> f64 {
        self.theta3 * self.exp_length
    }

    pub fn simulated_length(&self) -> f64 {
        self.waist_length + 2.0 * self.margin
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("taper: {m}")));
        for (name, v) in [
            ("theta1", self.theta1),
            ("theta2", self.theta2),
            ("theta3", self.theta3),
            ("exp_length", self.exp_length),
            ("waist_length", self.waist_length),
            ("dz", self.dz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.margin >= 0.0) {
            return bad(format!("margin must be ≥ 0, got {}", self.margin));
        }
        if !(self.cladding_radius > self.r1
            && self.r1 > self.r2
            && self.r2 > self.waist_radius
            && self.waist_radius > 0.0)
        {
            return bad(format!(
                "need r_clad > r1 > r2 > a_waist > 0 (got {}, {}, {}, {})",
                self.cladding_radius, self.r1, self.r2, self.waist_radius
            ));
        }
        let r3 = self.r3();
        if !(r3 > self.waist_radius && r3 < self.r2) {
            return bad(format!(
                "exponential section ends at Θ₃·L_exp = {r3:e} m, which must lie between \
                 a_waist and r2"
            ));
        }
        let cells = self.simulated_length() / self.dz;
        if (cells - cells.round()).abs() > 1e-6 * cells || cells.round() < 3.0 {
            return bad(format!(
                "simulated length {} m is not a whole number (≥ 3) of cells of {} m",
                self.simulated_length(),
                self.dz
            ));
        }
        Ok(())
    }

    /// Radius at axial distance `s` ≥ 0 from the waist center.
    pub fn radius_at(&self, s: f64) -> f64 {
        let s = s.abs();
        let half = 0.5 * self.waist_length;
        if s <= half {
            return self.waist_radius;
        }
        let mut u = s - half;
        let r3 = self.r3();
        let u_exp = self.exp_length * (r3 / self.waist_radius).ln();
        if u <= u_exp {
            return self.waist_radius * (u / self.exp_length).exp();
        }
        u -= u_exp;
        let sections = [
            (r3, self.r2, self.theta3),
            (self.r2, self.r1, self.theta2),
            (self.r1, self.cladding_radius, self.theta1),
        ];
        for (from, to, slope) in sections {
            let len = (to - from) / slope;
            if u <= len {
                return from + slope * u;
            }
            u -= len;
        }
        self.cladding_radius
    }
}

impl Default for TaperParameters {
    fn default() -> Self {
        Self::tof1()
    }
}

/// Radius on a uniform cell-centered grid centered on the waist.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusProfile {
    pub z: Vec<f64>,
    pub a: Vec<f64>,
    pub dz: f64,
}

impl RadiusProfile {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn scaled(&self, f: f64) -> Self {
        RadiusProfile {
            z: self.z.clone(),
            a: self.a.iter().map(|a| a * f).collect(),
            dz: self.dz,
        }
    }

    pub fn min_radius(&self) -> f64 {
        self.a.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_radius(&self) -> f64 {
        self.a.iter().cloned().fold(0.0, f64::max)
    }

    /// Index of the cell nearest the waist center.
    pub fn center_index(&self) -> usize {
        self.z
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["z_m", "a_m"]);
        for (z, a) in self.z.iter().zip(&self.a) {
            t.push(&[*z, *a]);
        }
        t
    }

    /// Read a (z, a) table; z must be uniform.
    pub fn from_csv(text: &str) -> Result<Self> {
        let (_, rows) = parse_numeric_rows(text, 2)?;
        if rows.len() < 3 {
            return Err(Error::Parse {
                row: rows.len(),
                msg: "a radius profile needs at least 3 rows".into(),
            });
        }
        let z: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let a: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let dz = z[1] - z[0];
        for (i, w) in z.windows(2).enumerate() {
            if !(((w[1] - w[0]) - dz).abs() <= 1e-6 * dz.abs()) || !(dz > 0.0) {
                return Err(Error::Parse {
                    row: i + 2,
                    msg: "z must be increasing with uniform spacing".into(),
                });
            }
        }
        if let Some(i) = a.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Invariant {
                row: i + 1,
                field: "a_m".into(),
                msg: "radius must be positive".into(),
            });
        }
        Ok(RadiusProfile { z, a, dz })
    }
}

/// Sample the taper on its simulation grid.
pub fn build_radius_profile(p: &TaperParameters) -> Result<RadiusProfile> {
    p.validate()?;
    let l = p.simulated_length();
    let n = (l / p.dz).round() as usize;
    let z: Vec<f64> = (0..n).map(|i| -0.5 * l + (i as f64 + 0.5) * p.dz).collect();
    let a = z.iter().map(|&z| p.radius_at(z)).collect();
    Ok(RadiusProfile { z, a, dz: p.dz })
}

/// HE11 mode of a silica rod in vacuum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSolution {
    pub a: f64,
    pub n: f64,
    pub lambda0: f64,
    pub v: f64,
    /// Transverse parameters U = a√(k₀²n² − β²), W = a√(β² − k₀²).
    pub u: f64,
    pub w: f64,
    pub beta: f64,
    pub n_eff: f64,
    /// Circumference × surface intensity per unit guided power [1/m].
    pub s_surf: f64,
    /// Share of the guided power carried inside the glass.
    pub inside_fraction: f64,
}

/// Log-derivative ratios J₁'(U)/(U J₁(U)) and K₁'(W)/(W K₁(W)).
fn he11_ratios(u: f64, w: f64) -> Result<(f64, f64)> {
    let (j0, j1) = bessel_j01_real(u)?;
    let (k0, k1) = bessel_k01_scaled_real(w)?;
    let jr = (j0 - j1 / u) / (u * j1);
    let kr = (-k0 - k1 / w) / (w * k1);
    Ok((jr, kr))
}

/// n_eff − 1 from the transverse parameters, free of cancellation.
fn neff_excess(w: f64, v: f64, n: f64) -> f64 {
    let neff2_minus_1 = (n * n - 1.0) * (w / v) * (w / v);
    neff2_minus_1 / (1.0 + (1.0 + neff2_minus_1).sqrt())
}

/// Characteristic function of the HE11 family for a step-index rod of
/// index `n` in vacuum at normalized frequency `v`, parametrized by W.
///
/// The textbook form (J + K)(n² J + K) = n_eff² (1/U² + 1/W²)² (J, K the
/// log-derivative ratios of J₁(U) and K₁(W)) loses all precision for thin
/// rods, where both sides grow like W⁻⁴. With A = J₀/(U J₁),
/// B = K₀/(W K₁) and M = V²/(U² W²) the leading terms cancel exactly and
/// what remains is (A − B)(n² A − B)/M = (n² A − B) + n_eff² (A − B).
pub fn he11_characteristic(w: f64, v: f64, n: f64) -> Result<f64> {
    let u = ((v - w) * (v + w)).sqrt();
    let (j0, j1) = bessel_j01_real(u)?;
    let (k0, k1) = bessel_k01_scaled_real(w)?;
    let a = j0 / (u * j1);
    let b = k0 / (w * k1);
    let inv_m = (u * w / v) * (u * w / v);
    let neff2 = 1.0 + (n * n - 1.0) * (w / v) * (w / v);
    Ok((a - b) * (n * n * a - b) * inv_m - (n * n * a - b) - neff2 * (a - b))
}

/// Solve for the HE11 mode of radius `a`, index `n` at vacuum wavelength
/// `lambda0`.
pub fn solve_he11(a: f64, n: f64, lambda0: f64) -> Result<ModeSolution> {
    Ok(solve_he11_excess(a, n, lambda0)?.0)
}

/// Mode plus n_eff − 1 at full relative precision.
fn solve_he11_excess(a: f64, n: f64, lambda0: f64) -> Result<(ModeSolution, f64)> {
    if !(a > 0.0 && n > 1.0 && lambda0 > 0.0) {
        return Err(Error::Domain(format!(
            "HE11 needs a > 0, n > 1, λ₀ > 0 (a = {a}, n = {n}, λ₀ = {lambda0})"
        )));
    }
    let k0 = 2.0 * PI / lambda0;
    let v = k0 * a * (n * n - 1.0).sqrt();
    // U < j₀₁ bounds W from below for thick rods
    let w_lo = if v > J0_FIRST_ZERO {
        ((v - J0_FIRST_ZERO) * (v + J0_FIRST_ZERO)).sqrt() * (1.0 + 1e-12)
    } else {
        1e-300
    };
    let (x_lo, x_hi) = (w_lo.ln(), (v * (1.0 - 1e-9)).ln());
    let f = |x: f64| he11_characteristic(x.exp(), v, n).unwrap_or(f64::NAN);
    // dense scan in ln W upwards (U downwards), first sign change
    let steps = 2000;
    let mut prev_x = x_lo;
    let mut prev = f(x_lo);
    let mut bracket = None;
    for i in 1..=steps {
        let x = x_lo + (x_hi - x_lo) * i as f64 / steps as f64;
        let cur = f(x);
        if prev.is_finite() && cur.is_finite() && prev.signum() != cur.signum() {
            bracket = Some((prev_x, x));
            break;
        }
        prev_x = x;
        prev = cur;
    }
    let (xa, xb) = bracket.ok_or_else(|| {
        Error::Bracket(format!("no HE11 root found for V = {v}, n = {n}"))
    })?;
    let x = brent_root(f, xa, xb, 1e-14).with_context(|| format!("HE11 root for V = {v}, n = {n}"))?;
    let w = x.exp();
    let u = ((v - w) * (v + w)).sqrt();
    let excess = neff_excess(w, v, n);
    let n_eff = 1.0 + excess;
    let beta = k0 * n_eff;
    let (s_surf, inside_fraction) = surface_intensity(a, n, k0, beta, u, w)?;
    let mode = ModeSolution {
        a,
        n,
        lambda0,
        v,
        u,
        w,
        beta,
        n_eff,
        s_surf,
        inside_fraction,
    };
    Ok((mode, excess))
}

/// Field profile of the HE11 mode (circular polarization, unit amplitude of
/// E_z at the axis scale) used for the surface-intensity ratio.
struct He11Fields {
    a: f64,
    h: f64,
    q: f64,
    beta: f64,
    s: f64,
    s1: f64,
    s0: f64,
    /// J₁(ha)/K₁(qa) with K scaled by e^{qa}
    ratio_scaled: f64,
}

impl He11Fields {
    fn new(a: f64, n: f64, k0: f64, beta: f64, u: f64, w: f64) -> Result<Self> {
        let (jr, kr) = he11_ratios(u, w)?;
        let s = (1.0 / (u * u) + 1.0 / (w * w)) / (jr + kr);
        let (_, j1) = bessel_j01_real(u)?;
        let (_, k1s) = bessel_k01_scaled_real(w)?;
        Ok(He11Fields {
            a,
            h: u / a,
            q: w / a,
            beta,
            s,
            s1: beta * beta * s / (k0 * k0 * n * n),
            s0: beta * beta * s / (k0 * k0),
            ratio_scaled: j1 / k1s,
        })
    }

    fn k012_scaled(x: f64) -> Result<(f64, f64, f64)> {
        let (k0, k1) = bessel_k01_scaled_real(x)?;
        Ok((k0, k1, k0 + 2.0 * k1 / x))
    }

    /// |E|² just outside the surface.
    fn surface_e2(&self) -> Result<f64> {
        let (k0, k1, k2) = Self::k012_scaled(self.q * self.a)?;
        let c = self.ratio_scaled * self.beta / (2.0 * self.q);
        let er = c * ((1.0 - self.s) * k0 + (1.0 + self.s) * k2);
        let ephi = c * ((1.0 - self.s) * k0 - (1.0 + self.s) * k2);
        let ez = self.ratio_scaled * k1;
        Ok(er * er + ephi * ephi + ez * ez)
    }

    /// Guided power divided by (ω ε₀ / 2) · 2π.
    /// Guided power inside and outside the rod, divided by (ω ε₀ / 2) · 2π.
    fn power(&self, n: f64) -> Result<(f64, f64)> {
        let g = GaussLegendre::new(64);
        let mut inside = 0.0;
        for (r, wt) in g.mapped(0.0, self.a) {
            let x = self.h * r;
            let (j0, j1) = bessel_j01_real(x)?;
            let j2 = if x == 0.0 { 0.0 } else { 2.0 * j1 / x - j0 };
            inside += wt
                * r
                * ((1.0 - self.s) * (1.0 - self.s1) * j0 * j0
                    + (1.0 + self.s) * (1.0 + self.s1) * j2 * j2);
        }
        inside *= n * n * self.beta / (4.0 * self.h * self.h) * 2.0;
        let mut outside = 0.0;
        // r = a + t / q; the integrand decays like e^{-2t}
        for (t0, t1) in [(0.0, 0.5), (0.5, 2.0), (2.0, 6.0), (6.0, 16.0), (16.0, 40.0)] {
            for (t, wt) in g.mapped(t0, t1) {
                let r = self.a + t / self.q;
                let (k0, _, k2) = Self::k012_scaled(self.q * r)?;
                // scaled K(qr)/K₁(qa) carries e^{-t}
                let damp = (-2.0 * t).exp();
                outside += wt / self.q
                    * r
                    * damp
                    * ((1.0 - self.s) * (1.0 - self.s0) * k0 * k0
                        + (1.0 + self.s) * (1.0 + self.s0) * k2 * k2);
            }
        }
        outside *= self.ratio_scaled * self.ratio_scaled * self.beta / (4.0 * self.q * self.q) * 2.0;
        Ok((inside, outside))
    }
}

/// (s_surf, fraction of the guided power inside the rod).
fn surface_intensity(a: f64, n: f64, k0: f64, beta: f64, u: f64, w: f64) -> Result<(f64, f64)> {
    let f = He11Fields::new(a, n, k0, beta, u, w)?;
    // I = ½ c ε₀ |E|² and P = 2π ∫ ½ Re(E × H*)_z r dr with H ∝ ω ε₀ = c ε₀ k₀;
    // the common c ε₀ cancels in the ratio
    let e2 = f.surface_e2()?;
    let (inside, outside) = f.power(n)?;
    let p = 2.0 * PI * 0.5 * k0 * (inside + outside);
    Ok((2.0 * PI * a * 0.5 * e2 / p, inside / (inside + outside)))
}

/// ∂n_eff/∂n and ∂n_eff/∂a at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDerivatives {
    pub n_eff: f64,
    pub d_n: f64,
    pub d_a: f64,
}

fn central(f: &dyn Fn(f64) -> Result<f64>, x: f64, h: f64) -> Result<f64> {
    Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
}

/// Central difference with relative step 1e-5 and one Richardson step; the
/// two step sizes must agree to 1e-4 relative.
fn richardson(f: &dyn Fn(f64) -> Result<f64>, x: f64) -> Result<f64> {
    let h = 1e-5 * x.abs();
    let d1 = central(f, x, h)?;
    let d2 = central(f, x, 0.5 * h)?;
    let r = (4.0 * d2 - d1) / 3.0;
    if (d1 - d2).abs() > 1e-4 * r.abs() + 1e-12 / x.abs() {
        return Err(Error::NonConvergence(format!(
            "finite-difference derivative unstable at x = {x} ({d1} vs {d2})"
        )));
    }
    Ok(r)
}

type MemoKey = (u64, u64, u64);

fn memo() -> &'static Mutex<HashMap<MemoKey, ModeDerivatives>> {
    static MEMO: OnceLock<Mutex<HashMap<MemoKey, ModeDerivatives>>> = OnceLock::new();
    MEMO.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Derivatives of n_eff with respect to index and radius, memoized per
/// (a, n, λ₀). Safe to call from several threads.
pub fn mode_derivatives(a: f64, n: f64, lambda0: f64) -> Result<ModeDerivatives> {
    let key = (a.to_bits(), n.to_bits(), lambda0.to_bits());
    if let Some(d) = memo().lock().unwrap().get(&key) {
        return Ok(*d);
    }
    let n_eff = solve_he11(a, n, lambda0)?.n_eff;
    // differentiate n_eff − 1 so thin-rod values keep their digits
    let by_n = |x: f64| solve_he11_excess(a, x, lambda0).map(|m| m.1);
    let by_a = |x: f64| solve_he11_excess(x, n, lambda0).map(|m| m.1);
    let d = ModeDerivatives {
        n_eff,
        d_n: richardson(&by_n, n).with_context(|| format!("∂n_eff/∂n at a = {a:e}"))?,
        d_a: richardson(&by_a, a).with_context(|| format!("∂n_eff/∂a at a = {a:e}"))?,
    };
    memo().lock().unwrap().insert(key, d);
    Ok(d)
}

/// Readout optics: probe wavelength, room-temperature index and the silica
/// coefficients entering dn_eff/dT.
#[derive(Debug, Clone)]
pub struct ReadoutOptics {
    pub lambda0: f64,
    pub n: f64,
    pub props: SilicaThermalProperties,
}

impl Default for ReadoutOptics {
    fn default() -> Self {
        ReadoutOptics {
            lambda0: PROBE_WAVELENGTH,
            n: SILICA_INDEX_852,
            props: SilicaThermalProperties::default(),
        }
    }
}

impl ReadoutOptics {
    /// dn_eff/dT at radius `a` and temperature `temp` [1/K].
    pub fn dneff_dt(&self, a: f64, temp: f64) -> Result<f64> {
        let d = mode_derivatives(a, self.n, self.lambda0)?;
        self.dneff_dt_from(&d, a, temp)
    }

    pub fn dneff_dt_from(&self, d: &ModeDerivatives, a: f64, temp: f64) -> Result<f64> {
        let p = &self.props;
        let alpha = p.expansion(temp);
        let dn_dt = p.dn_dt(temp)?.value;
        Ok(d.d_n * (dn_dt - self.n * alpha * p.strain_optic) + d.d_a * (1.0 + p.poisson) * alpha * a)
    }

    /// Path-length integrator bound to one radius profile.
    pub fn integrator(&self, profile: &RadiusProfile) -> Result<PathIntegrator> {
        let derivs = profile
            .a
            .iter()
            .map(|&a| mode_derivatives(a, self.n, self.lambda0))
            .collect::<Result<Vec<_>>>()?;
        Ok(PathIntegrator {
            optics: self.clone(),
            a: profile.a.clone(),
            dz: profile.dz,
            derivs,
        })
    }
}

/// Precomputed per-cell mode derivatives for fast ΔL_opt evaluation.
#[derive(Debug, Clone)]
pub struct PathIntegrator {
    optics: ReadoutOptics,
    a: Vec<f64>,
    dz: f64,
    derivs: Vec<ModeDerivatives>,
}

impl PathIntegrator {
    /// ΔL_opt = Σ dn_eff/dT(a_i, (T_i + T₀)/2) (T_i − T₀) Δz.
    pub fn path_change(&self, temps: &[f64], ambient: f64) -> Result<f64> {
        if temps.len() != self.a.len() {
            return Err(Error::Domain(format!(
                "temperature field has {} cells, profile has {}",
                temps.len(),
                self.a.len()
            )));
        }
        let mut s = 0.0;
        for i in 0..temps.len() {
            let dt = temps[i] - ambient;
            if dt == 0.0 {
                continue;
            }
            let c = self
                .optics
                .dneff_dt_from(&self.derivs[i], self.a[i], 0.5 * (temps[i] + ambient))?;
            s += c * dt;
        }
        Ok(s * self.dz)
    }
}

/// Convenience wrapper around [`PathIntegrator`].
pub fn optical_path_change(
    temps: &[f64],
    ambient: f64,
    profile: &RadiusProfile,
    optics: &ReadoutOptics,
) -> Result<f64> {
    optics.integrator(profile)?.path_change(temps, ambient)
}

/// Direction of the final half-step added to a counted segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Rising,
    Falling,
}

/// Peak-counting readout of one heating or cooling segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Staircase {
    /// Start of the segment and its level.
    pub start: (f64, f64),
    /// (time of the peak, level after it); levels are origin + k λ₀/2.
    pub steps: Vec<(f64, f64)>,
    /// Extra point at the segment end: (time, level, error bar).
    pub augmentation: (f64, f64, f64),
}

impl Staircase {
    /// (t, level) points used for time-constant extraction: start, steps,
    /// then the augmentation point.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut v = vec![self.start];
        v.extend(self.steps.iter().cloned());
        v.push((self.augmentation.0, self.augmentation.1));
        v
    }
}

/// Count λ₀/2 transmission peaks along a continuous trace.
///
/// Levels are counted from the first sample: the count at each sample is
/// the number of whole peak spacings between it and the start. A step is
/// placed where the trace first reaches a new count (linear interpolation
/// between samples). The augmentation point sits λ₀/4 beyond the last level
/// in the direction of `trend` (inferred from the end points if `None`).
pub fn quantize_readout(times: &[f64], values: &[f64], origin: f64, trend: Option<Trend>) -> Result<Staircase> {
    if times.len() != values.len() || times.is_empty() {
        return Err(Error::Domain("readout trace needs equal, non-empty time and value arrays".into()));
    }
    let q = PEAK_SPACING;
    let v0 = values[0];
    // tolerance keeps exact multiples (e.g. re-quantized staircases) stable
    let count = |v: f64| {
        let r = (v - v0) / q;
        if r >= 0.0 {
            (r + 1e-9).floor() as i64
        } else {
            -((-r + 1e-9).floor() as i64)
        }
    };
    let mut steps = Vec::new();
    let mut level = 0i64;
    for i in 1..values.len() {
        let c = count(values[i]);
        while c != level {
            let target_level = if c > level { level + 1 } else { level - 1 };
            let target = v0 + target_level as f64 * q;
            let (va, vb) = (values[i - 1], values[i]);
            let t = if vb != va {
                let f = ((target - va) / (vb - va)).clamp(0.0, 1.0);
                times[i - 1] + f * (times[i] - times[i - 1])
            } else {
                times[i]
            };
            level = target_level;
            steps.push((t, origin + level as f64 * q));
        }
    }
    let trend = trend.unwrap_or(if values[values.len() - 1] >= v0 {
        Trend::Rising
    } else {
        Trend::Falling
    });
    let last = origin + level as f64 * q;
    let half = 0.5 * q;
    let aug = match trend {
        Trend::Rising => last + half,
        Trend::Falling => last - half,
    };
    Ok(Staircase {
        start: (times[0], origin),
        steps,
        augmentation: (*times.last().unwrap(), aug, half),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tof1_profile_shape() {
        let p = TaperParameters::tof1();
        let prof = build_radius_profile(&p).unwrap();
        assert_eq!(prof.len(), 300);
        for (z, a) in prof.z.iter().zip(&prof.a) {
            if z.abs() < 5e-3 {
                assert_eq!(*a, 250e-9);
            }
            assert!(*a >= 250e-9);
        }
        let end = prof.a[0];
        assert!(end > 4.5e-6 && end < 6e-6, "{end}");
        // symmetric
        for i in 0..prof.len() {
            assert!((prof.a[i] - prof.a[prof.len() - 1 - i]).abs() < 1e-18);
        }
    }

    #[test]
    fn profile_is_continuous_through_all_sections() {
        let p = TaperParameters::tof1();
        let mut prev = p.radius_at(0.0);
        let ds = 1e-6;
        let steep = p.theta1.max(p.theta2).max(p.theta3);
        let mut s = ds;
        while s < 0.05 {
            let a = p.radius_at(s);
            assert!(a >= prev - 1e-18 && a - prev <= steep * ds * 1.0001, "s={s}");
            prev = a;
            s += ds;
        }
        assert_eq!(prev, p.cladding_radius);
    }

    #[test]
    fn scaling_is_pointwise() {
        let p = TaperParameters::tof1();
        let a = build_radius_profile(&p).unwrap();
        let b = build_radius_profile(&p.scaled(1.1)).unwrap();
        for (x, y) in a.a.iter().zip(&b.a) {
            assert!((y / x - 1.1).abs() < 1e-12);
        }
        for s in [0.0, 0.01, 0.02, 0.03, 0.04] {
            assert!((p.scaled(1.1).radius_at(s) / p.radius_at(s) - 1.1).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut p = TaperParameters::tof1();
        p.r2 = 50e-6;
        assert!(build_radius_profile(&p).unwrap_err().is_config());
        let mut p = TaperParameters::tof1();
        p.dz = 0.07e-3;
        assert!(build_radius_profile(&p).is_err());
        let mut p = TaperParameters::tof1();
        p.exp_length = 1e-5;
        assert!(build_radius_profile(&p).is_err());
    }

    #[test]
    fn profile_csv_round_trip() {
        let prof = build_radius_profile(&TaperParameters::tof2()).unwrap();
        let text = prof.to_csv().render();
        let back = RadiusProfile::from_csv(&text).unwrap();
        assert_eq!(back.a, prof.a);
        assert!((back.dz - prof.dz).abs() < 1e-15);
    }

    #[test]
    fn he11_limits() {
        let thick = solve_he11(50e-6, SILICA_INDEX_852, PROBE_WAVELENGTH).unwrap();
        assert!((thick.n_eff - SILICA_INDEX_852).abs() < 1e-4);
        let thin = solve_he11(50e-9, SILICA_INDEX_852, PROBE_WAVELENGTH).unwrap();
        assert!(thin.n_eff < 1.0 + 1e-12, "{}", thin.n_eff);
        let (_, excess) = solve_he11_excess(50e-9, SILICA_INDEX_852, PROBE_WAVELENGTH).unwrap();
        assert!(excess > 0.0);
        let mid = solve_he11(250e-9, SILICA_INDEX_852, PROBE_WAVELENGTH).unwrap();
        assert!(mid.n_eff > 1.0 && mid.n_eff < SILICA_INDEX_852);
        let v = 2.0 * PI * 250e-9 * (SILICA_INDEX_852.powi(2) - 1.0).sqrt() / PROBE_WAVELENGTH;
        assert!((mid.v - v).abs() < 1e-12);
        assert!(mid.s_surf > thin.s_surf && mid.s_surf > thick.s_surf);
        assert!(thin.inside_fraction < mid.inside_fraction && mid.inside_fraction < thick.inside_fraction);
        assert!(thick.inside_fraction > 0.99 && thin.inside_fraction < 0.01);
    }

    #[test]
    fn thin_rod_excess_matches_high_precision_values() {
        // 60-digit root of the unsimplified characteristic equation
        for (a, want) in [
            (50e-9, 1.271_744_357_542_719e-17),
            (100e-9, 8.623_234_796_923_584e-5),
            (150e-9, 1.301_116_083_767_266_3e-2),
        ] {
            let (_, got) = solve_he11_excess(a, 1.4525, 852e-9).unwrap();
            assert!((got / want - 1.0).abs() < 1e-8, "a = {a}: {got} vs {want}");
        }
    }

    #[test]
    fn field_continuity_at_the_surface() {
        // E_z, H_φ and ε E_r must match across r = a
        let m = solve_he11(250e-9, 1.4525, 852e-9).unwrap();
        let k0 = 2.0 * PI / 852e-9;
        let f = He11Fields::new(m.a, m.n, k0, m.beta, m.u, m.w).unwrap();
        let (j0, j1) = bessel_j01_real(m.u).unwrap();
        let j2 = 2.0 * j1 / m.u - j0;
        let (k0s, k1s, k2s) = He11Fields::k012_scaled(m.w).unwrap();
        let r = f.ratio_scaled;
        // E_z
        assert!((j1 - r * k1s).abs() < 1e-12);
        // n² E_r (inside) vs E_r (outside)
        let er_in = m.n * m.n * m.beta / (2.0 * f.h) * ((1.0 - f.s) * j0 - (1.0 + f.s) * j2);
        let er_out = m.beta / (2.0 * f.q) * r * ((1.0 - f.s) * k0s + (1.0 + f.s) * k2s);
        assert!((er_in / er_out - 1.0).abs() < 1e-9, "{er_in} {er_out}");
        // H_φ ∝ n² [(1-s₁)J₀ - (1+s₁)J₂]/h inside, [(1-s₀)K₀ + (1+s₀)K₂] r/q outside
        let hphi_in = m.n * m.n / (2.0 * f.h) * ((1.0 - f.s1) * j0 - (1.0 + f.s1) * j2);
        let hphi_out = r / (2.0 * f.q) * ((1.0 - f.s0) * k0s + (1.0 + f.s0) * k2s);
        assert!((hphi_in / hphi_out - 1.0).abs() < 1e-9, "{hphi_in} {hphi_out}");
    }

    #[test]
    fn surface_intensity_single_maximum() {
        let radii = crate::numeric::logspace(50e-9, 10e-6, 60);
        let s: Vec<f64> = radii
            .iter()
            .map(|&a| solve_he11(a, SILICA_INDEX_852, PROBE_WAVELENGTH).unwrap().s_surf)
            .collect();
        let imax = s.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(imax > 0 && imax < s.len() - 1);
        assert!(s[..=imax].windows(2).all(|w| w[1] > w[0]));
        assert!(s[imax..].windows(2).all(|w| w[1] < w[0]));
        assert!(s[s.len() - 1] < 1e-3 * s[imax]);
        assert!(s[0] < 0.5 * s[imax]);
    }

    #[test]
    fn neff_increases_with_radius() {
        let radii = crate::numeric::logspace(100e-9, 5e-6, 30);
        let n: Vec<f64> = radii.iter().map(|&a| solve_he11(a, 1.4525, 852e-9).unwrap().n_eff).collect();
        assert!(n.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn dneff_dt_term_isolation() {
        let mut o = ReadoutOptics::default();
        let d = mode_derivatives(250e-9, o.n, o.lambda0).unwrap();
        let full = o.dneff_dt(250e-9, 299.0).unwrap();
        assert!(full > 1e-6 && full < 5e-5, "{full}");
        o.props.expansion = crate::materials::PropertyTable::new(
            vec![200.0, 3000.0],
            vec![0.0, 0.0],
            crate::materials::Extrapolation::Clamp,
        )
        .unwrap();
        let iso = o.dneff_dt(250e-9, 299.0).unwrap();
        assert!((iso - d.d_n * 9.627e-6).abs() < 1e-18);
    }

    #[test]
    fn ramp_gives_two_steps() {
        let t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        let v: Vec<f64> = t.iter().map(|x| x * 1e-6).collect();
        let s = quantize_readout(&t, &v, 0.0, None).unwrap();
        assert_eq!(s.steps.len(), 2);
        assert_eq!(s.steps[0].1, 426e-9);
        assert_eq!(s.steps[1].1, 852e-9);
        assert!((s.steps[0].0 - 0.426).abs() < 1e-12);
        assert_eq!(s.augmentation, (1.0, 852e-9 + 213e-9, 213e-9));
    }

    #[test]
    fn small_trace_only_augments() {
        let t = [0.0, 0.5, 1.0];
        let s = quantize_readout(&t, &[0.0, 100e-9, 300e-9], 0.0, None).unwrap();
        assert!(s.steps.is_empty());
        assert_eq!(s.augmentation.1, 213e-9);
        let flat = quantize_readout(&t, &[5e-7; 3], 0.0, None).unwrap();
        assert!(flat.steps.is_empty());
    }

    #[test]
    fn falling_segment_counts_down() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let v: Vec<f64> = t.iter().map(|x| 2e-6 - x * 1e-7).collect();
        let s = quantize_readout(&t, &v, 1.704e-6, None).unwrap();
        assert_eq!(s.steps.len(), 2);
        assert!((s.steps[1].1 - (1.704e-6 - 852e-9)).abs() < 1e-18);
        assert!((s.augmentation.1 - (s.steps[1].1 - 213e-9)).abs() < 1e-18);
    }
}
