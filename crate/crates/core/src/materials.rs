//! Optical and thermal properties of fused silica.
//!
//! The refractive-index table carries a min/max band for both n and k; the
//! four combinations of band edges ("corners") propagate the spread of the
//! literature data through every radiation calculation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use crate::constants::{K_B, R_GAS};
use crate::error::{Error, Result};

const SILICA_NK: &str = include_str!("../data/silica_nk.csv");
const SILICA_CP: &str = include_str!("../data/silica_cp.csv");
const SILICA_CONDUCTIVITY: &str = include_str!("../data/silica_conductivity.csv");
const SILICA_EXPANSION: &str = include_str!("../data/silica_expansion.csv");

/// Lower or upper edge of a material band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Min,
    Max,
}

/// Choice of band edge for n and for k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CornerSelector {
    pub n: Bound,
    pub k: Bound,
}

impl CornerSelector {
    pub const ALL: [CornerSelector; 4] = [
        CornerSelector::new(Bound::Min, Bound::Min),
        CornerSelector::new(Bound::Min, Bound::Max),
        CornerSelector::new(Bound::Max, Bound::Min),
        CornerSelector::new(Bound::Max, Bound::Max),
    ];

    pub const fn new(n: Bound, k: Bound) -> Self {
        CornerSelector { n, k }
    }
}

impl fmt::Display for CornerSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |b: Bound| if b == Bound::Min { "min" } else { "max" };
        write!(f, "n{}_k{}", s(self.n), s(self.k))
    }
}

impl FromStr for CornerSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CornerSelector::ALL
            .into_iter()
            .find(|c| c.to_string() == s.trim())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown corner `{s}` (expected nmin_kmin, nmin_kmax, nmax_kmin or nmax_kmax)"
                ))
            })
    }
}

/// One wavelength sample of the n/k band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NkSample {
    pub wavelength: f64,
    pub n_min: f64,
    pub n_max: f64,
    pub k_min: f64,
    pub k_max: f64,
}

impl NkSample {
    fn n(&self, b: Bound) -> f64 {
        match b {
            Bound::Min => self.n_min,
            Bound::Max => self.n_max,
        }
    }

    fn k(&self, b: Bound) -> f64 {
        match b {
            Bound::Min => self.k_min,
            Bound::Max => self.k_max,
        }
    }
}

const NK_HEADER: [&str; 5] = ["wavelength_m", "n_min", "n_max", "k_min", "k_max"];

/// Wavelength-sampled complex refractive index with a min/max envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct RefractiveIndexTable {
    samples: Vec<NkSample>,
    // provenance label per row, empty when the source file had none
    sources: Vec<String>,
}

impl RefractiveIndexTable {
    /// Build from samples, enforcing ordering and band invariants.
    pub fn from_samples(samples: Vec<NkSample>) -> Result<Self> {
        let sources = vec![String::new(); samples.len()];
        Self::validated(samples, sources)
    }

    fn validated(samples: Vec<NkSample>, sources: Vec<String>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Invariant {
                row: samples.len(),
                field: "wavelength_m".into(),
                msg: "table needs at least two rows".into(),
            });
        }
        for (i, s) in samples.iter().enumerate() {
            let row = i + 1;
            let bad = |field: &str, msg: &str| Error::Invariant {
                row,
                field: field.into(),
                msg: msg.into(),
            };
            for (name, v) in [
                ("wavelength_m", s.wavelength),
                ("n_min", s.n_min),
                ("n_max", s.n_max),
                ("k_min", s.k_min),
                ("k_max", s.k_max),
            ] {
                if !v.is_finite() {
                    return Err(bad(name, "value is not finite"));
                }
            }
            if s.wavelength <= 0.0 {
                return Err(bad("wavelength_m", "must be positive"));
            }
            if s.n_min > s.n_max {
                return Err(bad("n_min", "n_min exceeds n_max"));
            }
            if s.k_min < 0.0 {
                return Err(bad("k_min", "must be non-negative"));
            }
            if s.k_min > s.k_max {
                return Err(bad("k_min", "k_min exceeds k_max"));
            }
            if i > 0 && s.wavelength <= samples[i - 1].wavelength {
                return Err(Error::Parse {
                    row,
                    msg: "wavelengths must be strictly increasing".into(),
                });
            }
        }
        Ok(RefractiveIndexTable { samples, sources })
    }

    pub fn samples(&self) -> &[NkSample] {
        &self.samples
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    /// Covered wavelength interval [m].
    pub fn coverage(&self) -> (f64, f64) {
        (
            self.samples[0].wavelength,
            self.samples[self.samples.len() - 1].wavelength,
        )
    }

    /// Covered frequency interval [Hz].
    pub fn frequency_coverage(&self) -> (f64, f64) {
        let (lo, hi) = self.coverage();
        (crate::constants::C0 / hi, crate::constants::C0 / lo)
    }

    /// Check that the table spans `lo..hi` in wavelength.
    pub fn require_coverage(&self, lo: f64, hi: f64) -> Result<()> {
        let (a, b) = self.coverage();
        if a > lo * (1.0 + 1e-9) {
            return Err(Error::Coverage {
                what: "wavelength",
                value: lo,
                lo: a,
                hi: b,
            });
        }
        if b < hi * (1.0 - 1e-9) {
            return Err(Error::Coverage {
                what: "wavelength",
                value: hi,
                lo: a,
                hi: b,
            });
        }
        Ok(())
    }

    /// Complex refractive index n + ik at wavelength `lambda` [m].
    ///
    /// n is interpolated linearly in log λ and k linearly in log λ of log k
    /// (linearly in k where a bracketing value is zero).
    pub fn nk_at(&self, lambda: f64, corner: CornerSelector) -> Result<Complex64> {
        let (lo, hi) = self.coverage();
        if !(lambda >= lo && lambda <= hi) {
            return Err(Error::Coverage {
                what: "wavelength",
                value: lambda,
                lo,
                hi,
            });
        }
        let i = match self.samples.partition_point(|s| s.wavelength <= lambda) {
            0 => 0,
            i if i >= self.samples.len() => self.samples.len() - 2,
            i => i - 1,
        };
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        if lambda == a.wavelength {
            return Ok(Complex64::new(a.n(corner.n), a.k(corner.k)));
        }
        if lambda == b.wavelength {
            return Ok(Complex64::new(b.n(corner.n), b.k(corner.k)));
        }
        let w = (lambda / a.wavelength).ln() / (b.wavelength / a.wavelength).ln();
        let n = a.n(corner.n) + w * (b.n(corner.n) - a.n(corner.n));
        let (ka, kb) = (a.k(corner.k), b.k(corner.k));
        let k = if ka > 0.0 && kb > 0.0 {
            (ka.ln() + w * (kb.ln() - ka.ln())).exp()
        } else {
            ka + w * (kb - ka)
        };
        Ok(Complex64::new(n, k))
    }

    /// Dielectric function ε = n̂² (μ = 1).
    pub fn dielectric_at(&self, lambda: f64, corner: CornerSelector) -> Result<Complex64> {
        let n = self.nk_at(lambda, corner)?;
        Ok(n * n)
    }

    /// Copy with `k_eff` added to every k value.
    pub fn with_extra_k(&self, k_eff: f64) -> Result<Self> {
        if !(k_eff >= 0.0) {
            return Err(Error::Domain(format!("k_eff must be ≥ 0, got {k_eff}")));
        }
        let samples = self
            .samples
            .iter()
            .map(|s| NkSample {
                k_min: s.k_min + k_eff,
                k_max: s.k_max + k_eff,
                ..*s
            })
            .collect();
        Self::validated(samples, self.sources.clone())
    }

    /// Serialize in the same text format accepted by [`load_nk_table`].
    pub fn to_csv(&self) -> String {
        let with_source = self.sources.iter().any(|s| !s.is_empty());
        let mut out = NK_HEADER.join(",");
        if with_source {
            out.push_str(",source");
        }
        out.push('\n');
        for (s, src) in self.samples.iter().zip(&self.sources) {
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e}",
                s.wavelength, s.n_min, s.n_max, s.k_min, s.k_max
            ));
            if with_source {
                out.push(',');
                out.push_str(src);
            }
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the serialized table, used in cache keys.
    pub fn content_hash(&self) -> String {
        crate::io::sha256_hex(self.to_csv().as_bytes())
    }
}

fn parse_float(tok: &str, row: usize, field: &str) -> Result<f64> {
    tok.trim().parse::<f64>().map_err(|_| Error::Parse {
        row,
        msg: format!("field `{field}`: cannot parse `{}` as a number", tok.trim()),
    })
}

/// Read a refractive-index table.
///
/// Expected header: `wavelength_m,n_min,n_max,k_min,k_max`, optionally
/// followed by a free-text `source` column. Blank lines and lines starting
/// with `#` are ignored. Row numbers in errors count data rows from 1.
pub fn load_nk_table<R: BufRead>(reader: R) -> Result<RefractiveIndexTable> {
    let mut header_seen = false;
    let mut has_source = false;
    let mut samples = Vec::new();
    let mut sources = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("line {}", lineno + 1), e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = t.split(',').map(str::trim).collect();
            if cols.len() < 5 || cols[..5] != NK_HEADER {
                return Err(Error::Parse {
                    row: 0,
                    msg: format!("header must start with `{}`", NK_HEADER.join(",")),
                });
            }
            has_source = cols.len() > 5;
            header_seen = true;
            continue;
        }
        let row = samples.len() + 1;
        let toks: Vec<&str> = t.splitn(6, ',').collect();
        if toks.len() < 5 {
            return Err(Error::Parse {
                row,
                msg: format!("expected 5 numeric fields, found {}", toks.len()),
            });
        }
        let v: Vec<f64> = toks[..5]
            .iter()
            .zip(NK_HEADER)
            .map(|(tok, name)| parse_float(tok, row, name))
            .collect::<Result<_>>()?;
        samples.push(NkSample {
            wavelength: v[0],
            n_min: v[1],
            n_max: v[2],
            k_min: v[3],
            k_max: v[4],
        });
        sources.push(if has_source {
            toks.get(5).map(|s| s.trim().to_string()).unwrap_or_default()
        } else {
            String::new()
        });
    }
    if !header_seen {
        return Err(Error::Parse {
            row: 0,
            msg: "missing header line".into(),
        });
    }
    RefractiveIndexTable::validated(samples, sources)
}

/// The bundled fused-silica n/k reconstruction (30 nm to 2 mm).
pub fn silica_nk_table() -> &'static RefractiveIndexTable {
    static TABLE: std::sync::OnceLock<RefractiveIndexTable> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        load_nk_table(SILICA_NK.as_bytes()).expect("bundled silica dataset is valid")
    })
}

/// Value together with a flag marking use outside the validated range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged {
    pub value: f64,
    pub extrapolated: bool,
}

/// How a [`PropertyTable`] behaves above its last point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extrapolation {
    Clamp,
    Linear,
}

/// Piecewise-linear property of temperature, read from `T_K,value` text.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyTable {
    t: Vec<f64>,
    v: Vec<f64>,
    above: Extrapolation,
}

impl PropertyTable {
    pub fn new(t: Vec<f64>, v: Vec<f64>, above: Extrapolation) -> Result<Self> {
        if t.len() < 2 || t.len() != v.len() {
            return Err(Error::Config("property table needs at least two rows".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("property table temperatures must increase".into()));
        }
        Ok(PropertyTable { t, v, above })
    }

    pub fn parse<R: BufRead>(reader: R, above: Extrapolation) -> Result<Self> {
        let mut t = Vec::new();
        let mut v = Vec::new();
        let mut header = false;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(format!("line {}", lineno + 1), e))?;
            let s = line.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            if !header {
                if s.replace(' ', "") != "T_K,value" {
                    return Err(Error::Parse {
                        row: 0,
                        msg: "header must be `T_K,value`".into(),
                    });
                }
                header = true;
                continue;
            }
            let row = t.len() + 1;
            let mut it = s.split(',');
            let a = parse_float(it.next().unwrap_or(""), row, "T_K")?;
            let b = parse_float(it.next().unwrap_or(""), row, "value")?;
            t.push(a);
            v.push(b);
        }
        Self::new(t, v, above)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().copied().zip(self.v.iter().copied())
    }

    pub fn value(&self, temp: f64) -> f64 {
        let n = self.t.len();
        if temp > self.t[n - 1] && self.above == Extrapolation::Linear {
            let s = (self.v[n - 1] - self.v[n - 2]) / (self.t[n - 1] - self.t[n - 2]);
            return self.v[n - 1] + s * (temp - self.t[n - 1]);
        }
        crate::numeric::interp_linear_clamped(&self.t, &self.v, temp)
    }

    pub fn flagged(&self, temp: f64) -> Flagged {
        let (lo, hi) = self.range();
        Flagged {
            value: self.value(temp),
            extrapolated: temp < lo || temp > hi,
        }
    }

    /// ∫_{t0}^{t1} value(T) dT, exact for the piecewise-linear model
    /// (clamped ends contribute constant segments).
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        if t1 < t0 {
            return -self.integral(t1, t0);
        }
        let mut knots: Vec<f64> = vec![t0];
        knots.extend(self.t.iter().copied().filter(|&x| x > t0 && x < t1));
        knots.push(t1);
        knots
            .windows(2)
            .map(|w| 0.5 * (self.value(w[0]) + self.value(w[1])) * (w[1] - w[0]))
            .sum()
    }
}

/// Thermo-optic coefficient dn/dT = a + b (T - 299 K).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoOptic {
    pub at_299k: f64,
    pub slope: f64,
    /// Upper end of the measured range.
    pub validated_max: f64,
}

impl Default for ThermoOptic {
    fn default() -> Self {
        ThermoOptic {
            at_299k: 9.627e-6,
            slope: 7.74e-9,
            validated_max: 1570.0,
        }
    }
}

impl ThermoOptic {
    pub fn eval(&self, temp: f64) -> Result<Flagged> {
        if !(temp >= 0.0) {
            return Err(Error::Domain(format!(
                "thermo-optic coefficient requested below absolute zero (T = {temp} K)"
            )));
        }
        Ok(Flagged {
            value: self.at_299k + self.slope * (temp - 299.0),
            extrapolated: temp > self.validated_max || temp < 294.0,
        })
    }
}

/// Arrhenius viscosity η = A exp(E_a / (R T)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViscosityModel {
    pub prefactor: f64,
    pub activation_energy: f64,
    pub validated: (f64, f64),
}

impl Default for ViscosityModel {
    fn default() -> Self {
        ViscosityModel {
            prefactor: 5.8e-8,
            activation_energy: 515.4e3,
            validated: (1400.0, 2500.0),
        }
    }
}

impl ViscosityModel {
    /// Viscosity [Pa s].
    pub fn eval(&self, temp: f64) -> Result<Flagged> {
        if !(temp > 0.0) {
            return Err(Error::Domain(format!("viscosity requires T > 0, got {temp}")));
        }
        Ok(Flagged {
            value: self.prefactor * (self.activation_energy / (R_GAS * temp)).exp(),
            extrapolated: temp < self.validated.0 || temp > self.validated.1,
        })
    }
}

/// Residual-gas parameters of the free-molecular cooling term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasProperties {
    pub degrees_of_freedom: f64,
    pub molecular_mass: f64,
}

impl Default for GasProperties {
    fn default() -> Self {
        GasProperties {
            degrees_of_freedom: 6.0,
            molecular_mass: 4.653e-26,
        }
    }
}

impl GasProperties {
    /// sqrt(k_B f² / (8π M T0)) [m/(s K)]; multiply by p (T - T0) 2πa.
    pub fn coefficient(&self, ambient: f64) -> f64 {
        (K_B * self.degrees_of_freedom.powi(2)
            / (8.0 * std::f64::consts::PI * self.molecular_mass * ambient))
            .sqrt()
    }
}

/// Bulk thermal and mechanical properties of fused silica.
#[derive(Debug, Clone, PartialEq)]
pub struct SilicaThermalProperties {
    /// Specific heat [J/(kg K)].
    pub heat_capacity: PropertyTable,
    /// Thermal conductivity [W/(m K)].
    pub conductivity: PropertyTable,
    /// Linear thermal expansion [1/K].
    pub expansion: PropertyTable,
    /// Density [kg/m³].
    pub density: f64,
    pub thermo_optic: ThermoOptic,
    /// Strain-optic coefficient (Δn/n)/(ΔL/L).
    pub strain_optic: f64,
    pub poisson: f64,
    pub viscosity: ViscosityModel,
}

impl Default for SilicaThermalProperties {
    fn default() -> Self {
        let table = |s: &str, e| PropertyTable::parse(s.as_bytes(), e).expect("bundled table");
        SilicaThermalProperties {
            heat_capacity: table(SILICA_CP, Extrapolation::Clamp),
            conductivity: table(SILICA_CONDUCTIVITY, Extrapolation::Clamp),
            expansion: table(SILICA_EXPANSION, Extrapolation::Linear),
            density: 2200.0,
            thermo_optic: ThermoOptic::default(),
            strain_optic: -0.206,
            poisson: -0.168,
            viscosity: ViscosityModel::default(),
        }
    }
}

impl SilicaThermalProperties {
    pub fn heat_capacity(&self, temp: f64) -> f64 {
        self.heat_capacity.value(temp)
    }

    pub fn conductivity(&self, temp: f64) -> f64 {
        self.conductivity.value(temp)
    }

    pub fn expansion(&self, temp: f64) -> f64 {
        self.expansion.value(temp)
    }

    pub fn dn_dt(&self, temp: f64) -> Result<Flagged> {
        self.thermo_optic.eval(temp)
    }

    /// Specific enthalpy relative to `t_ref` [J/kg].
    pub fn enthalpy(&self, t_ref: f64, temp: f64) -> f64 {
        self.heat_capacity.integral(t_ref, temp)
    }
}
