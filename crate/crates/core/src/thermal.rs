//! One-dimensional heat equation along a tapered fiber.
//!
//! Each cell of the radius profile is isothermal across its cross-section.
//! The semi-discrete balance per unit length is
//!
//! ```text
//! d/dt [π a² ρ h(T)] = −H(T) + H(T₀) + q_heat + div(π a² λ ∂_z T) − g p (T − T₀) 2π a
//! ```
//!
//! with h the specific enthalpy, H the radiated power per length and g the
//! free-molecular gas coefficient. Conduction uses conservative face fluxes
//! with insulating ends. Time integration is TR-BDF2 on the enthalpy, so
//! conduction alone conserves the stored heat to the Newton tolerance.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cache::EmissivityCache;
use crate::constants::{MBAR, SIGMA_B};
use crate::cylinder::{
    EmissivityOptions, FrequencyGrid, RadiusPowerModel, SpectralEmissivity, GRID_TAIL_TOLERANCE,
    NODES_PER_DECADE,
};
use crate::error::{Context, Error, Result};
use crate::fiber::{solve_he11, RadiusProfile, PROBE_WAVELENGTH, SILICA_INDEX_852};
use crate::materials::{CornerSelector, GasProperties, RefractiveIndexTable, SilicaThermalProperties};
use crate::numeric::{brent_root, logspace, solve_tridiagonal, CubicSpline};
use crate::radiometry::{interface_emissivity_with, InterfaceOptions};

/// Temperature range of the radiation tables [K].
pub const TABLE_T_MIN: f64 = 250.0;
pub const TABLE_T_MAX: f64 = 3000.0;
/// Spacing of the radiation tables [K].
pub const TABLE_T_STEP: f64 = 25.0;
/// Pressure above which the free-molecular gas term overestimates cooling [Pa].
pub const GAS_VALIDITY_PRESSURE: f64 = 1e-3 * MBAR;

fn table_temperatures() -> Vec<f64> {
    let n = ((TABLE_T_MAX - TABLE_T_MIN) / TABLE_T_STEP).round() as usize;
    (0..=n).map(|i| TABLE_T_MIN + i as f64 * TABLE_T_STEP).collect()
}

/// Radiated power model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiatorKind {
    /// Cylinder emission from the T-matrix spectra.
    Fed,
    /// Flat silica interface emissivity applied to the cylinder surface.
    PlanckInterface,
    /// No radiation (conduction and gas only).
    Disabled,
}

impl std::fmt::Display for RadiatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RadiatorKind::Fed => "fed",
            RadiatorKind::PlanckInterface => "planck-interface",
            RadiatorKind::Disabled => "disabled",
        })
    }
}

impl std::str::FromStr for RadiatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fed" => Ok(RadiatorKind::Fed),
            "planck" | "planck-interface" | "planck_interface" => Ok(RadiatorKind::PlanckInterface),
            "none" | "disabled" => Ok(RadiatorKind::Disabled),
            other => Err(Error::Config(format!(
                "radiator must be `fed`, `planck-interface` or `disabled`, got `{other}`"
            ))),
        }
    }
}

/// Gross radiated power per length as a function of temperature, for one
/// radius: a cubic spline of ln H over ln T.
#[derive(Debug, Clone)]
pub struct EmissionCurve {
    spline: CubicSpline,
}

impl EmissionCurve {
    pub fn new(temps: &[f64], power: &[f64]) -> Result<Self> {
        if let Some(i) = power.iter().position(|p| !(*p > 0.0)) {
            return Err(Error::Domain(format!(
                "emission curve needs positive power, got {} at {} K",
                power[i], temps[i]
            )));
        }
        let lt = temps.iter().map(|t| t.ln()).collect();
        let lp = power.iter().map(|p| p.ln()).collect();
        Ok(EmissionCurve {
            spline: CubicSpline::new(lt, lp)?,
        })
    }

    pub fn range(&self) -> (f64, f64) {
        let (a, b) = self.spline.domain();
        (a.exp(), b.exp())
    }

    /// (H, dH/dT) at `temp`; fails outside the tabulated range.
    pub fn eval(&self, temp: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.range();
        if !(temp >= lo * (1.0 - 1e-12) && temp <= hi * (1.0 + 1e-12)) {
            return Err(Error::Coverage {
                what: "temperature (K) for the radiation table",
                value: temp,
                lo,
                hi,
            });
        }
        let (l, d) = self.spline.eval_with_derivative(temp.ln());
        let h = l.exp();
        Ok((h, h * d / temp))
    }
}

/// Per-cell radiation tables for one radius profile.
#[derive(Debug, Clone)]
pub struct RadiationModel {
    pub kind: RadiatorKind,
    pub corner: Option<CornerSelector>,
    cells: Vec<Option<Arc<EmissionCurve>>>,
    /// Worst relative radius-interpolation error at the probe radii (FED).
    pub probe_error: Option<f64>,
}

/// Settings for building the FED radius tables.
#[derive(Debug, Clone)]
pub struct FedTableOptions {
    /// Radii per decade of the log-spaced table (at least 4 in total).
    pub radii_per_decade: f64,
    /// Largest tolerated radius-interpolation error at the probe radius.
    pub probe_tolerance: f64,
    /// Compute one probe spectrum midway between table radii.
    pub probe: bool,
    pub cache: Option<EmissivityCache>,
}

impl Default for FedTableOptions {
    fn default() -> Self {
        FedTableOptions {
            radii_per_decade: 18.0,
            probe_tolerance: 1e-2,
            probe: true,
            cache: None,
        }
    }
}

impl RadiationModel {
    pub fn disabled(cells: usize) -> Self {
        RadiationModel {
            kind: RadiatorKind::Disabled,
            corner: None,
            cells: vec![None; cells],
            probe_error: None,
        }
    }

    /// Interface emissivity ε(T) σ T⁴ on the cylinder surface.
    pub fn planck_interface(
        profile: &RadiusProfile,
        table: &RefractiveIndexTable,
        corner: CornerSelector,
    ) -> Result<Self> {
        let temps = table_temperatures();
        let opts = InterfaceOptions {
            tail_tolerance: GRID_TAIL_TOLERANCE,
            ..InterfaceOptions::default()
        };
        let eps = temps
            .iter()
            .map(|&t| interface_emissivity_with(t, table, corner, opts))
            .collect::<Result<Vec<_>>>()
            .context("interface emissivity table")?;
        let mut by_radius: HashMap<u64, Arc<EmissionCurve>> = HashMap::new();
        let mut cells = Vec::with_capacity(profile.len());
        for &a in &profile.a {
            let curve = match by_radius.get(&a.to_bits()) {
                Some(c) => c.clone(),
                None => {
                    let p: Vec<f64> = temps
                        .iter()
                        .zip(&eps)
                        .map(|(t, e)| e * SIGMA_B * t.powi(4) * 2.0 * PI * a)
                        .collect();
                    let c = Arc::new(EmissionCurve::new(&temps, &p)?);
                    by_radius.insert(a.to_bits(), c.clone());
                    c
                }
            };
            cells.push(Some(curve));
        }
        Ok(RadiationModel {
            kind: RadiatorKind::PlanckInterface,
            corner: Some(corner),
            cells,
            probe_error: None,
        })
    }

    /// Cylinder emission, tabulated on log-spaced radii spanning the profile
    /// and interpolated in ln a.
    pub fn fed(
        profile: &RadiusProfile,
        table: &RefractiveIndexTable,
        corner: CornerSelector,
        opts: &FedTableOptions,
    ) -> Result<Self> {
        let temps = table_temperatures();
        let grid = FrequencyGrid::for_temperatures(
            TABLE_T_MIN,
            TABLE_T_MAX,
            table,
            NODES_PER_DECADE,
            GRID_TAIL_TOLERANCE,
        )?;
        let eopts = EmissivityOptions::for_grid(&grid);
        let (a_lo, a_hi) = (profile.min_radius(), profile.max_radius());
        let n = (((a_hi / a_lo).log10() * opts.radii_per_decade).ceil() as usize + 1).max(4);
        let radii = logspace(a_lo, a_hi, n);
        let spectrum = |a: f64| -> Result<SpectralEmissivity> {
            match &opts.cache {
                Some(c) => c.get_or_compute(a, table, corner, &grid, &eopts),
                None => SpectralEmissivity::compute(a, table, corner, &grid, &eopts),
            }
            .with_context(|| format!("emission spectrum at a = {a:.4e} m ({corner})"))
        };
        let spectra = radii.iter().map(|&a| spectrum(a)).collect::<Result<Vec<_>>>()?;
        let model = RadiusPowerModel::from_spectra(&spectra, &temps)?;
        let probe_error = if opts.probe {
            // the widest radii interpolate worst (most structure in the spectrum)
            let a = (radii[n - 2] * radii[n - 1]).sqrt();
            let err = model.probe_error(&spectrum(a)?)?;
            if err > opts.probe_tolerance {
                return Err(Error::NonConvergence(format!(
                    "radius interpolation error {err:.3e} at a = {a:.4e} m exceeds {}; \
                     raise radii_per_decade",
                    opts.probe_tolerance
                )));
            }
            Some(err)
        } else {
            None
        };
        Self::from_power_model(profile, &model, corner).map(|mut m| {
            m.probe_error = probe_error;
            m
        })
    }

    /// Per-cell curves interpolated from a radius table.
    pub fn from_power_model(
        profile: &RadiusProfile,
        model: &RadiusPowerModel,
        corner: CornerSelector,
    ) -> Result<Self> {
        let mut by_radius: HashMap<u64, Arc<EmissionCurve>> = HashMap::new();
        let mut cells = Vec::with_capacity(profile.len());
        for (i, &a) in profile.a.iter().enumerate() {
            let curve = match by_radius.get(&a.to_bits()) {
                Some(c) => c.clone(),
                None => {
                    let g = model.gross_at(a).with_context(|| format!("cell {i} (z = {:.4e} m)", profile.z[i]))?;
                    let c = Arc::new(EmissionCurve::new(&model.temps, &g)?);
                    by_radius.insert(a.to_bits(), c.clone());
                    c
                }
            };
            cells.push(Some(curve));
        }
        Ok(RadiationModel {
            kind: RadiatorKind::Fed,
            corner: Some(corner),
            cells,
            probe_error: None,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Gross power per length of cell `i` and its temperature derivative.
    pub fn power(&self, i: usize, temp: f64) -> Result<(f64, f64)> {
        match &self.cells[i] {
            Some(c) => c.eval(temp),
            None => Ok((0.0, 0.0)),
        }
    }

    pub fn curve(&self, i: usize) -> Option<&EmissionCurve> {
        self.cells[i].as_deref()
    }
}

/// Spatial shape of the absorbed heating power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Deposition {
    /// ∝ circumference × surface intensity of the guided mode.
    Surface,
    /// ∝ guided power carried inside the glass (uniform bulk absorber).
    Volume,
}

/// Piecewise-constant heating power: `levels[k] = (t_start, P)` holds until
/// the next entry or `end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatingSchedule {
    pub levels: Vec<(f64, f64)>,
    pub end: f64,
}

impl HeatingSchedule {
    /// `power` from t = 0 to `on`, then off until `end`.
    pub fn pulse(power: f64, on: f64, end: f64) -> Self {
        HeatingSchedule {
            levels: vec![(0.0, power), (on, 0.0)],
            end,
        }
    }

    pub fn constant(power: f64, end: f64) -> Self {
        HeatingSchedule {
            levels: vec![(0.0, power)],
            end,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels[0].0 != 0.0 {
            return Err(Error::Config("heating schedule must start at t = 0".into()));
        }
        if self.levels.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Config("heating schedule times must increase".into()));
        }
        if self.levels.iter().any(|l| !(l.1 >= 0.0 && l.1.is_finite())) {
            return Err(Error::Config("heating powers must be finite and ≥ 0".into()));
        }
        if !(self.end > self.levels.last().unwrap().0) {
            return Err(Error::Config("schedule end must follow the last switch".into()));
        }
        Ok(())
    }

    pub fn power_at(&self, t: f64) -> f64 {
        self.levels
            .iter()
            .rev()
            .find(|l| l.0 <= t)
            .map(|l| l.1)
            .unwrap_or(0.0)
    }

    pub fn max_power(&self) -> f64 {
        self.levels.iter().map(|l| l.1).fold(0.0, f64::max)
    }

    /// Switch times strictly inside (0, end), then `end`.
    fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.levels.iter().skip(1).map(|l| l.0).filter(|&t| t < self.end).collect();
        v.push(self.end);
        v
    }
}

/// Time integration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Relative tolerance on T − T₀.
    pub rtol: f64,
    /// Absolute tolerance [K].
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Steps whose energy-budget residual exceeds this share of the peak
    /// absorbed power are rejected.
    pub budget_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rtol: 1e-4,
            atol: 1e-3,
            h_init: 1e-5,
            h_max: 5e-3,
            max_steps: 200_000,
            budget_tolerance: 5e-3,
        }
    }
}

/// Everything except the radiation tables.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub profile: RadiusProfile,
    /// Absorbed fraction of the transmitted heating power.
    pub eta: f64,
    pub schedule: HeatingSchedule,
    /// Background pressure [Pa].
    pub pressure: f64,
    pub ambient: f64,
    pub props: SilicaThermalProperties,
    pub gas: GasProperties,
    pub deposition: Deposition,
    /// Wavelength of the heating light, which sets the deposition shape [m].
    pub heating_wavelength: f64,
    pub solver: SolverOptions,
}

impl SimulationConfig {
    pub fn new(profile: RadiusProfile) -> Self {
        SimulationConfig {
            profile,
            eta: 2e-3,
            schedule: HeatingSchedule::pulse(32.7e-3, 1.0, 3.0),
            pressure: 1e-6 * MBAR,
            ambient: 294.0,
            props: SilicaThermalProperties::default(),
            gas: GasProperties::default(),
            deposition: Deposition::Surface,
            heating_wavelength: PROBE_WAVELENGTH,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        if !(self.pressure >= 0.0 && self.pressure.is_finite()) {
            return Err(Error::Config(format!("pressure must be ≥ 0, got {}", self.pressure)));
        }
        if !(self.ambient > 0.0) {
            return Err(Error::Config(format!("ambient temperature must be > 0, got {}", self.ambient)));
        }
        if self.profile.len() < 3 {
            return Err(Error::Config("radius profile needs at least 3 cells".into()));
        }
        if !(self.heating_wavelength > 0.0) {
            return Err(Error::Config("heating wavelength must be > 0".into()));
        }
        let s = &self.solver;
        if !(s.rtol > 0.0 && s.atol > 0.0 && s.h_init > 0.0 && s.h_max >= s.h_init && s.max_steps > 0) {
            return Err(Error::Config("solver tolerances and step limits must be positive".into()));
        }
        self.schedule.validate()
    }
}

/// Power balance of one accepted step, all in W.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepBudget {
    pub t: f64,
    pub h: f64,
    /// Change of stored heat over the step divided by h.
    pub stored_rate: f64,
    /// Step-averaged (trapezoid) absorbed minus radiated minus gas power.
    pub net_in: f64,
    pub absorbed: f64,
    pub radiated: f64,
    pub gas: f64,
    /// |stored_rate − net_in| over the peak absorbed power.
    pub residual: f64,
}

/// Solution of one run.
#[derive(Debug, Clone)]
pub struct TemperatureField {
    pub times: Vec<f64>,
    pub z: Vec<f64>,
    /// `temps[k][i]`: time k, cell i [K].
    pub temps: Vec<Vec<f64>>,
    /// One entry per accepted step (times[1..]).
    pub budget: Vec<StepBudget>,
    pub rejected_steps: usize,
    /// Material or model ranges left during the run.
    pub notes: Vec<String>,
}

impl TemperatureField {
    pub fn max_temperature(&self) -> f64 {
        self.temps.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_budget_residual(&self) -> f64 {
        self.budget.iter().map(|b| b.residual).fold(0.0, f64::max)
    }

    /// Temperature trace of one cell.
    pub fn trace(&self, cell: usize) -> Vec<f64> {
        self.temps.iter().map(|row| row[cell]).collect()
    }
}

/// Cumulative enthalpy of a piecewise-linear heat capacity.
#[derive(Debug, Clone)]
struct Enthalpy {
    t: Vec<f64>,
    cp: Vec<f64>,
    cum: Vec<f64>,
    props: SilicaThermalProperties,
}

impl Enthalpy {
    fn new(props: &SilicaThermalProperties) -> Self {
        let (t, cp): (Vec<f64>, Vec<f64>) = props.heat_capacity.points().unzip();
        let mut cum = vec![0.0; t.len()];
        for k in 1..t.len() {
            cum[k] = cum[k - 1] + 0.5 * (cp[k] + cp[k - 1]) * (t[k] - t[k - 1]);
        }
        Enthalpy {
            t,
            cp,
            cum,
            props: props.clone(),
        }
    }

    /// ∫_{t₀}^{T} c_p dT with t₀ the first knot [J/kg].
    fn value(&self, temp: f64) -> f64 {
        let n = self.t.len();
        if temp < self.t[0] || temp > self.t[n - 1] {
            return self.props.enthalpy(self.t[0], temp);
        }
        let k = self.t.partition_point(|&x| x <= temp).clamp(1, n - 1) - 1;
        let dt = temp - self.t[k];
        let slope = (self.cp[k + 1] - self.cp[k]) / (self.t[k + 1] - self.t[k]);
        self.cum[k] + self.cp[k] * dt + 0.5 * slope * dt * dt
    }
}

/// Assembled heat equation for one configuration.
#[derive(Debug, Clone)]
pub struct ThermalModel {
    pub config: SimulationConfig,
    pub radiation: RadiationModel,
    /// Absorbed power per length per absorbed watt [1/m]; sums to 1/Δz.
    pub deposition: Vec<f64>,
    /// π a² ρ [kg/m].
    mass: Vec<f64>,
    /// π a_i a_{i+1} / Δz², the conductance per length before λ [m⁰].
    face: Vec<f64>,
    /// Gas coefficient times 2πa [W/(m K)].
    gas: Vec<f64>,
    /// H(T₀) per cell [W/m].
    h_ambient: Vec<f64>,
    enthalpy: Enthalpy,
}

/// Net power per length and its tridiagonal Jacobian.
struct Rhs {
    f: Vec<f64>,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    radiated: f64,
    gas: f64,
}

const GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;

impl ThermalModel {
    pub fn new(config: SimulationConfig, radiation: RadiationModel) -> Result<Self> {
        config.validate()?;
        let prof = &config.profile;
        let n = prof.len();
        if radiation.len() != n {
            return Err(Error::Config(format!(
                "radiation table has {} cells, profile has {n}",
                radiation.len()
            )));
        }
        let mut shape: HashMap<u64, f64> = HashMap::new();
        let mut deposition = Vec::with_capacity(n);
        for &a in &prof.a {
            let w = match shape.get(&a.to_bits()) {
                Some(w) => *w,
                None => {
                    let m = solve_he11(a, SILICA_INDEX_852, config.heating_wavelength)?;
                    let w = match config.deposition {
                        Deposition::Surface => m.s_surf,
                        Deposition::Volume => m.inside_fraction,
                    };
                    shape.insert(a.to_bits(), w);
                    w
                }
            };
            deposition.push(w);
        }
        let total: f64 = deposition.iter().sum::<f64>() * prof.dz;
        if !(total > 0.0) {
            return Err(Error::Domain("heating deposition vanishes on the whole profile".into()));
        }
        deposition.iter_mut().for_each(|w| *w /= total);
        let rho = config.props.density;
        let mass = prof.a.iter().map(|a| PI * a * a * rho).collect();
        let face = prof
            .a
            .windows(2)
            .map(|w| PI * w[0] * w[1] / (prof.dz * prof.dz))
            .collect();
        let g = config.gas.coefficient(config.ambient) * config.pressure;
        let gas = prof.a.iter().map(|a| g * 2.0 * PI * a).collect();
        let h_ambient = (0..n)
            .map(|i| radiation.power(i, config.ambient).map(|p| p.0))
            .collect::<Result<Vec<_>>>()
            .context("radiation at ambient temperature")?;
        let enthalpy = Enthalpy::new(&config.props);
        Ok(ThermalModel {
            config,
            radiation,
            deposition,
            mass,
            face,
            gas,
            h_ambient,
            enthalpy,
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    fn cell_error(&self, i: usize, e: Error) -> Error {
        Error::Context {
            context: format!("cell {i} (z = {:.4e} m)", self.config.profile.z[i]),
            inner: Box::new(e),
        }
    }

    fn assemble(&self, temps: &[f64], absorbed: f64) -> Result<Rhs> {
        let n = self.len();
        let t0 = self.config.ambient;
        let props = &self.config.props;
        let mut f = vec![0.0; n];
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let (mut radiated, mut gas) = (0.0, 0.0);
        let lambda: Vec<f64> = temps.iter().map(|&t| props.conductivity(t)).collect();
        for i in 0..n - 1 {
            let g = self.face[i] * 0.5 * (lambda[i] + lambda[i + 1]);
            let q = g * (temps[i + 1] - temps[i]);
            f[i] += q;
            f[i + 1] -= q;
            diag[i] -= g;
            diag[i + 1] -= g;
            sup[i] += g;
            sub[i + 1] += g;
        }
        for i in 0..n {
            let (h, dh) = self
                .radiation
                .power(i, temps[i])
                .map_err(|e| self.cell_error(i, e))?;
            let rad = h - self.h_ambient[i];
            let cool = self.gas[i] * (temps[i] - t0);
            f[i] += absorbed * self.deposition[i] - rad - cool;
            diag[i] -= dh + self.gas[i];
            radiated += rad;
            gas += cool;
        }
        let dz = self.config.profile.dz;
        Ok(Rhs {
            f,
            sub,
            diag,
            sup,
            radiated: radiated * dz,
            gas: gas * dz,
        })
    }

    /// ∂_t T at time `t`.
    pub fn rhs(&self, t: f64, temps: &[f64]) -> Result<Vec<f64>> {
        let p = self.config.eta * self.config.schedule.power_at(t);
        let r = self.assemble(temps, p)?;
        Ok(r.f
            .iter()
            .zip(temps)
            .zip(&self.mass)
            .map(|((f, &t), m)| f / (m * self.config.props.heat_capacity(t)))
            .collect())
    }

    /// Stored heat relative to the enthalpy origin, per cell [J/m].
    fn energy(&self, temps: &[f64]) -> Vec<f64> {
        temps
            .iter()
            .zip(&self.mass)
            .map(|(&t, m)| m * self.enthalpy.value(t))
            .collect()
    }

    /// Total thermal energy ∫ π a² ρ (h(T) − h(T₀)) dz [J].
    pub fn thermal_energy(&self, temps: &[f64]) -> f64 {
        let h0 = self.enthalpy.value(self.config.ambient);
        temps
            .iter()
            .zip(&self.mass)
            .map(|(&t, m)| m * (self.enthalpy.value(t) - h0))
            .sum::<f64>()
            * self.config.profile.dz
    }

    /// Solve e(T) − target − c f(T) = 0 by Newton from `guess`.
    fn implicit_stage(&self, target: &[f64], c: f64, absorbed: f64, guess: &[f64]) -> Result<(Vec<f64>, Rhs)> {
        let n = self.len();
        let props = &self.config.props;
        let mut temps = guess.to_vec();
        for _ in 0..16 {
            let r = self.assemble(&temps, absorbed)?;
            let e = self.energy(&temps);
            let mut res = vec![0.0; n];
            let mut diag = vec![0.0; n];
            let mut sub = vec![0.0; n];
            let mut sup = vec![0.0; n];
            for i in 0..n {
                res[i] = -(e[i] - target[i] - c * r.f[i]);
                diag[i] = self.mass[i] * props.heat_capacity(temps[i]) - c * r.diag[i];
                sub[i] = -c * r.sub[i];
                sup[i] = -c * r.sup[i];
            }
            let delta = solve_tridiagonal(&sub, &diag, &sup, &res);
            let mut worst: f64 = 0.0;
            for i in 0..n {
                temps[i] += delta[i];
                worst = worst.max(delta[i].abs());
            }
            if !temps.iter().all(|t| t.is_finite() && *t > 0.0) {
                break;
            }
            if worst < 1e-10 * (1.0 + temps.iter().cloned().fold(0.0, f64::max)) {
                let r = self.assemble(&temps, absorbed)?;
                return Ok((temps, r));
            }
        }
        Err(Error::NonConvergence("Newton iteration in the implicit stage".into()))
    }

    /// Integrate the heating schedule from T ≡ T₀.
    pub fn solve(&self) -> Result<TemperatureField> {
        self.solve_from(&vec![self.config.ambient; self.len()])
    }

    /// Integrate the heating schedule from an arbitrary initial profile.
    pub fn solve_from(&self, initial: &[f64]) -> Result<TemperatureField> {
        let cfg = &self.config;
        let n = self.len();
        if initial.len() != n || initial.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Domain(format!(
                "initial profile needs {n} positive temperatures, got {}",
                initial.len()
            )));
        }
        let opts = cfg.solver;
        let t0 = cfg.ambient;
        let dz = cfg.profile.dz;
        let p_ref = cfg.eta * cfg.schedule.max_power();
        let d = 0.5 * GAMMA;
        let w = std::f64::consts::SQRT_2 / 4.0;

        let mut t = 0.0;
        let mut temps = initial.to_vec();
        let mut field = TemperatureField {
            times: vec![0.0],
            z: cfg.profile.z.clone(),
            temps: vec![temps.clone()],
            budget: Vec::new(),
            rejected_steps: 0,
            notes: Vec::new(),
        };
        let mut steps = 0usize;
        for stop in cfg.schedule.breakpoints() {
            let absorbed = cfg.eta * cfg.schedule.power_at(t);
            let mut h = opts.h_init.min(stop - t);
            let mut rhs_n = self.assemble(&temps, absorbed)?;
            while t < stop * (1.0 - 1e-14) {
                if steps >= opts.max_steps {
                    return Err(Error::NonConvergence(format!(
                        "step budget of {} exhausted at t = {t} s",
                        opts.max_steps
                    )));
                }
                steps += 1;
                h = h.min(stop - t).min(opts.h_max);
                let last = t + h >= stop * (1.0 - 1e-12);
                let e_n = self.energy(&temps);
                let attempt = (|| -> Result<(Vec<f64>, Rhs, Vec<f64>, Rhs)> {
                    // trapezoid stage to t + γh
                    let target: Vec<f64> = (0..n).map(|i| e_n[i] + h * d * rhs_n.f[i]).collect();
                    let guess: Vec<f64> = (0..n)
                        .map(|i| {
                            temps[i]
                                + GAMMA * h * rhs_n.f[i]
                                    / (self.mass[i] * cfg.props.heat_capacity(temps[i]))
                        })
                        .collect();
                    let (tg, rg) = self.implicit_stage(&target, h * d, absorbed, &guess)?;
                    // BDF2 stage to t + h
                    let target: Vec<f64> =
                        (0..n).map(|i| e_n[i] + h * w * (rhs_n.f[i] + rg.f[i])).collect();
                    let guess: Vec<f64> = (0..n).map(|i| temps[i] + (tg[i] - temps[i]) / GAMMA).collect();
                    let (tn, rn) = self.implicit_stage(&target, h * d, absorbed, &guess)?;
                    Ok((tg, rg, tn, rn))
                })();
                let (_, rg, tn, rn) = match attempt {
                    Ok(v) => v,
                    Err(Error::NonConvergence(_)) | Err(Error::Coverage { .. }) if h > 1e-12 => {
                        field.rejected_steps += 1;
                        h *= 0.25;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                // embedded error estimate, filtered through the stage matrix
                let c1 = (1.0 - w) / 3.0 - w;
                let c2 = (3.0 * w + 1.0) / 3.0 - w;
                let c3 = d / 3.0 - d;
                let est: Vec<f64> = (0..n)
                    .map(|i| h * (c1 * rhs_n.f[i] + c2 * rg.f[i] + c3 * rn.f[i]))
                    .collect();
                let diag: Vec<f64> = (0..n)
                    .map(|i| self.mass[i] * cfg.props.heat_capacity(tn[i]) - h * d * rn.diag[i])
                    .collect();
                let sub: Vec<f64> = rn.sub.iter().map(|v| -h * d * v).collect();
                let sup: Vec<f64> = rn.sup.iter().map(|v| -h * d * v).collect();
                let err_t = solve_tridiagonal(&sub, &diag, &sup, &est);
                let err = (0..n)
                    .map(|i| err_t[i].abs() / (opts.atol + opts.rtol * (tn[i] - t0).abs()))
                    .fold(0.0, f64::max);
                // energy budget of the step
                let e_new = self.energy(&tn);
                let stored: f64 = (0..n).map(|i| e_new[i] - e_n[i]).sum::<f64>() * dz / h;
                let net = |r: &Rhs| absorbed - r.radiated - r.gas;
                let net_in = 0.5 * (net(&rhs_n) + net(&rn));
                // without heating, compare against the losses or, failing
                // those, the heat moved around by conduction
                let scale = if p_ref > 0.0 {
                    p_ref
                } else {
                    let moved: f64 = (0..n).map(|i| (e_new[i] - e_n[i]).abs()).sum::<f64>() * dz / h;
                    let losses = 0.5 * (rhs_n.radiated + rn.radiated + rhs_n.gas + rn.gas);
                    moved.max(losses.abs())
                };
                let residual = if scale > 0.0 { (stored - net_in).abs() / scale } else { 0.0 };
                let budget_ok = residual <= opts.budget_tolerance;
                if err <= 1.0 && budget_ok {
                    t = if last { stop } else { t + h };
                    field.budget.push(StepBudget {
                        t,
                        h,
                        stored_rate: stored,
                        net_in,
                        absorbed,
                        radiated: 0.5 * (rhs_n.radiated + rn.radiated),
                        gas: 0.5 * (rhs_n.gas + rn.gas),
                        residual,
                    });
                    temps = tn;
                    rhs_n = rn;
                    field.times.push(t);
                    field.temps.push(temps.clone());
                    let grow = if err > 0.0 { 0.9 * err.powf(-1.0 / 3.0) } else { 4.0 };
                    h *= grow.clamp(0.2, 4.0);
                } else {
                    field.rejected_steps += 1;
                    let shrink = if err > 1.0 { 0.9 * err.powf(-1.0 / 3.0) } else { 0.5 };
                    h *= shrink.clamp(0.1, 0.5);
                    if h < 1e-14 {
                        return Err(Error::NonConvergence(format!("step size underflow at t = {t} s")));
                    }
                }
            }
        }
        field.notes = self.range_notes(field.max_temperature());
        Ok(field)
    }

    fn range_notes(&self, t_max: f64) -> Vec<String> {
        let p = &self.config.props;
        let mut notes = Vec::new();
        let (_, cp_hi) = p.heat_capacity.range();
        if t_max > cp_hi {
            notes.push(format!("heat capacity held at its {cp_hi} K value up to {t_max:.0} K"));
        }
        let (_, k_hi) = p.conductivity.range();
        if t_max > k_hi {
            notes.push(format!("conductivity held at its {k_hi} K value up to {t_max:.0} K"));
        }
        if t_max > p.thermo_optic.validated_max {
            notes.push(format!(
                "thermo-optic coefficient extrapolated beyond {} K",
                p.thermo_optic.validated_max
            ));
        }
        if self.config.pressure > GAS_VALIDITY_PRESSURE {
            notes.push(format!(
                "pressure {} Pa exceeds the free-molecular range; gas cooling is overestimated",
                self.config.pressure
            ));
        }
        notes
    }

    /// Steady state under constant heating `p_heat` [W], by pseudo-transient
    /// continuation from T ≡ T₀.
    pub fn steady_state(&self, p_heat: f64) -> Result<Vec<f64>> {
        let n = self.len();
        let absorbed = self.config.eta * p_heat;
        let props = &self.config.props;
        let dz = self.config.profile.dz;
        let mut temps = vec![self.config.ambient; n];
        if absorbed == 0.0 {
            return Ok(temps);
        }
        let mut tau = 1e-3;
        let mut prev_norm = f64::INFINITY;
        for _ in 0..400 {
            let r = self.assemble(&temps, absorbed)?;
            let norm: f64 = r.f.iter().map(|v| v.abs()).sum::<f64>() * dz;
            if norm < 1e-10 * absorbed {
                return Ok(temps);
            }
            if norm < prev_norm {
                tau = (tau * (prev_norm / norm).min(10.0).max(1.5)).min(1e12);
            } else {
                tau = (tau * 0.3).max(1e-6);
            }
            prev_norm = norm;
            let diag: Vec<f64> = (0..n)
                .map(|i| self.mass[i] * props.heat_capacity(temps[i]) / tau - r.diag[i])
                .collect();
            let sub: Vec<f64> = r.sub.iter().map(|v| -v).collect();
            let sup: Vec<f64> = r.sup.iter().map(|v| -v).collect();
            let delta = solve_tridiagonal(&sub, &diag, &sup, &r.f);
            // keep each update physical
            let lim = 200.0;
            let scale = delta.iter().map(|d| d.abs()).fold(0.0, f64::max).max(lim) / lim;
            for i in 0..n {
                temps[i] = (temps[i] + delta[i] / scale).max(self.config.ambient.min(temps[i]));
            }
        }
        Err(Error::NonConvergence(format!(
            "steady state not reached for P_heat = {p_heat} W"
        )))
    }

    /// Power balance of a steady profile: (absorbed, radiated, gas,
    /// conducted out through the ends) [W].
    pub fn balance(&self, temps: &[f64], p_heat: f64) -> Result<(f64, f64, f64, f64)> {
        let absorbed = self.config.eta * p_heat;
        let r = self.assemble(temps, absorbed)?;
        // insulated ends: nothing leaves by conduction
        Ok((absorbed, r.radiated, r.gas, 0.0))
    }
}

/// Temperature at which a cylinder radiating `curve` (gross power per
/// length) sheds `p_per_length` above its ambient emission, to 1e-3 K.
pub fn equilibrium_temperature(p_per_length: f64, ambient: f64, curve: &EmissionCurve) -> Result<f64> {
    if !(p_per_length >= 0.0) {
        return Err(Error::Domain(format!("absorbed power must be ≥ 0, got {p_per_length}")));
    }
    if p_per_length == 0.0 {
        return Ok(ambient);
    }
    let h0 = curve.eval(ambient)?.0;
    let (_, hi) = curve.range();
    let f = |t: f64| curve.eval(t).map(|v| v.0 - h0 - p_per_length).unwrap_or(f64::NAN);
    if f(hi) < 0.0 {
        return Err(Error::Bracket(format!(
            "{p_per_length} W/m exceeds the emission table (max {hi} K)"
        )));
    }
    brent_root(f, ambient, hi, 1e-3)
}
