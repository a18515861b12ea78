//! Run configuration: a TOML file, `--set` overrides and validation into
//! library types.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use serde::{Deserialize, Serialize};

use fibertherm::analysis::StabilityParams;
use fibertherm::constants::MBAR;
use fibertherm::fiber::{build_radius_profile, RadiusProfile, TaperParameters, PROBE_WAVELENGTH};
use fibertherm::io::sha256_hex;
use fibertherm::materials::{load_nk_table, silica_nk_table, CornerSelector, RefractiveIndexTable};
use fibertherm::thermal::{Deposition, HeatingSchedule, RadiatorKind, SimulationConfig, SolverOptions};

/// Error in user input; maps to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub taper: TaperParameters,
    pub materials: Materials,
    pub radiator: Radiator,
    pub heating: Heating,
    pub environment: Environment,
    pub solver: SolverOptions,
    pub emissivity: EmissivitySection,
    pub power_curve: PowerCurveSection,
    pub sweep: SweepSection,
    pub fit: FitSection,
    pub stability: StabilitySection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Materials {
    /// Optional n,k table replacing the bundled silica data.
    pub nk_table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Radiator {
    pub kind: RadiatorKind,
    /// Corners run by `simulate`, `sweep` and `fit-eta`.
    pub corners: Vec<String>,
    pub radii_per_decade: f64,
    pub probe_tolerance: f64,
}

impl Default for Radiator {
    fn default() -> Self {
        Radiator {
            kind: RadiatorKind::Fed,
            corners: vec!["nmin_kmin".into(), "nmax_kmax".into()],
            radii_per_decade: 18.0,
            probe_tolerance: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Heating {
    pub eta: f64,
    pub power_w: f64,
    pub on_s: f64,
    pub end_s: f64,
    pub deposition: Deposition,
    pub wavelength_m: f64,
}

impl Default for Heating {
    fn default() -> Self {
        Heating {
            eta: 2e-3,
            power_w: 32.7e-3,
            on_s: 1.0,
            end_s: 3.0,
            deposition: Deposition::Surface,
            wavelength_m: PROBE_WAVELENGTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Environment {
    pub pressure_mbar: f64,
    pub ambient_k: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Environment {
            pressure_mbar: 1e-6,
            ambient_k: 294.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmissivitySection {
    pub radius_m: f64,
    /// Blackbody overlays; their range also sets the frequency grid.
    pub temperatures_k: Vec<f64>,
}

impl Default for EmissivitySection {
    fn default() -> Self {
        EmissivitySection {
            radius_m: 250e-9,
            temperatures_k: vec![300.0, 1000.0, 2000.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerCurveSection {
    pub radius_m: f64,
    pub t_min_k: f64,
    pub t_max_k: f64,
    pub t_step_k: f64,
}

impl Default for PowerCurveSection {
    fn default() -> Self {
        PowerCurveSection {
            radius_m: 250e-9,
            t_min_k: 400.0,
            t_max_k: 1800.0,
            t_step_k: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    Power,
    Pressure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Equilibrium,
    Transient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub variable: SweepVariable,
    /// P_heat [W] or pressure [mbar].
    pub values: Vec<f64>,
    pub mode: SweepMode,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            variable: SweepVariable::Power,
            values: vec![5e-3, 10e-3, 20e-3, 30e-3],
            mode: SweepMode::Equilibrium,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    /// `P_heat_W,dLopt_max_m` rows.
    pub data: Option<PathBuf>,
    /// Fit against full transients instead of equilibrium solutions.
    pub transient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    pub sigma_initial_pa: f64,
    pub length_m: f64,
    pub tau_window_s: [f64; 2],
    pub tau_residual_s: f64,
    pub t_min_k: f64,
    pub t_max_k: f64,
    pub t_step_k: f64,
}

impl Default for StabilitySection {
    fn default() -> Self {
        let p = StabilityParams::default();
        StabilitySection {
            sigma_initial_pa: p.sigma_initial,
            length_m: p.length,
            tau_window_s: [p.tau_window.0, p.tau_window.1],
            tau_residual_s: p.tau_residual,
            t_min_k: 1400.0,
            t_max_k: 2800.0,
            t_step_k: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Cache directory; `FIBERTHERM_CACHE_DIR` takes precedence.
    pub cache_dir: Option<PathBuf>,
    /// Also write the full T(t, z) field from `simulate`.
    pub field: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            taper: TaperParameters::tof1(),
            materials: Materials::default(),
            radiator: Radiator::default(),
            heating: Heating::default(),
            environment: Environment::default(),
            solver: SolverOptions::default(),
            emissivity: EmissivitySection::default(),
            power_curve: PowerCurveSection::default(),
            sweep: SweepSection::default(),
            fit: FitSection::default(),
            stability: StabilitySection::default(),
            output: OutputSection::default(),
        }
    }
}

/// Reference configuration printed by `--emit-default-config`.
pub const DEFAULT_CONFIG: &str = r#"# fibertherm run configuration. Every key is optional; omitted keys take
# the values shown here. Command-line `--set section.key=value` overrides
# any of them.

[taper]
# radius slopes dr/dz of the three linear sections (cladding side first)
theta1 = 0.005
theta2 = 0.002
theta3 = 0.004
# radii where the slope changes [m]
r1 = 4e-5
r2 = 1.5e-5
# waist radius and length [m]
waist_radius = 2.5e-7
waist_length = 0.01
cladding_radius = 6.25e-5
# length scale of the exponential section next to the waist [m]
exp_length = 0.003338
# cell size [m]
dz = 0.0001
# simulated fiber beyond each end of the waist [m]
margin = 0.01

[materials]
# n,k table (wavelength_m,n_min,n_max,k_min,k_max); bundled silica data if unset
# nk_table = "silica_nk.csv"

[radiator]
# "fed" (cylinder T-matrix emission), "planck-interface" or "disabled"
kind = "fed"
# band corners to run; the extremal pair by default
corners = ["nmin_kmin", "nmax_kmax"]
# density of the radius table used for FED emission along the taper
radii_per_decade = 18.0
# tolerated radius-interpolation error at the probe radius
probe_tolerance = 0.01

[heating]
# absorbed fraction of the transmitted heating power
eta = 0.002
# heating power [W], switched on at t = 0 and off at on_s [s]
power_w = 0.0327
on_s = 1.0
# end of the simulated cycle [s]
end_s = 3.0
# "surface" or "volume" absorption
deposition = "surface"
# heating wavelength, which shapes the deposition [m]
wavelength_m = 8.52e-7

[environment]
pressure_mbar = 1e-6
ambient_k = 294.0

[solver]
# relative tolerance on T - T0 and absolute tolerance [K]
rtol = 0.0001
atol = 0.001
# first and largest time step [s]
h_init = 1e-5
h_max = 0.005
max_steps = 200000
# accepted energy-budget residual, relative to the peak absorbed power
budget_tolerance = 0.005

[emissivity]
radius_m = 2.5e-7
# blackbody overlay temperatures [K]; their range sets the frequency grid
temperatures_k = [300.0, 1000.0, 2000.0]

[power_curve]
radius_m = 2.5e-7
t_min_k = 400.0
t_max_k = 1800.0
t_step_k = 100.0

[sweep]
# "power" (values in W) or "pressure" (values in mbar)
variable = "power"
values = [0.005, 0.01, 0.02, 0.03]
# "equilibrium" (steady state) or "transient" (full cycle maximum)
mode = "equilibrium"

[fit]
# data file with P_heat_W,dLopt_max_m rows
# data = "measured.csv"
transient = false

[stability]
sigma_initial_pa = 1000000.0
# filament length [m]
length_m = 0.005
# window of the gravity-driven time scale defining the breaking band [s]
tau_window_s = [0.5, 5.0]
# relaxation time at which the remaining stress is reported [s]
tau_residual_s = 60.0
t_min_k = 1400.0
t_max_k = 2800.0
t_step_k = 50.0

[output]
# cache directory for emission spectra; FIBERTHERM_CACHE_DIR overrides it
# cache_dir = "cache"
# write the full T(t, z) field from `simulate`
field = false
"#;

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Apply `section.key=value` to a parsed document.
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{spec}` is not of the form section.key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        bail!(config_err(format!("override key `{key}` is malformed")));
    }
    let mut table = doc;
    for part in &path[..path.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override `{key}`: `{part}` is not a section")))?;
    }
    table.insert(path[path.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl Config {
    /// Read `path` (if any), apply overrides and validate.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_err(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| config_err(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: Config = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.taper.validate().map_err(|e| config_err(e.to_string()))?;
        self.corners()?;
        let h = &self.heating;
        if !(0.0..=1.0).contains(&h.eta) {
            bail!(config_err(format!("heating.eta must lie in [0, 1], got {}", h.eta)));
        }
        if !(h.power_w >= 0.0 && h.on_s > 0.0 && h.end_s > h.on_s) {
            bail!(config_err("heating: need power_w ≥ 0 and 0 < on_s < end_s"));
        }
        if !(self.environment.pressure_mbar >= 0.0 && self.environment.ambient_k > 0.0) {
            bail!(config_err("environment: need pressure_mbar ≥ 0 and ambient_k > 0"));
        }
        if !(self.radiator.radii_per_decade > 0.0 && self.radiator.probe_tolerance > 0.0) {
            bail!(config_err("radiator: radii_per_decade and probe_tolerance must be > 0"));
        }
        let e = &self.emissivity;
        if !(e.radius_m > 0.0) || e.temperatures_k.is_empty() || e.temperatures_k.iter().any(|t| !(*t > 0.0)) {
            bail!(config_err("emissivity: need radius_m > 0 and positive temperatures_k"));
        }
        let p = &self.power_curve;
        if !(p.radius_m > 0.0 && p.t_min_k > 0.0 && p.t_max_k >= p.t_min_k && p.t_step_k > 0.0) {
            bail!(config_err("power_curve: need radius_m > 0 and 0 < t_min_k ≤ t_max_k, t_step_k > 0"));
        }
        let s = &self.stability;
        if !(s.t_min_k > 0.0 && s.t_max_k >= s.t_min_k && s.t_step_k > 0.0) {
            bail!(config_err("stability: need 0 < t_min_k ≤ t_max_k and t_step_k > 0"));
        }
        if self.sweep.values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            bail!(config_err("sweep.values must be finite and ≥ 0"));
        }
        Ok(())
    }

    pub fn corners(&self) -> Result<Vec<CornerSelector>> {
        if self.radiator.corners.is_empty() {
            bail!(config_err("radiator.corners must name at least one corner"));
        }
        self.radiator
            .corners
            .iter()
            .map(|c| c.parse().map_err(|e: fibertherm::Error| config_err(format!("radiator.corners: {e}"))))
            .collect()
    }

    /// Canonical serialization of the effective configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }

    /// The optical table named by `materials.nk_table`, or the bundled one.
    pub fn nk_table(&self) -> Result<RefractiveIndexTable> {
        match &self.materials.nk_table {
            None => Ok(silica_nk_table().clone()),
            Some(p) => {
                let f = std::fs::File::open(p)
                    .map_err(|e| config_err(format!("materials.nk_table: cannot open {}: {e}", p.display())))?;
                load_nk_table(std::io::BufReader::new(f))
                    .map_err(|e| config_err(format!("materials.nk_table ({}): {e}", p.display())))
            }
        }
    }

    pub fn profile(&self) -> Result<RadiusProfile> {
        build_radius_profile(&self.taper).map_err(|e| anyhow!(e))
    }

    pub fn stability_params(&self) -> StabilityParams {
        let s = &self.stability;
        StabilityParams {
            sigma_initial: s.sigma_initial_pa,
            length: s.length_m,
            tau_window: (s.tau_window_s[0], s.tau_window_s[1]),
            tau_residual: s.tau_residual_s,
        }
    }

    /// Thermal model inputs for the configured heating pulse.
    pub fn simulation(&self, profile: &RadiusProfile) -> SimulationConfig {
        let h = &self.heating;
        let mut sim = SimulationConfig::new(profile.clone());
        sim.eta = h.eta;
        sim.schedule = HeatingSchedule::pulse(h.power_w, h.on_s, h.end_s);
        sim.pressure = self.environment.pressure_mbar * MBAR;
        sim.ambient = self.environment.ambient_k;
        sim.deposition = h.deposition;
        sim.heating_wavelength = h.wavelength_m;
        sim.solver = self.solver;
        sim
    }
}

/// Cache directory: environment, then config, then `<out>/cache`.
pub fn cache_dir(cfg: &Config, out: &Path) -> PathBuf {
    match std::env::var_os(fibertherm::cache::CACHE_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => cfg.output.cache_dir.clone().unwrap_or_else(|| out.join("cache")),
    }
}

/// Whether an error chain stems from user input.
pub fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<ConfigError>().is_some()
            || c.downcast_ref::<fibertherm::Error>().map(|f| f.is_config()).unwrap_or(false)
    })
}
