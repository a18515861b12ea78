//! Post-processing of simulated runs: time constants, absorbed-fraction
//! fits, the waist temperature scale and viscous stability estimates.

use crate::constants::G_N;
use crate::error::{Context, Error, Result};
use crate::fiber::{quantize_readout, PathIntegrator, Staircase, Trend, PEAK_SPACING};
use crate::materials::SilicaThermalProperties;
use crate::numeric::{brent_minimize, brent_root};
use crate::thermal::{TemperatureField, ThermalModel};

/// Rise and fall times of one heating/cooling cycle [s].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TimeConstants {
    pub rise_10_50: f64,
    pub rise_75_90: f64,
    pub fall_90_50: f64,
    pub fall_25_10: f64,
}

impl TimeConstants {
    pub fn as_array(&self) -> [f64; 4] {
        [self.rise_10_50, self.rise_75_90, self.fall_90_50, self.fall_25_10]
    }
}

/// First time the trace reaches `level` going up (`rising`) or down, by
/// linear interpolation between samples.
pub fn crossing_time(times: &[f64], values: &[f64], level: f64, rising: bool) -> Result<f64> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::Domain("trace needs at least two (t, value) samples".into()));
    }
    let reached = |v: f64| if rising { v >= level } else { v <= level };
    if reached(values[0]) {
        return Ok(times[0]);
    }
    for k in 1..values.len() {
        if reached(values[k]) {
            let (v0, v1) = (values[k - 1], values[k]);
            let f = if v1 != v0 { (level - v0) / (v1 - v0) } else { 1.0 };
            return Ok(times[k - 1] + f.clamp(0.0, 1.0) * (times[k] - times[k - 1]));
        }
    }
    Err(Error::Domain(format!("threshold {level:e} never reached")))
}

fn interval(times: &[f64], values: &[f64], max: f64, from: f64, to: f64, rising: bool) -> Result<f64> {
    let t0 = crossing_time(times, values, from * max, rising)
        .with_context(|| format!("threshold {:.0} % never reached", from * 100.0))?;
    let t1 = crossing_time(times, values, to * max, rising)
        .with_context(|| format!("threshold {:.0} % never reached", to * 100.0))?;
    if !(t1 > t0) {
        return Err(Error::Domain(format!(
            "crossings of {:.0} % and {:.0} % are not ordered (non-monotone trace)",
            from * 100.0,
            to * 100.0
        )));
    }
    Ok(t1 - t0)
}

/// 10–50 % and 75–90 % rise times of a heating segment, thresholds
/// relative to `max`.
pub fn rise_times(times: &[f64], values: &[f64], max: f64) -> Result<(f64, f64)> {
    check_max(max)?;
    Ok((
        interval(times, values, max, 0.10, 0.50, true)?,
        interval(times, values, max, 0.75, 0.90, true)?,
    ))
}

/// 90–50 % and 25–10 % fall times of a cooling segment.
pub fn fall_times(times: &[f64], values: &[f64], max: f64) -> Result<(f64, f64)> {
    check_max(max)?;
    Ok((
        interval(times, values, max, 0.90, 0.50, false)?,
        interval(times, values, max, 0.25, 0.10, false)?,
    ))
}

fn check_max(max: f64) -> Result<()> {
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::Domain(format!("segment maximum must be positive, got {max}")));
    }
    Ok(())
}

/// Time constants of a trace heated until `t_off` and cooled afterwards.
/// `max` is ΔL_opt^max; the trace value at `t_off` if `None`.
pub fn extract_time_constants(times: &[f64], values: &[f64], t_off: f64, max: Option<f64>) -> Result<TimeConstants> {
    let split = times.partition_point(|&t| t < t_off);
    if split == 0 || split >= times.len() {
        return Err(Error::Domain(format!("switch-off time {t_off} s outside the trace")));
    }
    let max = max.unwrap_or(values[split.min(values.len() - 1)]);
    let (h_t, h_v) = (&times[..=split], &values[..=split]);
    let (c_t, c_v) = (&times[split..], &values[split..]);
    let (r1, r2) = rise_times(h_t, h_v, max).context("heating segment")?;
    let (f1, f2) = fall_times(c_t, c_v, max).context("cooling segment")?;
    Ok(TimeConstants {
        rise_10_50: r1,
        rise_75_90: r2,
        fall_90_50: f1,
        fall_25_10: f2,
    })
}

/// Piecewise-linear trace through a staircase: start, the midpoint level of
/// each step at its time, then the augmentation point.
pub fn staircase_trace(s: &Staircase) -> (Vec<f64>, Vec<f64>) {
    let mut t = vec![s.start.0];
    let mut v = vec![s.start.1];
    let mut prev = s.start.1;
    for &(ts, level) in &s.steps {
        t.push(ts);
        v.push(0.5 * (prev + level));
        prev = level;
    }
    if s.augmentation.0 > *t.last().unwrap() {
        t.push(s.augmentation.0);
        v.push(s.augmentation.1);
    }
    (t, v)
}

/// Readout of one simulated heating/cooling cycle.
#[derive(Debug, Clone)]
pub struct CycleReadout {
    pub times: Vec<f64>,
    /// Continuous ΔL_opt(t) [m].
    pub delta_l: Vec<f64>,
    /// Temperature at the waist center [K].
    pub waist_temperature: Vec<f64>,
    pub t_off: f64,
    pub heating: Staircase,
    pub cooling: Staircase,
}

impl CycleReadout {
    /// Build the readout of `field` with heating switched off at `t_off`.
    pub fn from_field(field: &TemperatureField, integ: &PathIntegrator, ambient: f64, waist: usize, t_off: f64) -> Result<Self> {
        let delta_l = field
            .temps
            .iter()
            .map(|row| integ.path_change(row, ambient))
            .collect::<Result<Vec<_>>>()?;
        let waist_temperature = field.trace(waist);
        let split = field.times.partition_point(|&t| t < t_off).min(field.times.len() - 1);
        let heating = quantize_readout(&field.times[..=split], &delta_l[..=split], 0.0, Some(Trend::Rising))?;
        let cooling = quantize_readout(
            &field.times[split..],
            &delta_l[split..],
            heating.augmentation.1,
            Some(Trend::Falling),
        )?;
        Ok(CycleReadout {
            times: field.times.clone(),
            delta_l,
            waist_temperature,
            t_off,
            heating,
            cooling,
        })
    }

    /// ΔL_opt^max of the continuous trace.
    pub fn max_delta_l(&self) -> f64 {
        self.delta_l.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn time_constants(&self) -> Result<TimeConstants> {
        extract_time_constants(&self.times, &self.delta_l, self.t_off, Some(self.max_delta_l()))
    }

    /// Time constants read from the peak-count staircases, the way the
    /// measured traces are evaluated.
    pub fn staircase_time_constants(&self) -> Result<TimeConstants> {
        let max = self.heating.augmentation.1;
        let (ht, hv) = staircase_trace(&self.heating);
        let (ct, cv) = staircase_trace(&self.cooling);
        let (r1, r2) = rise_times(&ht, &hv, max).context("heating staircase")?;
        let (f1, f2) = fall_times(&ct, &cv, max).context("cooling staircase")?;
        Ok(TimeConstants {
            rise_10_50: r1,
            rise_75_90: r2,
            fall_90_50: f1,
            fall_25_10: f2,
        })
    }
}

/// Steady-state forward map P_abs ↦ (ΔL_opt^max, waist temperature) for one
/// parameter set. The model's own η is ignored; callers pass P_abs.
pub struct EquilibriumMap<'a> {
    pub model: &'a ThermalModel,
    pub integrator: &'a PathIntegrator,
    pub waist: usize,
}

impl EquilibriumMap<'_> {
    pub fn evaluate(&self, p_abs: f64) -> Result<(f64, f64)> {
        let eta = self.model.config.eta;
        if !(eta > 0.0) {
            return Err(Error::Config("equilibrium map needs a model with η > 0".into()));
        }
        let temps = self.model.steady_state(p_abs / eta)?;
        let dl = self.integrator.path_change(&temps, self.model.config.ambient)?;
        Ok((dl, temps[self.waist]))
    }
}

/// Absorbed fraction fitted for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaEstimate {
    pub eta: f64,
    /// Model minus data per point [m].
    pub residuals: Vec<f64>,
    /// Best sum of squares after each minimizer iteration.
    pub trace: Vec<f64>,
}

/// Band of η over several parameter sets.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaFit {
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_mean: f64,
    pub per_set: Vec<EtaEstimate>,
}

/// Least-squares η for data rows (P_heat, ΔL_opt^max) given a forward map
/// P_abs ↦ ΔL_opt^max. A log-spaced scan brackets the minimum before the
/// Brent search.
pub fn fit_eta_single(data: &[(f64, f64)], forward: &dyn Fn(f64) -> Result<f64>) -> Result<EtaEstimate> {
    if data.len() < 3 {
        return Err(Error::Domain(format!("η fit needs at least 3 data points, got {}", data.len())));
    }
    let sse = |ln_eta: f64| -> Result<f64> {
        let eta = ln_eta.exp();
        let mut s = 0.0;
        for &(p, dl) in data {
            let r = forward(eta * p)? - dl;
            s += r * r;
        }
        Ok(s)
    };
    let (lo, hi) = (1e-5f64.ln(), 1f64.ln());
    let n = 24;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let mut vals = Vec::with_capacity(grid.len());
    for &g in &grid {
        // stop scanning once the model leaves its tables: η is already too big
        match sse(g) {
            Ok(v) => vals.push(v),
            Err(_) if !vals.is_empty() => break,
            Err(e) => return Err(e),
        }
    }
    let k = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let a = grid[k.saturating_sub(1)];
    let b = grid[(k + 1).min(vals.len() - 1)];
    let mut failure = None;
    let (x, _, trace) = brent_minimize(
        |x| match sse(x) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        a,
        b,
        1e-7,
    )
    .context("η fit")?;
    if let Some(e) = failure {
        if !sse(x).map(|v| v.is_finite()).unwrap_or(false) {
            return Err(e);
        }
    }
    let eta = x.exp();
    let residuals = data
        .iter()
        .map(|&(p, dl)| forward(eta * p).map(|m| m - dl))
        .collect::<Result<Vec<_>>>()?;
    Ok(EtaEstimate { eta, residuals, trace })
}

/// η per parameter set and the band they span.
pub fn fit_eta(data: &[(f64, f64)], forwards: &[&dyn Fn(f64) -> Result<f64>]) -> Result<EtaFit> {
    if forwards.is_empty() {
        return Err(Error::Config("η fit needs at least one parameter set".into()));
    }
    let per_set = forwards
        .iter()
        .enumerate()
        .map(|(i, f)| fit_eta_single(data, *f).with_context(|| format!("parameter set {i}")))
        .collect::<Result<Vec<_>>>()?;
    let eta_min = per_set.iter().map(|e| e.eta).fold(f64::INFINITY, f64::min);
    let eta_max = per_set.iter().map(|e| e.eta).fold(0.0, f64::max);
    Ok(EtaFit {
        eta_min,
        eta_max,
        eta_mean: 0.5 * (eta_min + eta_max),
        per_set,
    })
}

/// Which part of a cycle a temperature-scale entry describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Equilibrium,
    Heating,
    Cooling,
}

/// One row of the waist temperature scale.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ScaleEntry {
    pub p_heat: f64,
    pub phase: Phase,
    /// ΔL_opt of the two extremal parameter sets [m].
    pub delta_l: (f64, f64),
    pub t_waist_max: f64,
    pub t_waist_min: f64,
}

impl ScaleEntry {
    /// T̄ = (T_max + T_min)/2.
    pub fn mean(&self) -> f64 {
        0.5 * (self.t_waist_max + self.t_waist_min)
    }

    /// ΔT̄ = (T_max − T_min)/2.
    pub fn half_width(&self) -> f64 {
        0.5 * (self.t_waist_max - self.t_waist_min)
    }
}

/// Equilibrium temperature scale from two extremal parameter sets at
/// P_abs = η P_heat.
pub fn temperature_scale(maps: [&EquilibriumMap; 2], eta: f64, p_heat: &[f64]) -> Result<Vec<ScaleEntry>> {
    let mut out = Vec::with_capacity(p_heat.len());
    for &p in p_heat {
        let (dl0, t0) = maps[0].evaluate(eta * p)?;
        let (dl1, t1) = maps[1].evaluate(eta * p)?;
        out.push(ScaleEntry {
            p_heat: p,
            phase: Phase::Equilibrium,
            delta_l: (dl0, dl1),
            t_waist_max: t0.max(t1),
            t_waist_min: t0.min(t1),
        });
    }
    Ok(out)
}

/// ΔL_opt ↦ waist temperature along a simulated cycle, split by phase.
/// The same ΔL maps to different temperatures while heating and cooling.
pub fn transient_scale(readout: &CycleReadout) -> Vec<(Phase, f64, f64)> {
    readout
        .times
        .iter()
        .zip(&readout.delta_l)
        .zip(&readout.waist_temperature)
        .map(|((&t, &dl), &tw)| {
            let phase = if t <= readout.t_off { Phase::Heating } else { Phase::Cooling };
            (phase, dl, tw)
        })
        .collect()
}

/// Viscous time scales of a hot filament.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StabilityReport {
    pub temperature: f64,
    /// Strain relaxation time 3η/σ_i [s].
    pub tau_s: f64,
    /// Gravity-driven deformation time η/(3ρ g L₀) [s].
    pub tau_v: f64,
    /// Temperatures where τ_v equals the upper and lower window bound.
    pub t_break: (f64, f64),
    /// Stress whose relaxation time equals the residual-stress horizon [Pa].
    pub sigma_residual: f64,
    /// Viscosity used outside its fitted range.
    pub extrapolated: bool,
}

/// Inputs of [`viscous_stability`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StabilityParams {
    /// Initial stress σ_i [Pa].
    pub sigma_initial: f64,
    /// Filament length L₀ [m].
    pub length: f64,
    /// τ_v window [s] that defines the breaking band.
    pub tau_window: (f64, f64),
    /// τ_s at which the remaining stress is evaluated [s].
    pub tau_residual: f64,
}

impl Default for StabilityParams {
    fn default() -> Self {
        StabilityParams {
            sigma_initial: 1e6,
            length: 5e-3,
            tau_window: (0.5, 5.0),
            tau_residual: 60.0,
        }
    }
}

pub fn tau_s(props: &SilicaThermalProperties, temp: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("stress must be > 0, got {sigma}")));
    }
    Ok(3.0 * props.viscosity.eval(temp)?.value / sigma)
}

pub fn tau_v(props: &SilicaThermalProperties, temp: f64, length: f64) -> Result<f64> {
    if !(length > 0.0) {
        return Err(Error::Domain(format!("length must be > 0, got {length}")));
    }
    Ok(props.viscosity.eval(temp)?.value / (3.0 * props.density * G_N * length))
}

/// Temperature at which τ_v reaches `tau`, searched in [300, 10000] K.
pub fn tau_v_temperature(props: &SilicaThermalProperties, tau: f64, length: f64) -> Result<f64> {
    let f = |t: f64| tau_v(props, t, length).map(|v| v.ln() - tau.ln()).unwrap_or(f64::NAN);
    if !(f(300.0) > 0.0 && f(1e4) < 0.0) {
        return Err(Error::Bracket(format!("τ_v = {tau} s not bracketed in [300, 10000] K")));
    }
    brent_root(f, 300.0, 1e4, 1e-6)
}

pub fn viscous_stability(props: &SilicaThermalProperties, temp: f64, p: &StabilityParams) -> Result<StabilityReport> {
    let (w_lo, w_hi) = p.tau_window;
    if !(w_lo > 0.0 && w_hi > w_lo) {
        return Err(Error::Config(format!("τ_v window must satisfy 0 < lo < hi, got {:?}", p.tau_window)));
    }
    let visc = props.viscosity.eval(temp)?;
    let t_break = (
        tau_v_temperature(props, w_hi, p.length)?,
        tau_v_temperature(props, w_lo, p.length)?,
    );
    Ok(StabilityReport {
        temperature: temp,
        tau_s: tau_s(props, temp, p.sigma_initial)?,
        tau_v: tau_v(props, temp, p.length)?,
        t_break,
        sigma_residual: 3.0 * visc.value / p.tau_residual,
        extrapolated: visc.extrapolated,
    })
}

/// ΔL_opt rounded down to whole peaks, as the counter would report.
pub fn counted_peaks(delta_l: f64) -> i64 {
    (delta_l / PEAK_SPACING + 1e-9).floor() as i64
}
