//! Subcommand implementations. Each writes comma-separated tables into the
//! output directory and records them in the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context as _, Result};
use rayon::prelude::*;
use serde::Serialize;

use fibertherm::analysis::{fit_eta, tau_s, tau_v, viscous_stability, CycleReadout, EquilibriumMap, TimeConstants};
use fibertherm::cache::EmissivityCache;
use fibertherm::cylinder::{
    power_law_exponent, EmissivityOptions, FrequencyGrid, SpectralEmissivity, GRID_TAIL_TOLERANCE, NODES_PER_DECADE,
};
use fibertherm::fiber::{ReadoutOptics, RadiusProfile, Staircase};
use fibertherm::io::{format_num, parse_numeric_rows, CsvTable};
use fibertherm::materials::{CornerSelector, RefractiveIndexTable};
use fibertherm::radiometry::{interface_radiated_power, planck_spectral_power};
use fibertherm::thermal::{FedTableOptions, HeatingSchedule, RadiationModel, RadiatorKind, ThermalModel};

use crate::config::{cache_dir, Config, ConfigError, SweepMode, SweepVariable};

/// Some sweep points failed; maps to exit code 4.
#[derive(Debug, thiserror::Error)]
#[error("{failed} of {total} sweep points failed; see the status column")]
pub struct PartialFailure {
    pub failed: usize,
    pub total: usize,
}

#[derive(Debug, Serialize)]
struct Dataset {
    name: String,
    source: String,
    sha256: String,
}

/// Record of one invocation, written as `manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    subcommand: String,
    version: &'static str,
    config_hash: String,
    datasets: Vec<Dataset>,
    cache_dir: Option<PathBuf>,
    outputs: Vec<PathBuf>,
    threads: usize,
    wall_clock_s: f64,
}

/// State shared by the subcommands of one invocation.
pub struct Run {
    pub cfg: Config,
    out: PathBuf,
    cache: Option<EmissivityCache>,
    table: RefractiveIndexTable,
    hash: String,
    command: String,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl Run {
    pub fn new(cfg: Config, out: &Path, command: &str, no_cache: bool) -> Result<Self> {
        let table = cfg.nk_table()?;
        let cache = (!no_cache).then(|| EmissivityCache::new(cache_dir(&cfg, out)));
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let hash = cfg.hash();
        Ok(Run {
            cfg,
            out: out.to_path_buf(),
            cache,
            table,
            hash,
            command: command.to_string(),
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    fn write(&mut self, name: &str, table: CsvTable) -> Result<()> {
        let mut t = table.meta("command", &self.command).meta("config_hash", &self.hash);
        // move the provenance lines to the top of the header
        let n = t.meta.len();
        t.meta.rotate_right(2.min(n));
        let path = self.out.join(name);
        t.write(&path)?;
        self.outputs.push(path);
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        std::fs::write(self.out.join("config.toml"), self.cfg.canonical())?;
        let manifest = RunManifest {
            subcommand: self.command.clone(),
            version: env!("CARGO_PKG_VERSION"),
            config_hash: self.hash.clone(),
            datasets: vec![Dataset {
                name: "nk_table".into(),
                source: match &self.cfg.materials.nk_table {
                    Some(p) => p.display().to_string(),
                    None => "bundled silica".into(),
                },
                sha256: self.table.content_hash(),
            }],
            cache_dir: self.cache.as_ref().map(|c| c.dir().to_path_buf()),
            outputs: self.outputs.clone(),
            threads: rayon::current_num_threads(),
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        };
        let path = self.out.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }

    fn spectrum(&self, radius: f64, corner: CornerSelector, grid: &FrequencyGrid) -> Result<SpectralEmissivity> {
        let opts = EmissivityOptions::for_grid(grid);
        Ok(match &self.cache {
            Some(c) => c.get_or_compute(radius, &self.table, corner, grid, &opts)?,
            None => SpectralEmissivity::compute(radius, &self.table, corner, grid, &opts)?,
        })
    }

    fn radiation(&self, profile: &RadiusProfile, corner: CornerSelector) -> Result<RadiationModel> {
        let r = &self.cfg.radiator;
        Ok(match r.kind {
            RadiatorKind::Fed => RadiationModel::fed(
                profile,
                &self.table,
                corner,
                &FedTableOptions {
                    radii_per_decade: r.radii_per_decade,
                    probe_tolerance: r.probe_tolerance,
                    probe: true,
                    cache: self.cache.clone(),
                },
            )?,
            RadiatorKind::PlanckInterface => RadiationModel::planck_interface(profile, &self.table, corner)?,
            RadiatorKind::Disabled => RadiationModel::disabled(profile.len()),
        })
    }
}

fn temperature_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

pub fn profile(run: &mut Run) -> Result<()> {
    let p = run.cfg.profile()?;
    let t = p
        .to_csv()
        .meta("cells", p.len())
        .meta("dz_m", format_num(p.dz))
        .meta("min_radius_m", format_num(p.min_radius()))
        .meta("max_radius_m", format_num(p.max_radius()));
    run.write("profile.csv", t)
}

pub fn emissivity(run: &mut Run) -> Result<()> {
    let e = run.cfg.emissivity.clone();
    let t_lo = e.temperatures_k.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_hi = e.temperatures_k.iter().cloned().fold(0.0, f64::max);
    let grid = FrequencyGrid::for_temperatures(t_lo, t_hi, &run.table, NODES_PER_DECADE, GRID_TAIL_TOLERANCE)
        .context("frequency grid for emissivity.temperatures_k")?;
    let spectra = CornerSelector::ALL
        .iter()
        .map(|&c| run.spectrum(e.radius_m, c, &grid))
        .collect::<Result<Vec<_>>>()?;
    let mut cols = vec!["nu_hz".to_string(), "wavelength_m".into(), "eps_min".into(), "eps_max".into()];
    for t in &e.temperatures_k {
        cols.push(format!("blackbody_{}K_w_s_per_m2", format_num(*t)));
    }
    let mut table = CsvTable::new(cols)
        .meta("kind", "cylinder spectral emissivity band over the four n,k corners")
        .meta("radius_m", format_num(e.radius_m))
        .meta("grid_hash", grid.hash());
    for (i, &nu) in grid.nu.iter().enumerate() {
        let vals = spectra.iter().map(|s| s.emissivity[i]);
        let lo = vals.clone().fold(f64::INFINITY, f64::min);
        let hi = vals.fold(f64::NEG_INFINITY, f64::max);
        let mut row = vec![nu, fibertherm::constants::C0 / nu, lo, hi];
        for &t in &e.temperatures_k {
            row.push(planck_spectral_power(nu, t)?);
        }
        table.push(&row);
    }
    run.write("emissivity.csv", table)
}

pub fn power_curve(run: &mut Run) -> Result<()> {
    let pc = run.cfg.power_curve.clone();
    let ambient = run.cfg.environment.ambient_k;
    let temps = temperature_grid(pc.t_min_k, pc.t_max_k, pc.t_step_k);
    let grid = FrequencyGrid::for_temperatures(
        ambient.min(pc.t_min_k),
        ambient.max(pc.t_max_k),
        &run.table,
        NODES_PER_DECADE,
        GRID_TAIL_TOLERANCE,
    )
    .context("frequency grid for power_curve")?;
    let mut fed = Vec::new();
    let mut planck = Vec::new();
    let area = 2.0 * std::f64::consts::PI * pc.radius_m;
    for c in CornerSelector::ALL {
        fed.push(run.spectrum(pc.radius_m, c, &grid)?.power_curve(&temps, ambient)?.power);
        planck.push(
            temps
                .par_iter()
                .map(|&t| interface_radiated_power(t, ambient, area, &run.table, c))
                .collect::<fibertherm::Result<Vec<_>>>()?,
        );
    }
    let band = |curves: &[Vec<f64>], j: usize| {
        let v = curves.iter().map(|c| c[j]);
        (v.clone().fold(f64::INFINITY, f64::min), v.fold(f64::NEG_INFINITY, f64::max))
    };
    let exps = |curves: &[Vec<f64>]| -> Result<(f64, f64)> {
        let e = curves
            .iter()
            .map(|c| power_law_exponent(&temps, c, pc.t_min_k, pc.t_max_k))
            .collect::<fibertherm::Result<Vec<_>>>()?;
        Ok((e.iter().cloned().fold(f64::INFINITY, f64::min), e.iter().cloned().fold(f64::NEG_INFINITY, f64::max)))
    };
    let (fe_lo, fe_hi) = exps(&fed)?;
    let (pe_lo, pe_hi) = exps(&planck)?;
    let mut table = CsvTable::new(["t_k", "fed_min_w_per_m", "fed_max_w_per_m", "planck_min_w_per_m", "planck_max_w_per_m"])
        .meta("kind", "net radiated power per length over the four n,k corners")
        .meta("radius_m", format_num(pc.radius_m))
        .meta("ambient_k", format_num(ambient))
        .meta("fed_exponent", format!("{} .. {}", format_num(fe_lo), format_num(fe_hi)))
        .meta("planck_exponent", format!("{} .. {}", format_num(pe_lo), format_num(pe_hi)));
    for (j, &t) in temps.iter().enumerate() {
        let (f0, f1) = band(&fed, j);
        let (p0, p1) = band(&planck, j);
        table.push(&[t, f0, f1, p0, p1]);
    }
    run.write("power_curve.csv", table)
}

fn staircase_rows(table: &mut CsvTable, phase: &str, s: &Staircase) {
    let mut row = |kind: &str, t: f64, v: f64, err: f64| {
        table.push_text(vec![phase.into(), kind.into(), format_num(t), format_num(v), format_num(err)]);
    };
    row("start", s.start.0, s.start.1, 0.0);
    for &(t, v) in &s.steps {
        row("step", t, v, 0.0);
    }
    row("augmentation", s.augmentation.0, s.augmentation.1, s.augmentation.2);
}

fn constants_row(table: &mut CsvTable, corner: CornerSelector, source: &str, tc: &Result<TimeConstants, String>, extra: &[f64]) {
    let mut row = vec![corner.to_string(), source.to_string()];
    match tc {
        Ok(tc) => row.extend(tc.as_array().iter().map(|v| format_num(*v))),
        Err(_) => row.extend(std::iter::repeat("nan".to_string()).take(4)),
    }
    row.extend(extra.iter().map(|v| format_num(*v)));
    table.push_text(row);
}

pub fn simulate(run: &mut Run) -> Result<()> {
    let profile = run.cfg.profile()?;
    let optics = ReadoutOptics::default();
    let integ = optics.integrator(&profile)?;
    let waist = profile.center_index();
    let t_off = run.cfg.heating.on_s;
    let mut summary = CsvTable::new([
        "corner",
        "source",
        "rise_10_50_s",
        "rise_75_90_s",
        "fall_90_50_s",
        "fall_25_10_s",
        "dl_opt_max_m",
        "t_waist_max_k",
        "max_budget_residual",
    ])
    .meta("radiator", run.cfg.radiator.kind);
    for corner in run.cfg.corners()? {
        let model = ThermalModel::new(run.cfg.simulation(&profile), run.radiation(&profile, corner)?)?;
        let field = model.solve().with_context(|| format!("simulation for corner {corner}"))?;
        let ambient = model.config.ambient;
        let readout = CycleReadout::from_field(&field, &integ, ambient, waist, t_off)?;

        let mut trace = CsvTable::new([
            "t_s",
            "p_heat_w",
            "dl_opt_m",
            "t_waist_k",
            "t_max_k",
            "stored_w",
            "net_in_w",
            "absorbed_w",
            "radiated_w",
            "gas_w",
            "budget_residual",
        ])
        .meta("corner", corner)
        .meta("radiator", run.cfg.radiator.kind)
        .meta("rejected_steps", field.rejected_steps);
        for note in &field.notes {
            trace.push_meta("note", note);
        }
        for (k, &t) in field.times.iter().enumerate() {
            let tmax = field.temps[k].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let b = if k == 0 { None } else { field.budget.get(k - 1) };
            let b = b.map(|b| [b.stored_rate, b.net_in, b.absorbed, b.radiated, b.gas, b.residual]);
            let mut row = vec![
                t,
                model.config.schedule.power_at(t),
                readout.delta_l[k],
                readout.waist_temperature[k],
                tmax,
            ];
            row.extend(b.unwrap_or([0.0; 6]));
            trace.push(&row);
        }
        run.write(&format!("simulate_{corner}.csv"), trace)?;

        let mut stairs = CsvTable::new(["phase", "point", "t_s", "dl_opt_m", "error_m"]).meta("corner", corner);
        staircase_rows(&mut stairs, "heating", &readout.heating);
        staircase_rows(&mut stairs, "cooling", &readout.cooling);
        run.write(&format!("staircase_{corner}.csv"), stairs)?;

        if run.cfg.output.field {
            let mut f = CsvTable::new(["t_s", "z_m", "t_k"]).meta("corner", corner);
            for (k, &t) in field.times.iter().enumerate() {
                for (i, &z) in field.z.iter().enumerate() {
                    f.push(&[t, z, field.temps[k][i]]);
                }
            }
            run.write(&format!("field_{corner}.csv"), f)?;
        }

        let extra = [readout.max_delta_l(), field.trace(waist).iter().cloned().fold(0.0, f64::max), field.max_budget_residual()];
        let cont = readout.time_constants().map_err(|e| e.to_string());
        let stair = readout.staircase_time_constants().map_err(|e| e.to_string());
        for (src, tc) in [("continuous", &cont), ("staircase", &stair)] {
            if let Err(e) = tc {
                summary.push_meta("note", format!("{corner} {src}: {e}"));
            }
            constants_row(&mut summary, corner, src, tc, &extra);
        }
    }
    run.write("time_constants.csv", summary)
}

/// ΔL_opt^max and peak waist temperature of one run.
fn run_point(run: &Run, profile: &RadiusProfile, radiation: &RadiationModel, p_heat: f64, pressure_mbar: f64) -> Result<(f64, f64)> {
    let mut sim = run.cfg.simulation(profile);
    sim.pressure = pressure_mbar * fibertherm::constants::MBAR;
    sim.schedule = HeatingSchedule::pulse(p_heat, run.cfg.heating.on_s, run.cfg.heating.end_s);
    let model = ThermalModel::new(sim, radiation.clone())?;
    let integ = ReadoutOptics::default().integrator(profile)?;
    let waist = profile.center_index();
    match run.cfg.sweep.mode {
        SweepMode::Equilibrium => {
            let temps = model.steady_state(p_heat)?;
            Ok((integ.path_change(&temps, model.config.ambient)?, temps[waist]))
        }
        SweepMode::Transient => {
            let field = model.solve()?;
            let r = CycleReadout::from_field(&field, &integ, model.config.ambient, waist, run.cfg.heating.on_s)?;
            Ok((r.max_delta_l(), r.waist_temperature.iter().cloned().fold(0.0, f64::max)))
        }
    }
}

pub fn sweep(run: &mut Run) -> Result<()> {
    let sw = run.cfg.sweep.clone();
    if sw.values.is_empty() {
        bail!(ConfigError("sweep.values is empty; nothing to sweep".into()));
    }
    let profile = run.cfg.profile()?;
    let corners = run.cfg.corners()?;
    let radiation = corners
        .iter()
        .map(|&c| run.radiation(&profile, c))
        .collect::<Result<Vec<_>>>()?;
    let (p0, pr0) = (run.cfg.heating.power_w, run.cfg.environment.pressure_mbar);
    let results: Vec<Vec<Result<(f64, f64), String>>> = sw
        .values
        .par_iter()
        .map(|&v| {
            let (p, pr) = match sw.variable {
                SweepVariable::Power => (v, pr0),
                SweepVariable::Pressure => (p0, v),
            };
            radiation
                .iter()
                .map(|rad| run_point(run, &profile, rad, p, pr).map_err(|e| format!("{e:#}")))
                .collect()
        })
        .collect();

    let mut cols = vec![match sw.variable {
        SweepVariable::Power => "p_heat_w".to_string(),
        SweepVariable::Pressure => "pressure_mbar".to_string(),
    }];
    for c in &corners {
        cols.push(format!("dl_opt_max_m_{c}"));
        cols.push(format!("t_waist_k_{c}"));
    }
    cols.extend(["t_waist_mean_k", "t_waist_half_width_k", "status"].map(String::from));
    let mut table = CsvTable::new(cols)
        .meta("mode", format!("{:?}", sw.mode).to_lowercase())
        .meta("radiator", run.cfg.radiator.kind)
        .meta("eta", format_num(run.cfg.heating.eta));
    let mut failed = 0;
    for (v, res) in sw.values.iter().zip(&results) {
        let mut row = vec![format_num(*v)];
        let mut errs = Vec::new();
        let mut tw = Vec::new();
        for (c, r) in corners.iter().zip(res) {
            match r {
                Ok((dl, t)) => {
                    row.push(format_num(*dl));
                    row.push(format_num(*t));
                    tw.push(*t);
                }
                Err(e) => {
                    row.extend(["nan".to_string(), "nan".to_string()]);
                    errs.push(format!("{c}: {e}"));
                }
            }
        }
        if errs.is_empty() {
            let hi = tw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = tw.iter().cloned().fold(f64::INFINITY, f64::min);
            row.push(format_num(0.5 * (hi + lo)));
            row.push(format_num(0.5 * (hi - lo)));
            row.push("ok".into());
        } else {
            failed += 1;
            row.extend(["nan".to_string(), "nan".to_string()]);
            row.push(format!("\"failed: {}\"", errs.join("; ").replace('"', "'")));
        }
        table.push_text(row);
    }
    run.write("sweep.csv", table)?;
    if failed > 0 {
        return Err(PartialFailure {
            failed,
            total: sw.values.len(),
        }
        .into());
    }
    Ok(())
}

pub fn fit_eta_cmd(run: &mut Run, data: Option<&Path>) -> Result<()> {
    let path = data
        .map(Path::to_path_buf)
        .or_else(|| run.cfg.fit.data.clone())
        .ok_or_else(|| ConfigError("fit-eta needs a data file (argument or fit.data)".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| ConfigError(format!("fit.data: cannot read {}: {e}", path.display())))?;
    let (_, rows) = parse_numeric_rows(&text, 2).with_context(|| format!("data file {}", path.display()))?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();

    let profile = run.cfg.profile()?;
    let corners = run.cfg.corners()?;
    let integ = ReadoutOptics::default().integrator(&profile)?;
    let waist = profile.center_index();
    let transient = run.cfg.fit.transient;
    let mut models = Vec::new();
    for &c in &corners {
        let mut sim = run.cfg.simulation(&profile);
        sim.eta = 1.0;
        models.push(ThermalModel::new(sim, run.radiation(&profile, c)?)?);
    }
    let forwards: Vec<Box<dyn Fn(f64) -> fibertherm::Result<f64> + '_>> = models
        .iter()
        .map(|m| -> Box<dyn Fn(f64) -> fibertherm::Result<f64> + '_> {
            if transient {
                let integ = &integ;
                let on = run.cfg.heating.on_s;
                Box::new(move |p_abs: f64| {
                    let mut m2 = m.clone();
                    m2.config.schedule = HeatingSchedule::pulse(p_abs, on, m.config.schedule.end);
                    let field = m2.solve()?;
                    Ok(CycleReadout::from_field(&field, integ, m.config.ambient, waist, on)?.max_delta_l())
                })
            } else {
                let map = EquilibriumMap {
                    model: m,
                    integrator: &integ,
                    waist,
                };
                Box::new(move |p_abs: f64| map.evaluate(p_abs).map(|r| r.0))
            }
        })
        .collect();
    let refs: Vec<&dyn Fn(f64) -> fibertherm::Result<f64>> = forwards.iter().map(|f| f.as_ref()).collect();
    let fit = fit_eta(&points, &refs)?;

    let mut summary = CsvTable::new(["corner", "eta"])
        .meta("forward_map", if transient { "transient" } else { "equilibrium" })
        .meta("data", path.display())
        .meta("eta_min", format_num(fit.eta_min))
        .meta("eta_max", format_num(fit.eta_max))
        .meta("eta_mean", format_num(fit.eta_mean));
    for (c, e) in corners.iter().zip(&fit.per_set) {
        summary.push_text(vec![c.to_string(), format_num(e.eta)]);
    }
    run.write("fit_eta.csv", summary)?;

    let mut cols = vec!["p_heat_w".to_string(), "dl_opt_max_m".into()];
    cols.extend(corners.iter().map(|c| format!("residual_m_{c}")));
    let mut res = CsvTable::new(cols);
    for (k, &(p, dl)) in points.iter().enumerate() {
        let mut row = vec![p, dl];
        row.extend(fit.per_set.iter().map(|e| e.residuals[k]));
        res.push(&row);
    }
    run.write("fit_residuals.csv", res)
}

pub fn stability(run: &mut Run) -> Result<()> {
    let s = run.cfg.stability.clone();
    let params = run.cfg.stability_params();
    let props = run.cfg.simulation(&run.cfg.profile()?).props;
    let report = viscous_stability(&props, s.t_min_k, &params)?;
    let mut table = CsvTable::new(["t_k", "viscosity_pa_s", "tau_s_s", "tau_v_s", "sigma_residual_pa", "extrapolated"])
        .meta("sigma_initial_pa", format_num(params.sigma_initial))
        .meta("length_m", format_num(params.length))
        .meta("tau_residual_s", format_num(params.tau_residual))
        .meta(
            "t_break_k",
            format!("{} .. {} for tau_v in [{}, {}] s", format_num(report.t_break.0), format_num(report.t_break.1), format_num(params.tau_window.0), format_num(params.tau_window.1)),
        );
    for t in temperature_grid(s.t_min_k, s.t_max_k, s.t_step_k) {
        let v = props.viscosity.eval(t)?;
        table.push(&[
            t,
            v.value,
            tau_s(&props, t, params.sigma_initial)?,
            tau_v(&props, t, params.length)?,
            3.0 * v.value / params.tau_residual,
            if v.extrapolated { 1.0 } else { 0.0 },
        ]);
    }
    run.write("stability.csv", table)
}
