use fibertherm::analysis::CycleReadout;
use fibertherm::constants::MBAR;
use fibertherm::fiber::{build_radius_profile, RadiusProfile, ReadoutOptics, TaperParameters};
use fibertherm::materials::{silica_nk_table, CornerSelector};
use fibertherm::thermal::*;
use std::sync::OnceLock;

fn profile() -> RadiusProfile {
    build_radius_profile(&TaperParameters::tof2()).unwrap()
}

fn planck() -> &'static RadiationModel {
    static M: OnceLock<RadiationModel> = OnceLock::new();
    M.get_or_init(|| RadiationModel::planck_interface(&profile(), silica_nk_table(), CornerSelector::ALL[3]).unwrap())
}

fn bump(prof: &RadiusProfile, t0: f64, height: f64, width: f64) -> Vec<f64> {
    prof.z.iter().map(|z| t0 + height * (-(z / width).powi(2)).exp()).collect()
}

fn conduction_only() -> ThermalModel {
    let prof = profile();
    let mut cfg = SimulationConfig::new(prof.clone());
    cfg.pressure = 0.0;
    cfg.schedule = HeatingSchedule::constant(0.0, 0.5);
    ThermalModel::new(cfg, RadiationModel::disabled(prof.len())).unwrap()
}

#[test]
fn conduction_bump_conserves_energy() {
    let m = conduction_only();
    let init = bump(&m.config.profile, 294.0, 400.0, 1e-3);
    let f = m.solve_from(&init).unwrap();
    let e0 = m.thermal_energy(&init);
    let e1 = m.thermal_energy(f.temps.last().unwrap());
    assert!((e1 / e0 - 1.0).abs() < 1e-6, "{e0} -> {e1}");
    let c = m.config.profile.center_index();
    assert!(f.temps.last().unwrap()[c] < init[c] - 10.0, "bump did not spread");
}

#[test]
fn maximum_principle_without_heating() {
    let m = conduction_only();
    let init = bump(&m.config.profile, 294.0, 600.0, 5e-4);
    let f = m.solve_from(&init).unwrap();
    let max: Vec<f64> = f.temps.iter().map(|r| r.iter().cloned().fold(0.0, f64::max)).collect();
    assert!(max.windows(2).all(|w| w[1] <= w[0] + 1e-9));

    // radiation and gas only remove heat
    let mut cfg = m.config.clone();
    cfg.pressure = 1e-4 * MBAR;
    let m = ThermalModel::new(cfg, planck().clone()).unwrap();
    let f = m.solve_from(&init).unwrap();
    let max: Vec<f64> = f.temps.iter().map(|r| r.iter().cloned().fold(0.0, f64::max)).collect();
    assert!(max.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    assert!(f.temps.iter().flatten().all(|&t| t >= 294.0 - 1e-9));
}

#[test]
fn symmetric_profile_gives_symmetric_field() {
    let prof = profile();
    let mut cfg = SimulationConfig::new(prof.clone());
    cfg.eta = 0.03;
    cfg.schedule = HeatingSchedule::pulse(20e-3, 0.3, 0.6);
    let m = ThermalModel::new(cfg, planck().clone()).unwrap();
    let f = m.solve().unwrap();
    let n = prof.len();
    for row in &f.temps {
        for i in 0..n / 2 {
            assert!((row[i] - row[n - 1 - i]).abs() < 1e-6 * (row[i] - 294.0).abs().max(1e-3));
        }
        assert!(row.iter().all(|&t| t >= 294.0 - 1e-9));
    }
    assert_eq!(f.temps[0], vec![294.0; n]);
    assert!(f.max_budget_residual() < 0.01);
}

#[test]
fn steady_state_balances_post_hoc() {
    let prof = profile();
    let mut cfg = SimulationConfig::new(prof.clone());
    cfg.eta = 0.03;
    cfg.pressure = 1e-4 * MBAR;
    let p_heat = 25e-3;
    let m = ThermalModel::new(cfg.clone(), planck().clone()).unwrap();
    let temps = m.steady_state(p_heat).unwrap();
    let coeff = cfg.gas.coefficient(cfg.ambient) * cfg.pressure;
    let mut out = 0.0;
    for (i, &t) in temps.iter().enumerate() {
        let rad = m.radiation.power(i, t).unwrap().0 - m.radiation.power(i, cfg.ambient).unwrap().0;
        let gas = coeff * 2.0 * std::f64::consts::PI * prof.a[i] * (t - cfg.ambient);
        out += (rad + gas) * prof.dz;
    }
    let absorbed = cfg.eta * p_heat;
    assert!((out / absorbed - 1.0).abs() < 0.01, "{out} vs {absorbed}");
    let (a, r, g, c) = m.balance(&temps, p_heat).unwrap();
    assert!(((r + g + c) / a - 1.0).abs() < 0.01);
}

#[test]
fn heating_and_cooling_profiles_differ() {
    let prof = profile();
    let mut cfg = SimulationConfig::new(prof.clone());
    cfg.eta = 0.03;
    let m = ThermalModel::new(cfg, planck().clone()).unwrap();
    let f = m.solve().unwrap();
    let integ = ReadoutOptics::default().integrator(&prof).unwrap();
    let r = CycleReadout::from_field(&f, &integ, 294.0, prof.center_index(), 1.0).unwrap();
    let level = 0.5 * r.max_delta_l();
    // profile where the readout crosses `level`, by linear interpolation
    let at = |k: usize| {
        let w = (level - r.delta_l[k - 1]) / (r.delta_l[k] - r.delta_l[k - 1]);
        let row: Vec<f64> = (0..prof.len())
            .map(|i| f.temps[k - 1][i] + w * (f.temps[k][i] - f.temps[k - 1][i]))
            .collect();
        row
    };
    let kh = (1..r.delta_l.len()).find(|&k| r.delta_l[k] >= level).unwrap();
    let kc = (1..r.delta_l.len()).find(|&k| r.times[k] > 1.0 && r.delta_l[k] <= level).unwrap();
    let (h, c) = (at(kh), at(kc));
    let scale = h.iter().cloned().fold(0.0, f64::max) - 294.0;
    let diff = h.iter().zip(&c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff > 0.02 * scale, "profiles agree to {diff} K of {scale} K");
}

#[test]
fn no_heating_stays_at_ambient() {
    let prof = profile();
    let mut cfg = SimulationConfig::new(prof.clone());
    cfg.schedule = HeatingSchedule::pulse(0.0, 0.5, 1.0);
    let m = ThermalModel::new(cfg, planck().clone()).unwrap();
    let f = m.solve().unwrap();
    assert!(f.temps.iter().flatten().all(|&t| t == 294.0));
    let d = m.rhs(0.1, &vec![294.0; prof.len()]).unwrap();
    assert!(d.iter().all(|v| *v == 0.0));
}
