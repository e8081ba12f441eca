//! Scenario files, the closed-loop simulation, run artifacts and sweeps.

use nalgebra::{Matrix3, Matrix6, UnitQuaternion, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

use crate::conditions::{evaluate, ConditionInputs, ConditionReport};
use crate::contact::{resolve_contact, ContactParams, FootAnchors, WorkSurface};
use crate::controller::{
    estimate_wrench, force_wrench, hybrid_wrench, motion_wrench, ControllerConfig, EstimatorState,
    PiState, Reference, Selection,
};
use crate::dynamics::{
    coriolis_term, gravity_wrench, step, BodyState, InertiaModel, Twist, Wrench,
};
use crate::error::{Error, Result};
use crate::geom::{mu_lim, EeGeometry, Vec3};
use crate::metrics::{indicators_from_state, summarize, Report, SummaryOptions, Trace, TraceRow};

/// Tilt between body z and the inward surface normal that ends a run (rad).
pub const MAX_TILT_RAD: f64 = std::f64::consts::FRAC_PI_4;
/// Distance from the motion reference that ends a run (m).
pub const MAX_POSITION_ERROR_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InertiaSpec {
    pub mass_kg: f64,
    pub inertia_diag_kgm2: [f64; 3],
}

impl Default for InertiaSpec {
    fn default() -> Self {
        Self {
            mass_kg: 3.0,
            inertia_diag_kgm2: [0.03, 0.03, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EeSpec {
    pub d_r_m: f64,
    /// Height of the foot plane above the CoM along body z.
    pub cc_height_m: f64,
}

impl Default for EeSpec {
    fn default() -> Self {
        Self {
            d_r_m: 0.0525,
            cc_height_m: 0.1,
        }
    }
}

/// Ceiling-like surface above the vehicle. It is tilted by `beta0_deg` and
/// lowest in the horizontal direction `low_azimuth_deg`; with the vehicle level
/// at the hold point, the lowest-lying foot just touches it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub beta0_deg: f64,
    #[serde(default)]
    pub low_azimuth_deg: f64,
    pub mu_s: f64,
    /// Defaults to 0.8 mu_s.
    #[serde(default)]
    pub mu_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub damping_diag: [f64; 6],
    pub stiffness_diag: [f64; 6],
    pub k_p: f64,
    pub k_i: f64,
    /// Target force after the ramp.
    pub f_ref_n: f64,
    /// Defaults to 50 / k_i.
    #[serde(default)]
    pub integral_limit_ns: Option<f64>,
    pub observer_gain_per_s: f64,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        let c = ControllerConfig::default();
        Self {
            damping_diag: diag6(&c.damping),
            stiffness_diag: diag6(&c.stiffness),
            k_p: c.k_p,
            k_i: c.k_i,
            f_ref_n: c.f_ref,
            integral_limit_ns: None,
            observer_gain_per_s: 10.0,
        }
    }
}

fn diag6(m: &Matrix6<f64>) -> [f64; 6] {
    let d = m.diagonal();
    [d[0], d[1], d[2], d[3], d[4], d[5]]
}

/// Phase timing. The vehicle starts `approach_distance_m` below the hold
/// point, follows a straight-line ramp there, and the interaction controller
/// takes over at `switch_time_s` with the force reference ramping from zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub approach_distance_m: f64,
    pub approach_time_s: f64,
    /// Clearance between the first foot and the surface at the hold point.
    /// Negative values press the foot in before the switch.
    #[serde(default)]
    pub standoff_m: f64,
    pub switch_time_s: f64,
    pub f_ref_ramp_n_per_s: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            approach_distance_m: 0.1,
            approach_time_s: 1.5,
            standoff_m: 0.0,
            switch_time_s: 2.0,
            f_ref_ramp_n_per_s: 20.0,
        }
    }
}

/// Disturbance torque about body x and y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Disturbance {
    None,
    Constant {
        torque_nm: [f64; 2],
        #[serde(default)]
        start_s: f64,
    },
    Sinusoid {
        amplitude_nm: f64,
        frequency_hz: f64,
        #[serde(default)]
        start_s: f64,
    },
    /// Uniform over the disc of radius `amplitude_nm`, redrawn at `rate_hz`
    /// from the scenario seed and held in between.
    Random {
        amplitude_nm: f64,
        rate_hz: f64,
        #[serde(default)]
        start_s: f64,
    },
}

impl Default for Disturbance {
    fn default() -> Self {
        Disturbance::Random {
            amplitude_nm: 0.5,
            rate_hz: 10.0,
            start_s: 0.0,
        }
    }
}

impl Disturbance {
    /// Bound on the injected torque magnitude.
    pub fn max_amplitude(&self) -> f64 {
        match self {
            Disturbance::None => 0.0,
            Disturbance::Constant { torque_nm, .. } => torque_nm[0].hypot(torque_nm[1]),
            Disturbance::Sinusoid { amplitude_nm, .. }
            | Disturbance::Random { amplitude_nm, .. } => *amplitude_nm,
        }
    }

    fn with_amplitude(&mut self, amp: f64) {
        match self {
            Disturbance::None => {
                *self = Disturbance::Random {
                    amplitude_nm: amp,
                    rate_hz: 10.0,
                    start_s: 0.0,
                }
            }
            Disturbance::Constant { torque_nm, .. } => {
                let m = torque_nm[0].hypot(torque_nm[1]);
                *torque_nm = if m > 0.0 {
                    [torque_nm[0] * amp / m, torque_nm[1] * amp / m]
                } else {
                    [amp, 0.0]
                };
            }
            Disturbance::Sinusoid { amplitude_nm, .. }
            | Disturbance::Random { amplitude_nm, .. } => *amplitude_nm = amp,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Disturbance::None => true,
            Disturbance::Constant { torque_nm, start_s } => {
                torque_nm.iter().all(|v| v.is_finite()) && *start_s >= 0.0
            }
            Disturbance::Sinusoid {
                amplitude_nm,
                frequency_hz,
                start_s,
            } => *amplitude_nm >= 0.0 && *frequency_hz >= 0.0 && *start_s >= 0.0,
            Disturbance::Random {
                amplitude_nm,
                rate_hz,
                start_s,
            } => *amplitude_nm >= 0.0 && *rate_hz > 0.0 && *start_s >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScenario(format!("bad disturbance {self:?}")))
        }
    }
}

/// Precomputed disturbance signal.
struct DisturbanceSource {
    spec: Disturbance,
    samples: Vec<[f64; 2]>,
}

impl DisturbanceSource {
    fn new(spec: &Disturbance, seed: u64, duration: f64) -> Self {
        let samples = match spec {
            Disturbance::Random {
                amplitude_nm,
                rate_hz,
                ..
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = (duration * rate_hz).ceil() as usize + 1;
                (0..n)
                    .map(|_| {
                        let r = amplitude_nm * rng.random::<f64>().sqrt();
                        let a = rng.random::<f64>() * std::f64::consts::TAU;
                        [r * a.cos(), r * a.sin()]
                    })
                    .collect()
            }
            _ => Vec::new(),
        };
        Self {
            spec: spec.clone(),
            samples,
        }
    }

    fn at(&self, t: f64) -> Vec3 {
        let [x, y] = match &self.spec {
            Disturbance::None => [0.0, 0.0],
            Disturbance::Constant { torque_nm, start_s } => {
                if t >= *start_s {
                    *torque_nm
                } else {
                    [0.0, 0.0]
                }
            }
            Disturbance::Sinusoid {
                amplitude_nm,
                frequency_hz,
                start_s,
            } => {
                if t >= *start_s {
                    let ph = std::f64::consts::TAU * frequency_hz * (t - start_s);
                    [amplitude_nm * ph.sin(), amplitude_nm * ph.cos()]
                } else {
                    [0.0, 0.0]
                }
            }
            Disturbance::Random {
                rate_hz, start_s, ..
            } => {
                if t >= *start_s {
                    let k = ((t - start_s) * rate_hz).floor() as usize;
                    self.samples[k.min(self.samples.len() - 1)]
                } else {
                    [0.0, 0.0]
                }
            }
        };
        Vec3::new(x, y, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    pub steady_window_s: f64,
    pub d_cc_tol_m: f64,
    /// Safety factor used for the friction threshold and condition report.
    pub eta: f64,
    #[serde(default = "default_min_slip_s")]
    pub min_slip_s: f64,
}

fn default_min_slip_s() -> f64 {
    0.02
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            steady_window_s: 2.0,
            d_cc_tol_m: 1e-3,
            eta: 0.4,
            min_slip_s: default_min_slip_s(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub dt_s: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub inertia: InertiaSpec,
    #[serde(default)]
    pub ee: EeSpec,
    pub surface: SurfaceSpec,
    #[serde(default)]
    pub controller: ControllerSpec,
    #[serde(default)]
    pub contact: ContactParams,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub disturbance: Disturbance,
    #[serde(default)]
    pub metrics: MetricsSpec,
}

/// Everything the simulation loop needs, built from a validated scenario.
struct Plant {
    inertia: InertiaModel,
    geom: EeGeometry,
    surface: WorkSurface,
    controller: ControllerConfig,
    hold: Vec3,
    start: Vec3,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Canonical JSON form, also the input to [`Scenario::hash`].
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_json()?.as_bytes())))
    }

    pub fn mu_k(&self) -> f64 {
        self.surface.mu_k.unwrap_or(0.8 * self.surface.mu_s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if !(self.dt_s > 0.0 && self.dt_s <= crate::dynamics::MAX_DT) {
            return bad(format!("dt_s must lie in (0, {}]", crate::dynamics::MAX_DT));
        }
        let s = &self.schedule;
        if !(self.duration_s > s.switch_time_s && s.switch_time_s >= 0.0) {
            return bad("duration_s must exceed switch_time_s >= 0".into());
        }
        if !(s.approach_time_s >= 0.0 && s.approach_distance_m >= 0.0 && s.f_ref_ramp_n_per_s > 0.0)
        {
            return bad(
                "approach time, distance and force ramp must be non-negative (ramp positive)"
                    .into(),
            );
        }
        if !(self.surface.beta0_deg.abs() < 35.0) {
            return bad("beta0_deg must stay below 35 deg".into());
        }
        if !(self.metrics.steady_window_s > 0.0 && self.metrics.d_cc_tol_m > 0.0) {
            return bad("metric window and tolerance must be positive".into());
        }
        if !(self.metrics.min_slip_s >= 0.0) {
            return bad("min_slip_s must be non-negative".into());
        }
        if !(self.metrics.eta > 0.0 && self.metrics.eta <= 1.0) {
            return bad("eta must lie in (0, 1]".into());
        }
        if !(self.controller.f_ref_n >= 0.0) {
            return bad("f_ref_n must be non-negative".into());
        }
        self.disturbance.validate()?;
        self.contact.validate()?;
        self.plant().map(|_| ())
    }

    fn plant(&self) -> Result<Plant> {
        let [jx, jy, jz] = self.inertia.inertia_diag_kgm2;
        let inertia = InertiaModel::new(
            self.inertia.mass_kg,
            Matrix3::from_diagonal(&Vec3::new(jx, jy, jz)),
        )?;
        let mut geom = EeGeometry::with_radius(self.ee.d_r_m);
        geom.cc_offset_m = Vec3::new(0.0, 0.0, self.ee.cc_height_m);
        geom.validate()?;

        let b = self.surface.beta0_deg.to_radians();
        let az = self.surface.low_azimuth_deg.to_radians();
        let low = Vec3::new(az.cos(), az.sin(), 0.0);
        let normal = -(low * b.sin() + Vec3::z() * b.cos());
        // The hold pose puts the deepest foot exactly on the plane.
        let level = BodyState::at_rest(Vec3::zeros(), UnitQuaternion::identity());
        let first = geom
            .feet_body()
            .iter()
            .map(|p| level.to_world(p))
            .max_by(|a, c| (-a.dot(&normal)).total_cmp(&-c.dot(&normal)))
            .unwrap_or_else(Vec3::zeros);
        let surface = WorkSurface::new(first, normal, self.surface.mu_s, self.mu_k())?;

        let c = &self.controller;
        let controller = ControllerConfig {
            damping: Matrix6::from_diagonal(&Vector6::from_row_slice(&c.damping_diag)),
            stiffness: Matrix6::from_diagonal(&Vector6::from_row_slice(&c.stiffness_diag)),
            k_p: c.k_p,
            k_i: c.k_i,
            f_ref: c.f_ref_n,
            integral_limit: c.integral_limit_ns.unwrap_or(50.0 / c.k_i),
            observer_gain: Matrix6::identity() * c.observer_gain_per_s,
        };
        controller.validate()?;

        // Lowering by h opens the gap along the normal by h cos(beta0).
        let hold = Vec3::new(0.0, 0.0, -self.schedule.standoff_m / b.cos());
        let start = hold - Vec3::z() * self.schedule.approach_distance_m;
        Ok(Plant {
            inertia,
            geom,
            surface,
            controller,
            hold,
            start,
        })
    }

    fn reference(&self, plant: &Plant, t: f64) -> Reference {
        let s = &self.schedule;
        let q = UnitQuaternion::identity();
        if t >= s.approach_time_s || s.approach_time_s == 0.0 {
            return Reference::hold(plant.hold, q);
        }
        let v = (plant.hold - plant.start) / s.approach_time_s;
        let mut r = Reference::hold(plant.start + v * t, q);
        r.twist = Twist::new(v, Vec3::zeros());
        r
    }

    /// Force reference: zero before the switch, then a ramp to the target.
    pub fn f_ref_at(&self, t: f64) -> f64 {
        let s = &self.schedule;
        if t < s.switch_time_s {
            0.0
        } else {
            (s.f_ref_ramp_n_per_s * (t - s.switch_time_s)).min(self.controller.f_ref_n)
        }
    }

    pub fn condition_inputs(&self) -> ConditionInputs {
        ConditionInputs {
            beta_max_rad: self.surface.beta0_deg.abs().to_radians(),
            mu_s: self.surface.mu_s,
            eta: self.metrics.eta,
            f_b_n: self.controller.f_ref_n,
            d_r_m: self.ee.d_r_m,
            tau_d_max_nm: self.disturbance.max_amplitude(),
            mass_kg: self.inertia.mass_kg,
            l_c_p_m: self.ee.d_r_m.hypot(self.ee.cc_height_m),
        }
    }

    pub fn summary_options(&self) -> SummaryOptions {
        let beta = self.surface.beta0_deg.abs().to_radians();
        SummaryOptions {
            steady_window_s: self.metrics.steady_window_s,
            d_cc_tol_m: self.metrics.d_cc_tol_m,
            mu_threshold: mu_lim(beta).ok().map(|m| m / self.metrics.eta),
            min_slip_s: self.metrics.min_slip_s,
            condition: evaluate(&self.condition_inputs()).ok(),
        }
    }

    /// Sets a scalar field by sweep axis name.
    pub fn set_axis(&mut self, axis: &str, value: f64) -> Result<()> {
        match axis {
            "f_ref" => self.controller.f_ref_n = value,
            "mu_s" => self.surface.mu_s = value,
            "beta0" => self.surface.beta0_deg = value,
            "tau_d" => self.disturbance.with_amplitude(value),
            "d_r" => self.ee.d_r_m = value,
            _ => return Err(Error::UnknownAxis(axis.to_string())),
        }
        Ok(())
    }
}

pub const SWEEP_AXES: [&str; 5] = ["f_ref", "mu_s", "beta0", "tau_d", "d_r"];

/// Trace and report of one run, before anything is written to disk.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub trace: Trace,
    pub report: Report,
}

fn tilt_from_normal(state: &BodyState, surface: &WorkSurface) -> f64 {
    let z_b = state.orientation * Vec3::z();
    z_b.dot(&-surface.normal.into_inner())
        .clamp(-1.0, 1.0)
        .acos()
}

/// Runs the closed loop for the whole scenario.
///
/// Per step: contact, observer, controller, record, integrate. Runs that tip
/// over, drift away or go non-finite stop early with `diverged` set.
pub fn simulate(sc: &Scenario) -> Result<SimOutcome> {
    sc.validate()?;
    let plant = sc.plant()?;
    let dt = sc.dt_s;
    let params = sc.contact;
    let disturbance = DisturbanceSource::new(&sc.disturbance, sc.seed, sc.duration_s);
    let n_steps = (sc.duration_s / dt).round() as usize;

    let mut state = BodyState::at_rest(plant.start, UnitQuaternion::identity());
    let mut anchors = FootAnchors::default();
    let mut pi = PiState::default();
    let mut est = EstimatorState::new(&state.twist, &plant.inertia, plant.controller.observer_gain);
    let mut cfg = plant.controller;
    let mut prev: Option<(Wrench, Wrench, Wrench)> = None;
    let mut trace = Trace::new(dt);
    trace.rows.reserve(n_steps + 1);

    for k in 0..=n_steps {
        let t = k as f64 * dt;
        let res = resolve_contact(&state, &plant.geom, &plant.surface, &params, &anchors);
        anchors = res.anchors;
        let w_e = res.wrench_on_body + Wrench::new(Vec3::zeros(), disturbance.at(t));

        if let Some((w_a, g, c)) = &prev {
            est = estimate_wrench(&est, &state.twist, w_a, &plant.inertia, g, c, dt).0;
        }
        let interacting = t >= sc.schedule.switch_time_s;
        cfg.f_ref = sc.f_ref_at(t);
        let reference = sc.reference(&plant, t);
        let w_mot = motion_wrench(&state, &reference, &plant.inertia, &cfg);
        let (w_f, selection) = if interacting {
            let (w, next) = force_wrench(est.f_est_z(), &pi, &cfg, dt);
            pi = next;
            (w, Selection::INTERACTION)
        } else {
            (Wrench::zero(), Selection::FREE_FLIGHT)
        };
        let g = gravity_wrench(&state.orientation, plant.inertia.mass);
        let c = coriolis_term(&plant.inertia, &state.twist);
        let w_a = hybrid_wrench(&w_mot, &w_f, &c, &-g, &selection);

        let f_b_world = state.orientation * w_f.force;
        let ind = indicators_from_state(&state, &res, &f_b_world, &plant.surface, &plant.geom)?;
        let p = res.normal_forces();
        let q = state.orientation.quaternion();
        let (v, w) = (state.twist.linear, state.twist.angular);
        trace.rows.push(TraceRow {
            t_s: t,
            px: state.position.x,
            py: state.position.y,
            pz: state.position.z,
            qw: q.w,
            qx: q.i,
            qy: q.j,
            qz: q.k,
            vx: v.x,
            vy: v.y,
            vz: v.z,
            wx: w.x,
            wy: w.y,
            wz: w.z,
            i: res.contact_count as u8,
            beta_rad: ind.beta,
            theta_rad: ind.theta,
            dcc_m: ind.d_cc,
            mu: ind.mu,
            fn_total_n: res.total_f_n,
            ft_total_n: res.total_f_t,
            p1_n: p[0],
            p2_n: p[1],
            p3_n: p[2],
            fest_z_n: est.f_est_z(),
            fref_n: cfg.f_ref,
            slip_flag: res.any_slipping() as u8,
            fmeas_z_n: -res.wrench_on_body.force.z,
            mode: interacting as u8,
        });
        if k == n_steps {
            break;
        }
        if tilt_from_normal(&state, &plant.surface) > MAX_TILT_RAD
            || (state.position - reference.position).norm() > MAX_POSITION_ERROR_M
        {
            trace.diverged = true;
            break;
        }
        match step(&state, &w_a, &w_e, &plant.inertia, dt) {
            Ok(next) => state = next,
            Err(Error::NonFiniteState { .. }) => {
                trace.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
        prev = Some((w_a, g, c));
    }

    let report = summarize(&trace, &sc.summary_options())?;
    Ok(SimOutcome { trace, report })
}

/// Report as written next to a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub scenario_sha256: String,
    pub seed: u64,
    #[serde(flatten)]
    pub metrics: Report,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub trace_path: PathBuf,
    pub report_path: PathBuf,
    pub scenario_path: PathBuf,
    pub report: RunReport,
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Simulates and writes `trace.csv`, `report.json` and `scenario.json` into
/// `out_dir`.
pub fn run_scenario(sc: &Scenario, out_dir: &Path) -> Result<RunArtifacts> {
    let outcome = simulate(sc)?;
    fs::create_dir_all(out_dir)?;
    let echo = sc.to_json()?;
    let report = RunReport {
        scenario: sc.name.clone(),
        scenario_sha256: hex::encode(Sha256::digest(echo.as_bytes())),
        seed: sc.seed,
        metrics: outcome.report,
    };
    let trace_path = out_dir.join("trace.csv");
    let report_path = out_dir.join("report.json");
    let scenario_path = out_dir.join("scenario.json");

    let mut csv_bytes = Vec::new();
    outcome.trace.write_csv(&mut csv_bytes)?;
    write_atomic(&trace_path, &csv_bytes)?;
    write_atomic(&scenario_path, echo.as_bytes())?;
    write_atomic(
        &report_path,
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    Ok(RunArtifacts {
        trace_path,
        report_path,
        scenario_path,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub aligned: bool,
    pub slip: bool,
    pub diverged: bool,
    pub steady_dcc_m: f64,
    pub steady_beta_rad: f64,
    pub delta: Option<f64>,
    pub max_mu: f64,
    pub settling_time_s: Option<f64>,
    pub run_dir: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub runs: Vec<RunArtifacts>,
    pub rows: Vec<SweepRow>,
    pub aggregate_path: PathBuf,
}

const SWEEP_HEADER: [&str; 11] = [
    "axis",
    "value",
    "aligned",
    "slip",
    "diverged",
    "steady_dcc_m",
    "steady_beta_rad",
    "delta",
    "max_mu",
    "settling_time_s",
    "run_dir",
];

/// One run per value of `axis`, each in its own subdirectory, plus
/// `aggregate.csv` with one row per run.
pub fn run_sweep(
    base: &Scenario,
    axis: &str,
    values: &[f64],
    parallel: bool,
    out_dir: &Path,
) -> Result<SweepOutcome> {
    let mut scenarios = Vec::with_capacity(values.len());
    let mut probe = base.clone();
    probe.set_axis(axis, 0.0)?;
    for (idx, v) in values.iter().enumerate() {
        let mut sc = base.clone();
        sc.set_axis(axis, *v)?;
        sc.name = format!("{}-{axis}-{idx}", base.name);
        scenarios.push((out_dir.join(format!("{axis}_{idx:03}")), sc));
    }
    let run = |(dir, sc): &(PathBuf, Scenario)| run_scenario(sc, dir);
    let runs: Vec<RunArtifacts> = if parallel {
        scenarios.par_iter().map(run).collect::<Result<_>>()?
    } else {
        scenarios.iter().map(run).collect::<Result<_>>()?
    };

    let rows: Vec<SweepRow> = runs
        .iter()
        .zip(values)
        .zip(&scenarios)
        .map(|((r, v), (dir, _))| {
            let m = &r.report.metrics;
            SweepRow {
                axis: axis.to_string(),
                value: *v,
                aligned: m.aligned,
                slip: m.slip,
                diverged: m.diverged,
                steady_dcc_m: m.steady_dcc_m,
                steady_beta_rad: m.steady_beta_rad,
                delta: m.delta,
                max_mu: m.max_mu,
                settling_time_s: m.settling_time_s,
                run_dir: dir.display().to_string(),
            }
        })
        .collect();

    fs::create_dir_all(out_dir)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for row in &rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let aggregate_path = out_dir.join("aggregate.csv");
    write_atomic(&aggregate_path, &bytes)?;
    Ok(SweepOutcome {
        runs,
        rows,
        aggregate_path,
    })
}

/// Pretty JSON of the guideline report for `inputs`.
pub fn guideline_command(inputs: &ConditionInputs) -> Result<(ConditionReport, String)> {
    let report = evaluate(inputs)?;
    let text = serde_json::to_string_pretty(&report)?;
    Ok((report, text))
}

/// Recomputes a report from a trace file. With a scenario, its metric settings
/// are used and a trace that stops before the scheduled end counts as diverged.
pub fn report_from_trace(
    trace_path: &Path,
    scenario: Option<&Scenario>,
    window_s: Option<f64>,
) -> Result<Report> {
    let mut trace = Trace::read_csv(fs::File::open(trace_path)?)?;
    let mut opts = scenario.map(Scenario::summary_options).unwrap_or_default();
    if let Some(sc) = scenario {
        let end = trace.rows.last().map(|r| r.t_s).unwrap_or(0.0);
        trace.diverged = end < sc.duration_s - 0.5 * sc.dt_s;
    }
    if let Some(w) = window_s {
        opts.steady_window_s = w;
    }
    summarize(&trace, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn base() -> Scenario {
        Scenario {
            name: "unit".into(),
            seed: 7,
            dt_s: 1e-3,
            duration_s: 4.0,
            inertia: InertiaSpec::default(),
            ee: EeSpec::default(),
            surface: SurfaceSpec {
                beta0_deg: 6.0,
                low_azimuth_deg: 0.0,
                mu_s: 0.6,
                mu_k: None,
            },
            controller: ControllerSpec::default(),
            contact: ContactParams::default(),
            schedule: ScheduleSpec::default(),
            disturbance: Disturbance::None,
            metrics: MetricsSpec::default(),
        }
    }

    #[test]
    fn scenario_json_round_trip_and_hash() {
        let sc = base();
        let back = Scenario::from_json(&sc.to_json().unwrap()).unwrap();
        assert_eq!(back, sc);
        assert_eq!(back.hash().unwrap(), sc.hash().unwrap());
        assert_eq!(sc.hash().unwrap().len(), 64);
        assert_abs_diff_eq!(sc.mu_k(), 0.48, epsilon = 1e-12);
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let mut sc = base();
        sc.dt_s = 0.0;
        assert!(sc.validate().is_err());
        let mut sc = base();
        sc.duration_s = 1.0;
        assert!(sc.validate().is_err());
        let mut sc = base();
        sc.disturbance = Disturbance::Random {
            amplitude_nm: -1.0,
            rate_hz: 10.0,
            start_s: 0.0,
        };
        assert!(sc.validate().is_err());
        assert!(Scenario::from_json("{\"name\": 1}").is_err());
    }

    #[test]
    fn force_reference_ramps_from_zero() {
        let sc = base();
        assert_eq!(sc.f_ref_at(1.9), 0.0);
        assert_eq!(sc.f_ref_at(2.0), 0.0);
        assert_abs_diff_eq!(sc.f_ref_at(2.5), 10.0, epsilon = 1e-12);
        assert_eq!(sc.f_ref_at(9.0), 20.0);
    }

    #[test]
    fn surface_touches_the_first_foot_at_the_hold_point() {
        let sc = base();
        let plant = sc.plant().unwrap();
        let level = BodyState::at_rest(plant.hold, UnitQuaternion::identity());
        let gaps: Vec<f64> = plant
            .geom
            .feet_body()
            .iter()
            .map(|p| plant.surface.gap(&level.to_world(p)))
            .collect();
        assert_abs_diff_eq!(gaps[0], 0.0, epsilon = 1e-12);
        assert!(gaps[1] > 0.0 && gaps[2] > 0.0);
    }

    #[test]
    fn random_disturbance_stays_in_the_disc() {
        let d = Disturbance::Random {
            amplitude_nm: 0.5,
            rate_hz: 10.0,
            start_s: 0.0,
        };
        let src = DisturbanceSource::new(&d, 3, 5.0);
        let mut peak: f64 = 0.0;
        for k in 0..500 {
            let tau = src.at(k as f64 * 0.01);
            assert_eq!(tau.z, 0.0);
            peak = peak.max(tau.norm());
        }
        assert!(peak <= 0.5 && peak > 0.3);
        // held within a period
        assert_eq!(src.at(0.01), src.at(0.09));
    }

    #[test]
    fn sweep_axis_names() {
        let mut sc = base();
        for a in SWEEP_AXES {
            sc.set_axis(a, 0.3).unwrap();
        }
        assert!(matches!(
            sc.set_axis("bogus", 1.0),
            Err(Error::UnknownAxis(_))
        ));
        assert_eq!(sc.disturbance.max_amplitude(), 0.3);
    }

    #[test]
    fn guideline_anchor() {
        let inputs = ConditionInputs {
            beta_max_rad: 6f64.to_radians(),
            mu_s: 0.6,
            eta: 0.4,
            f_b_n: 20.0,
            d_r_m: 0.0525,
            tau_d_max_nm: 0.5,
            mass_kg: 3.0,
            l_c_p_m: 0.3,
        };
        let (r, text) = guideline_command(&inputs).unwrap();
        assert_abs_diff_eq!(r.min_force_n, 19.37, epsilon = 0.01);
        assert!(text.contains("min_force_n"));
        let mut bad = inputs;
        bad.beta_max_rad = 36f64.to_radians();
        assert!(matches!(
            guideline_command(&bad),
            Err(Error::OutOfValidRange(_))
        ));
    }
}
