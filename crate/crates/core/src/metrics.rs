//! Run evaluation: per-step contact indicators, the pressure-sharing metric
//! delta, and steady-state summaries of a recorded trace.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::conditions::ConditionReport;
use crate::contact::{ContactResolution, WorkSurface};
use crate::dynamics::BodyState;
use crate::error::{Error, Result};
use crate::geom::{build_s_plane, d_cc, decompose_force, EeGeometry, Vec3, EPS_FORCE};

/// Reference-force samples below this magnitude are left out of delta (N).
pub const MIN_REFERENCE_FORCE: f64 = 0.5;
/// Normal force below which the force ratio is not evaluated (N).
pub const MIN_RATIO_NORMAL_FORCE: f64 = 0.5;

/// Contact-status indicators for one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Indicators {
    pub beta: f64,
    pub theta: f64,
    /// Distance from CC to the contact plane along the surface normal (m).
    pub d_cc: f64,
    /// `|l_O| sin|beta|`, the same distance predicted from the tilt (m).
    pub d_cc_model: f64,
    /// Resultant friction over resultant normal force.
    pub mu: f64,
}

/// Indicators from the simulated state. `f_b` is the applied driving force in
/// the world frame; when it vanishes the body z axis gives its direction.
pub fn indicators_from_state(
    state: &BodyState,
    res: &ContactResolution,
    f_b: &Vec3,
    surface: &WorkSurface,
    geom: &EeGeometry,
) -> Result<Indicators> {
    let n = surface.normal;
    let dir = if f_b.norm() > EPS_FORCE {
        *f_b
    } else {
        state.orientation * Vec3::z()
    };
    let mu = if res.total_f_n > EPS_FORCE {
        res.total_f_t / res.total_f_n
    } else {
        0.0
    };
    let geometric = match res.cop {
        Some(_) => res.l_o.dot(&n).abs(),
        None => surface.gap(&state.to_world(&geom.cc_offset_m)),
    };
    let mut out = Indicators {
        beta: 0.0,
        theta: 0.0,
        d_cc: geometric,
        d_cc_model: 0.0,
        mu,
    };
    if matches!(res.contact_count, 1 | 2) {
        match build_s_plane(&n, &res.l_o) {
            Ok(plane) => {
                let dec = decompose_force(&dir, &plane, &n)?;
                out.beta = dec.beta;
                out.theta = dec.theta;
                out.d_cc_model = d_cc(res.l_o.norm(), dec.beta);
            }
            Err(Error::DegenerateSPlane) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Average over the three feet of the RMSE between normalized pressure and one.
///
/// Each sample is normalized by its own reference `|f_meas_z| / 3`; samples
/// whose reference force is below [`MIN_REFERENCE_FORCE`] are skipped.
pub fn delta_metric(pressure: [&[f64]; 3], f_meas_z: &[f64]) -> Result<f64> {
    if f_meas_z.is_empty() {
        return Err(Error::EmptySeries);
    }
    if pressure.iter().any(|p| p.len() != f_meas_z.len()) {
        return Err(Error::LengthMismatch);
    }
    let used: Vec<usize> = (0..f_meas_z.len())
        .filter(|&k| f_meas_z[k].abs() >= MIN_REFERENCE_FORCE)
        .collect();
    if used.is_empty() {
        return Err(Error::ZeroReference);
    }
    let rmse = |series: &[f64]| {
        let sq: f64 = used
            .iter()
            .map(|&k| (series[k] / (f_meas_z[k].abs() / 3.0) - 1.0).powi(2))
            .sum();
        (sq / used.len() as f64).sqrt()
    };
    Ok(pressure.iter().map(|p| rmse(p)).sum::<f64>() / 3.0)
}

/// One trace sample. Field order is the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_s: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
    pub i: u8,
    pub beta_rad: f64,
    pub theta_rad: f64,
    pub dcc_m: f64,
    pub mu: f64,
    pub fn_total_n: f64,
    pub ft_total_n: f64,
    pub p1_n: f64,
    pub p2_n: f64,
    pub p3_n: f64,
    pub fest_z_n: f64,
    pub fref_n: f64,
    pub slip_flag: u8,
    /// Contact force along body z as a wrist FT sensor would read it (N).
    pub fmeas_z_n: f64,
    /// 0 = free flight, 1 = interaction.
    pub mode: u8,
}

impl TraceRow {
    pub fn interacting(&self) -> bool {
        self.mode == 1
    }

    pub fn slipping(&self) -> bool {
        self.slip_flag == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    ContactChange { t_s: f64, from: u8, to: u8 },
    SlipStart { t_s: f64 },
    SlipEnd { t_s: f64 },
    ModeSwitch { t_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub dt: f64,
    pub rows: Vec<TraceRow>,
    /// The run was aborted before its scheduled end.
    pub diverged: bool,
}

impl Trace {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            rows: Vec::new(),
            diverged: false,
        }
    }

    pub fn duration(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.t_s - a.t_s,
            _ => 0.0,
        }
    }

    pub fn events(&self) -> Vec<TraceEvent> {
        let mut out = Vec::new();
        for w in self.rows.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.i != b.i {
                out.push(TraceEvent::ContactChange {
                    t_s: b.t_s,
                    from: a.i,
                    to: b.i,
                });
            }
            if !a.slipping() && b.slipping() {
                out.push(TraceEvent::SlipStart { t_s: b.t_s });
            }
            if a.slipping() && !b.slipping() {
                out.push(TraceEvent::SlipEnd { t_s: b.t_s });
            }
            if a.mode != b.mode {
                out.push(TraceEvent::ModeSwitch { t_s: b.t_s });
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a trace; `dt` is inferred from the first two timestamps.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<TraceRow>, _>>()?;
        if rows.windows(2).any(|w| w[1].t_s <= w[0].t_s) {
            return Err(Error::MalformedTrace(
                "timestamps must strictly increase".into(),
            ));
        }
        let dt = match rows.as_slice() {
            [a, b, ..] => b.t_s - a.t_s,
            _ => 0.0,
        };
        Ok(Self {
            dt,
            rows,
            diverged: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryOptions {
    pub steady_window_s: f64,
    pub d_cc_tol_m: f64,
    /// Friction-ratio ceiling to compare against, typically `mu_lim / eta`.
    pub mu_threshold: Option<f64>,
    /// Shortest continuous slip that counts as a slip event (s). Shorter
    /// flickers are impact transients of a landing foot.
    pub min_slip_s: f64,
    pub condition: Option<ConditionReport>,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self {
            steady_window_s: 2.0,
            d_cc_tol_m: 1e-3,
            mu_threshold: None,
            min_slip_s: 0.02,
            condition: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub condition: Option<ConditionReport>,
    pub steady_window_s: f64,
    pub steady_dcc_m: f64,
    /// Mean |beta| over the steady window (rad).
    pub steady_beta_rad: f64,
    /// Pressure-sharing metric over the interaction phase.
    pub delta: Option<f64>,
    pub max_mu: f64,
    pub mu_threshold: Option<f64>,
    pub slip: bool,
    pub first_slip_s: Option<f64>,
    pub aligned: bool,
    /// Time from the mode switch until full contact is held to the end.
    pub settling_time_s: Option<f64>,
    pub diverged: bool,
    pub end_time_s: f64,
}

fn aligned_row(r: &TraceRow, tol: f64) -> bool {
    r.i == 3 && r.dcc_m < tol && !r.slipping()
}

/// Start time of the first run of slipping rows lasting at least `min_s`.
fn first_sustained_slip(rows: &[&TraceRow], dt: f64, min_s: f64) -> Option<f64> {
    let mut start: Option<f64> = None;
    for r in rows {
        if !r.slipping() {
            start = None;
            continue;
        }
        let t0 = *start.get_or_insert(r.t_s);
        if r.t_s - t0 + dt >= min_s - 1e-12 {
            return Some(t0);
        }
    }
    None
}

pub fn summarize(trace: &Trace, opts: &SummaryOptions) -> Result<Report> {
    let duration = trace.duration();
    if trace.rows.is_empty() || duration <= opts.steady_window_s {
        return Err(Error::TraceTooShort {
            duration_s: duration,
            window_s: opts.steady_window_s,
        });
    }
    let end = trace.rows.last().map(|r| r.t_s).unwrap_or(0.0);
    let window: Vec<&TraceRow> = trace
        .rows
        .iter()
        .filter(|r| r.t_s >= end - opts.steady_window_s)
        .collect();
    let mean = |f: &dyn Fn(&TraceRow) -> f64| {
        window.iter().map(|r| f(r)).sum::<f64>() / window.len() as f64
    };
    let steady_dcc = mean(&|r| r.dcc_m);
    let steady_beta = mean(&|r| r.beta_rad.abs());

    let interaction: Vec<&TraceRow> = trace.rows.iter().filter(|r| r.interacting()).collect();
    let first_slip = first_sustained_slip(&interaction, trace.dt, opts.min_slip_s);
    let max_mu = interaction
        .iter()
        .filter(|r| r.fn_total_n >= MIN_RATIO_NORMAL_FORCE)
        .map(|r| r.mu)
        .fold(0.0, f64::max);

    let delta = {
        let cols = |f: fn(&TraceRow) -> f64| interaction.iter().map(|r| f(r)).collect::<Vec<_>>();
        let (p1, p2, p3) = (cols(|r| r.p1_n), cols(|r| r.p2_n), cols(|r| r.p3_n));
        let fz = cols(|r| r.fmeas_z_n);
        match delta_metric([&p1, &p2, &p3], &fz) {
            Ok(d) => Some(d),
            Err(Error::EmptySeries | Error::ZeroReference) => None,
            Err(e) => return Err(e),
        }
    };

    let aligned = !trace.diverged
        && window.iter().all(|r| r.i == 3 && !r.slipping())
        && steady_dcc < opts.d_cc_tol_m;

    let settling_time_s = interaction.first().and_then(|start| {
        match interaction
            .iter()
            .rposition(|r| !aligned_row(r, opts.d_cc_tol_m))
        {
            None => Some(0.0),
            Some(k) if k + 1 < interaction.len() => Some(interaction[k + 1].t_s - start.t_s),
            Some(_) => None,
        }
    });

    Ok(Report {
        condition: opts.condition,
        steady_window_s: opts.steady_window_s,
        steady_dcc_m: steady_dcc,
        steady_beta_rad: steady_beta,
        delta,
        max_mu,
        mu_threshold: opts.mu_threshold,
        slip: first_slip.is_some(),
        first_slip_s: first_slip,
        aligned,
        settling_time_s,
        diverged: trace.diverged,
        end_time_s: end,
    })
}
