//! Friction-ensuring and rotation-ensuring conditions, the in-plane pendulum
//! model, and the design-guideline calculators built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::mu_lim;

/// Inputs for a full guideline evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionInputs {
    /// Largest expected tilt |beta|_max (rad).
    pub beta_max_rad: f64,
    /// Static friction coefficient at the EE tips.
    pub mu_s: f64,
    /// Safety factor in (0, 1].
    pub eta: f64,
    /// Driving force magnitude |f^B| (N).
    pub f_b_n: f64,
    /// Foot circle radius (m).
    pub d_r_m: f64,
    /// Disturbance torque bound |tau_d|_max (N m).
    pub tau_d_max_nm: f64,
    /// Vehicle mass (kg). Only used for pendulum quantities.
    #[serde(default = "default_mass")]
    pub mass_kg: f64,
    /// Projected CoP-to-CoM length |l_C|_P (m). Only used for pendulum quantities.
    #[serde(default = "default_l_c")]
    pub l_c_p_m: f64,
}

fn default_mass() -> f64 {
    3.0
}

fn default_l_c() -> f64 {
    0.3
}

impl ConditionInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::OutOfValidRange(format!(
                "eta must lie in (0, 1] (got {})",
                self.eta
            )));
        }
        let mags = [
            ("mu_s", self.mu_s),
            ("f_b_n", self.f_b_n),
            ("tau_d_max_nm", self.tau_d_max_nm),
            ("mass_kg", self.mass_kg),
            ("l_c_p_m", self.l_c_p_m),
            ("beta_max_rad", self.beta_max_rad),
        ];
        for (name, v) in mags {
            if !(v >= 0.0) {
                return Err(Error::OutOfValidRange(format!(
                    "{name} must be >= 0 (got {v})"
                )));
            }
        }
        if !(self.d_r_m > 0.0) {
            return Err(Error::OutOfValidRange(format!(
                "d_r must be > 0 (got {})",
                self.d_r_m
            )));
        }
        rotation_factor(self.beta_max_rad).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition1 {
    pub satisfied: bool,
    /// `eta * mu_s - mu_lim(|beta|_max)`
    pub margin: f64,
    pub min_mu_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition2 {
    pub satisfied: bool,
    /// `|f^B| sqrt(1 - 3 sin^2|beta|_max) d_r / 2 - |tau_d|_max` (N m)
    pub margin: f64,
    pub min_force: f64,
}

/// Values rounded the way they are usually quoted (one decimal).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundedDisplay {
    pub mu_lim: f64,
    pub min_mu_s: f64,
    pub min_force_n: f64,
    pub min_d_r_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub mu_lim: f64,
    pub cond1_satisfied: bool,
    pub cond1_margin: f64,
    pub min_mu_s: f64,
    pub cond2_satisfied: bool,
    pub cond2_margin_nm: f64,
    pub min_force_n: f64,
    /// Smallest EE radius satisfying the rotation condition at `f_b_n`.
    pub min_d_r_m: f64,
    pub rounded: RoundedDisplay,
}

/// `sqrt(1 - 3 sin^2|beta|)`; zero or imaginary beyond the singular tilt.
fn rotation_factor(beta_max: f64) -> Result<f64> {
    let v = 1.0 - 3.0 * beta_max.sin().powi(2);
    if v <= 0.0 {
        return Err(Error::OutOfValidRange(format!(
            "3*sin^2|beta|_max >= 1 for |beta|_max = {:.3} deg",
            beta_max.to_degrees()
        )));
    }
    Ok(v.sqrt())
}

pub fn check_condition1(beta_max: f64, mu_s: f64, eta: f64) -> Result<Condition1> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::OutOfValidRange(format!(
            "eta must lie in (0, 1] (got {eta})"
        )));
    }
    let lim = mu_lim(beta_max)?;
    Ok(Condition1 {
        satisfied: lim <= eta * mu_s,
        margin: eta * mu_s - lim,
        min_mu_s: lim / eta,
    })
}

pub fn check_condition2(f_b: f64, beta_max: f64, d_r: f64, tau_d_max: f64) -> Result<Condition2> {
    if !(d_r > 0.0) {
        return Err(Error::OutOfValidRange(format!(
            "d_r must be > 0 (got {d_r})"
        )));
    }
    let lever = rotation_factor(beta_max)? * d_r / 2.0;
    let lhs = f_b * lever;
    Ok(Condition2 {
        satisfied: lhs > tau_d_max,
        margin: lhs - tau_d_max,
        min_force: tau_d_max / lever,
    })
}

/// Smallest foot-circle radius for which the rotation condition holds with equality.
pub fn min_ee_radius(f_b: f64, beta_max: f64, tau_d_max: f64) -> Result<f64> {
    let factor = rotation_factor(beta_max)?;
    if f_b <= 0.0 {
        return Err(Error::ZeroForce);
    }
    Ok(2.0 * tau_d_max / (f_b * factor))
}

/// Signed aligning torque about the CoP; always drives beta toward zero.
pub fn tau_e_p(f_plane_mag: f64, l_o_len: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    -beta.signum() * f_plane_mag * l_o_len
}

/// In-plane pendulum angular acceleration of beta.
pub fn pendulum_accel(mass: f64, l_c_p: f64, tau_ep: f64, tau_d: f64) -> Result<f64> {
    let inertia = mass * l_c_p * l_c_p;
    if !(inertia > f64::EPSILON) {
        return Err(Error::ZeroInertia);
    }
    Ok((tau_ep - tau_d) / inertia)
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn round_mm(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Evaluates both conditions and the guideline values for one input set.
pub fn evaluate(inputs: &ConditionInputs) -> Result<ConditionReport> {
    inputs.validate()?;
    let c1 = check_condition1(inputs.beta_max_rad, inputs.mu_s, inputs.eta)?;
    let c2 = check_condition2(
        inputs.f_b_n,
        inputs.beta_max_rad,
        inputs.d_r_m,
        inputs.tau_d_max_nm,
    )?;
    let lim = mu_lim(inputs.beta_max_rad)?;
    let min_d_r = if inputs.f_b_n > 0.0 {
        min_ee_radius(inputs.f_b_n, inputs.beta_max_rad, inputs.tau_d_max_nm)?
    } else {
        f64::INFINITY
    };
    Ok(ConditionReport {
        mu_lim: lim,
        cond1_satisfied: c1.satisfied,
        cond1_margin: c1.margin,
        min_mu_s: c1.min_mu_s,
        cond2_satisfied: c2.satisfied,
        cond2_margin_nm: c2.margin,
        min_force_n: c2.min_force,
        min_d_r_m: min_d_r,
        rounded: RoundedDisplay {
            mu_lim: round1(lim),
            min_mu_s: round1(c1.min_mu_s),
            min_force_n: round1(c2.min_force),
            min_d_r_m: round_mm(min_d_r),
        },
    })
}
