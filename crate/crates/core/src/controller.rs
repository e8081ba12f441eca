//! Hybrid motion/force control: 6-DoF motion wrench, PI force regulation along
//! body z, the selection mask that frees the aligning axes, and a
//! momentum-based external wrench observer.

use nalgebra::{Matrix6, SymmetricEigen, UnitQuaternion, Vector6};
use serde::{Deserialize, Serialize};

use crate::dynamics::{BodyState, InertiaModel, Twist, Wrench};
use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Diagonal selection mask applied to the motion wrench.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection(pub [f64; 6]);

impl Selection {
    /// Full 6-DoF motion control.
    pub const FREE_FLIGHT: Selection = Selection([1.0; 6]);
    /// Drops linear z (force-controlled) and angular x/y (left passive).
    pub const INTERACTION: Selection = Selection([1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);

    pub fn apply(&self, w: &Wrench) -> Wrench {
        Wrench::from_vector(&w.to_vector().component_mul(&Vector6::from(self.0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Velocity-error damping `D_v`.
    pub damping: Matrix6<f64>,
    /// Pose-error stiffness `K_p`.
    pub stiffness: Matrix6<f64>,
    /// Force PI proportional gain.
    pub k_p: f64,
    /// Force PI integral gain (1/s).
    pub k_i: f64,
    /// Force reference (N).
    pub f_ref: f64,
    /// Bound on the force-error integral (N s).
    pub integral_limit: f64,
    /// Observer gain `K_0` (1/s).
    pub observer_gain: Matrix6<f64>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let k_i = 2.0;
        Self {
            damping: Matrix6::from_diagonal(&Vector6::new(24.0, 24.0, 24.0, 1.2, 1.2, 2.0)),
            stiffness: Matrix6::from_diagonal(&Vector6::new(48.0, 48.0, 48.0, 12.0, 12.0, 20.0)),
            k_p: 0.5,
            k_i,
            f_ref: 20.0,
            integral_limit: 50.0 / k_i,
            observer_gain: Matrix6::identity() * 10.0,
        }
    }
}

fn is_positive_definite(m: &Matrix6<f64>) -> bool {
    (m - m.transpose()).amax() <= 1e-12 && m.cholesky().is_some()
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !is_positive_definite(&self.damping) || !is_positive_definite(&self.stiffness) {
            return Err(Error::InvalidScenario(
                "motion damping and stiffness must be symmetric positive definite".into(),
            ));
        }
        if !is_positive_definite(&self.observer_gain) {
            return Err(Error::InvalidScenario(
                "observer gain must be symmetric positive definite".into(),
            ));
        }
        if !(self.k_p > 0.0 && self.k_i > 0.0) {
            return Err(Error::InvalidScenario(
                "force PI gains must be positive".into(),
            ));
        }
        if !(self.integral_limit >= 0.0 && self.f_ref >= 0.0) {
            return Err(Error::InvalidScenario(
                "integral limit and force reference must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Motion reference: pose, body-frame twist and body-frame acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
    pub twist: Twist,
    pub accel: Twist,
}

impl Reference {
    pub fn hold(position: Vec3, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
            twist: Twist::zero(),
            accel: Twist::zero(),
        }
    }
}

/// Stacked body-frame pose error `[R^T (p - p_ref); log(q_ref^-1 q)]`.
pub fn pose_error(state: &BodyState, reference: &Reference) -> Vector6<f64> {
    let lin = state
        .orientation
        .inverse_transform_vector(&(state.position - reference.position));
    let ang = (reference.orientation.inverse() * state.orientation).scaled_axis();
    Twist::new(lin, ang).to_vector()
}

pub fn motion_wrench(
    state: &BodyState,
    reference: &Reference,
    inertia: &InertiaModel,
    cfg: &ControllerConfig,
) -> Wrench {
    let e_v = state.twist.to_vector() - reference.twist.to_vector();
    let e_p = pose_error(state, reference);
    let feedforward = inertia.momentum(&reference.accel);
    Wrench::from_vector(&(feedforward - cfg.damping * e_v - cfg.stiffness * e_p))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PiState {
    /// Integral of the force error (N s).
    pub integral: f64,
}

/// PI force law along body z. The returned z force is the driving force `f^B`.
pub fn force_wrench(
    f_est_z: f64,
    pi: &PiState,
    cfg: &ControllerConfig,
    dt: f64,
) -> (Wrench, PiState) {
    let e_f = f_est_z - cfg.f_ref;
    let integral = (pi.integral + e_f * dt).clamp(-cfg.integral_limit, cfg.integral_limit);
    let f_b = cfg.f_ref - cfg.k_p * e_f - cfg.k_i * integral;
    (
        Wrench::new(Vec3::new(0.0, 0.0, f_b), Vec3::zeros()),
        PiState { integral },
    )
}

/// Actuation wrench `Lambda w_mot + w_f + C v + g`, where `g` is the gravity
/// compensation term (the negated gravity wrench).
pub fn hybrid_wrench(
    w_mot: &Wrench,
    w_f: &Wrench,
    coriolis: &Wrench,
    gravity_comp: &Wrench,
    selection: &Selection,
) -> Wrench {
    selection.apply(w_mot) + *w_f + *coriolis + *gravity_comp
}

/// Momentum-based external wrench observer.
///
/// Each update differences the measured generalized momentum against the
/// model-predicted change and low-passes the residual with the exact
/// first-order discretization of `K_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    /// Last measured momentum `M v`.
    pub momentum: Vector6<f64>,
    /// Current estimate of the external wrench.
    pub wrench: Wrench,
    /// Observer gain `K_0` (1/s).
    pub gain: Matrix6<f64>,
}

impl EstimatorState {
    pub fn new(twist: &Twist, inertia: &InertiaModel, gain: Matrix6<f64>) -> Self {
        Self {
            momentum: inertia.momentum(twist),
            wrench: Wrench::zero(),
            gain,
        }
    }

    /// Estimated force the vehicle exerts on the surface along body z.
    pub fn f_est_z(&self) -> f64 {
        -self.wrench.force.z
    }

    /// `I - exp(-K_0 dt)` for symmetric `K_0`.
    fn blend(&self, dt: f64) -> Matrix6<f64> {
        let eig = SymmetricEigen::new(self.gain);
        let d = eig.eigenvalues.map(|l| 1.0 - (-l * dt).exp());
        eig.eigenvectors * Matrix6::from_diagonal(&d) * eig.eigenvectors.transpose()
    }
}

/// One observer update.
///
/// `twist` is the velocity measured now; `w_a`, `gravity` and `coriolis` are
/// the actuation, gravity and velocity-product wrenches that acted over the
/// step just taken.
pub fn estimate_wrench(
    est: &EstimatorState,
    twist: &Twist,
    w_a: &Wrench,
    inertia: &InertiaModel,
    gravity: &Wrench,
    coriolis: &Wrench,
    dt: f64,
) -> (EstimatorState, f64) {
    let momentum = inertia.momentum(twist);
    let model = (*w_a + *gravity - *coriolis).to_vector();
    let measured = (momentum - est.momentum) / dt - model;
    let current = est.wrench.to_vector();
    let wrench = Wrench::from_vector(&(current + est.blend(dt) * (measured - current)));
    let next = EstimatorState {
        momentum,
        wrench,
        gain: est.gain,
    };
    let f_z = next.f_est_z();
    (next, f_z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{coriolis_term, gravity_wrench};
    use approx::assert_abs_diff_eq;

    fn level(position: Vec3) -> BodyState {
        BodyState::at_rest(position, UnitQuaternion::identity())
    }

    #[test]
    fn motion_wrench_examples() {
        let inertia = InertiaModel::default();
        let cfg = ControllerConfig {
            stiffness: Matrix6::identity() * 10.0,
            ..ControllerConfig::default()
        };
        let r = Reference::hold(Vec3::zeros(), UnitQuaternion::identity());
        assert_eq!(
            motion_wrench(&level(Vec3::zeros()), &r, &inertia, &cfg),
            Wrench::zero()
        );

        let w = motion_wrench(&level(Vec3::new(0.1, 0.0, 0.0)), &r, &inertia, &cfg);
        assert_abs_diff_eq!(w.force, Vec3::new(-1.0, 0.0, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(w.torque.norm(), 0.0);

        let mut r = r;
        r.accel = Twist::new(Vec3::new(1.0, 0.0, 0.0), Vec3::zeros());
        let w = motion_wrench(&level(Vec3::zeros()), &r, &inertia, &cfg);
        assert_abs_diff_eq!(w.force, Vec3::new(3.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn orientation_error_is_a_rotation_vector() {
        let r = Reference::hold(Vec3::zeros(), UnitQuaternion::identity());
        let s = BodyState::at_rest(
            Vec3::zeros(),
            UnitQuaternion::from_euler_angles(0.0, 0.0, 0.2),
        );
        let e = pose_error(&s, &r);
        assert_abs_diff_eq!(
            e.fixed_rows::<3>(3).into_owned(),
            Vec3::new(0.0, 0.0, 0.2),
            epsilon = 1e-12
        );
    }

    #[test]
    fn force_wrench_examples() {
        let cfg = ControllerConfig {
            k_p: 0.5,
            k_i: 0.1,
            f_ref: 20.0,
            ..ControllerConfig::default()
        };
        let (w, pi) = force_wrench(20.0, &PiState::default(), &cfg, 1e-3);
        assert_eq!(w.force, Vec3::new(0.0, 0.0, 20.0));
        assert_eq!(pi.integral, 0.0);

        let (w, pi) = force_wrench(18.0, &PiState { integral: -2.0 }, &cfg, 1.0);
        assert_eq!(pi.integral, -4.0);
        assert_abs_diff_eq!(w.force.z, 21.4, epsilon = 1e-12);

        let handoff = ControllerConfig { f_ref: 0.0, ..cfg };
        let (w, _) = force_wrench(0.0, &PiState::default(), &handoff, 1e-3);
        assert_eq!(w, Wrench::zero());
    }

    #[test]
    fn integral_is_clamped() {
        let cfg = ControllerConfig {
            integral_limit: 3.0,
            ..ControllerConfig::default()
        };
        let mut pi = PiState::default();
        for _ in 0..1000 {
            pi = force_wrench(0.0, &pi, &cfg, 0.01).1;
            assert!(pi.integral.abs() <= 3.0);
        }
        assert_eq!(pi.integral, -3.0);
    }

    #[test]
    fn hybrid_wrench_examples() {
        let ones = Wrench::from_vector(&Vector6::repeat(1.0));
        let z = Wrench::zero();
        let w = hybrid_wrench(&ones, &z, &z, &z, &Selection::INTERACTION);
        assert_eq!(w.to_vector(), Vector6::new(1.0, 1.0, 0.0, 0.0, 0.0, 1.0));
        assert_eq!(hybrid_wrench(&z, &z, &z, &z, &Selection::INTERACTION), z);

        let w_f = Wrench::new(Vec3::new(0.0, 0.0, 20.0), Vec3::zeros());
        let g = Wrench::new(Vec3::new(0.0, 0.0, -29.43), Vec3::zeros());
        let w = hybrid_wrench(&z, &w_f, &z, &g, &Selection::INTERACTION);
        assert_abs_diff_eq!(
            w.to_vector(),
            Vector6::new(0.0, 0.0, -9.43, 0.0, 0.0, 0.0),
            epsilon = 1e-12
        );

        assert_eq!(
            hybrid_wrench(&ones, &z, &z, &z, &Selection::FREE_FLIGHT),
            ones
        );
    }

    #[test]
    fn observer_stays_zero_without_external_wrench() {
        let inertia = InertiaModel::default();
        let mut est = EstimatorState::new(&Twist::zero(), &inertia, Matrix6::identity() * 10.0);
        let s = level(Vec3::zeros());
        let g = gravity_wrench(&s.orientation, inertia.mass);
        let c = coriolis_term(&inertia, &s.twist);
        for _ in 0..100 {
            est = estimate_wrench(&est, &s.twist, &-g, &inertia, &g, &c, 1e-3).0;
        }
        assert_eq!(est.wrench, Wrench::zero());
    }

    #[test]
    fn observer_step_response_is_first_order() {
        // frozen dynamics: the momentum grows exactly as the external force dictates
        let inertia = InertiaModel::default();
        let dt = 1e-3;
        let mut est = EstimatorState::new(&Twist::zero(), &inertia, Matrix6::identity() * 10.0);
        let mut twist = Twist::zero();
        let zero = Wrench::zero();
        let g = gravity_wrench(&UnitQuaternion::identity(), inertia.mass);
        let mut f = 0.0;
        for _ in 0..300 {
            twist.linear.z += 10.0 / inertia.mass * dt;
            let (next, _) = estimate_wrench(&est, &twist, &-g, &inertia, &g, &zero, dt);
            est = next;
            f = est.wrench.force.z;
        }
        assert_abs_diff_eq!(f, 10.0 * (1.0 - (-3.0f64).exp()), epsilon = 1e-9);
        assert_abs_diff_eq!(f, 9.502, epsilon = 0.01);
    }
}
