//! Body-frame rigid-body model `M v' + C v + g = w_a + w_e` and its fixed-step integrator.

use nalgebra::{Matrix3, Matrix6, UnitQuaternion, Vector6};
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::geom::Vec3;

pub const GRAVITY: f64 = 9.81;

/// Largest accepted integration step (s).
pub const MAX_DT: f64 = 0.01;

/// Force and torque, both expressed in the body frame about the CoM.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub fn new(force: Vec3, torque: Vec3) -> Self {
        Self { force, torque }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            force: v.fixed_rows::<3>(0).into_owned(),
            torque: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.force);
        v.fixed_rows_mut::<3>(3).copy_from(&self.torque);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.force
            .iter()
            .chain(self.torque.iter())
            .all(|x| x.is_finite())
    }
}

impl Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.force + rhs.force, self.torque + rhs.torque)
    }
}

impl AddAssign for Wrench {
    fn add_assign(&mut self, rhs: Wrench) {
        self.force += rhs.force;
        self.torque += rhs.torque;
    }
}

impl Sub for Wrench {
    type Output = Wrench;
    fn sub(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.force - rhs.force, self.torque - rhs.torque)
    }
}

impl Neg for Wrench {
    type Output = Wrench;
    fn neg(self) -> Wrench {
        Wrench::new(-self.force, -self.torque)
    }
}

impl Mul<f64> for Wrench {
    type Output = Wrench;
    fn mul(self, s: f64) -> Wrench {
        Wrench::new(self.force * s, self.torque * s)
    }
}

/// Stacked linear and angular velocity in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub linear: Vec3,
    pub angular: Vec3,
}

impl Twist {
    pub fn new(linear: Vec3, angular: Vec3) -> Self {
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            linear: v.fixed_rows::<3>(0).into_owned(),
            angular: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.linear);
        v.fixed_rows_mut::<3>(3).copy_from(&self.angular);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    /// CoM position in the world frame (m).
    pub position: Vec3,
    /// Body-to-world rotation.
    pub orientation: UnitQuaternion<f64>,
    /// Body-frame twist.
    pub twist: Twist,
}

impl BodyState {
    pub fn at_rest(position: Vec3, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
            twist: Twist::zero(),
        }
    }

    /// Maps a body-frame point to the world frame.
    pub fn to_world(&self, body_point: &Vec3) -> Vec3 {
        self.position + self.orientation * body_point
    }

    /// World-frame velocity of a body-fixed point.
    pub fn point_velocity(&self, body_point: &Vec3) -> Vec3 {
        self.orientation * (self.twist.linear + self.twist.angular.cross(body_point))
    }

    fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.orientation.coords.iter().all(|x| x.is_finite())
            && self.twist.to_vector().iter().all(|x| x.is_finite())
    }
}

/// Mass and principal-axis rotational inertia about the CoM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertiaModel {
    pub mass: f64,
    pub inertia: Matrix3<f64>,
}

impl Default for InertiaModel {
    fn default() -> Self {
        Self::diagonal(3.0, [0.03, 0.03, 0.05])
    }
}

impl InertiaModel {
    pub fn new(mass: f64, inertia: Matrix3<f64>) -> Result<Self> {
        let m = Self { mass, inertia };
        m.validate()?;
        Ok(m)
    }

    pub fn diagonal(mass: f64, principal: [f64; 3]) -> Self {
        Self {
            mass,
            inertia: Matrix3::from_diagonal(&Vec3::from(principal)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "mass must be > 0 (got {})",
                self.mass
            )));
        }
        if (self.inertia - self.inertia.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidScenario("inertia must be symmetric".into()));
        }
        if self.inertia.cholesky().is_none() {
            return Err(Error::InvalidScenario(
                "inertia must be positive definite".into(),
            ));
        }
        Ok(())
    }

    pub fn mass_matrix(&self) -> Matrix6<f64> {
        let mut m = Matrix6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(Matrix3::identity() * self.mass));
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.inertia);
        m
    }

    /// Generalized momentum `M v`.
    pub fn momentum(&self, twist: &Twist) -> Vector6<f64> {
        Twist::new(twist.linear * self.mass, self.inertia * twist.angular).to_vector()
    }

    /// `M^-1 w`.
    pub fn solve(&self, w: &Wrench) -> Twist {
        let ang = self
            .inertia
            .cholesky()
            .map(|c| c.solve(&w.torque))
            .unwrap_or_else(|| Vec3::from_element(f64::NAN));
        Twist::new(w.force / self.mass, ang)
    }
}

/// Gravity acting on the body, expressed in the body frame.
pub fn gravity_wrench(orientation: &UnitQuaternion<f64>, mass: f64) -> Wrench {
    let world = Vec3::new(0.0, 0.0, -GRAVITY * mass);
    Wrench::new(orientation.inverse_transform_vector(&world), Vec3::zeros())
}

/// Velocity-product term `C v = [m w x v; w x J w]`.
pub fn coriolis_term(inertia: &InertiaModel, twist: &Twist) -> Wrench {
    let w = twist.angular;
    Wrench::new(
        inertia.mass * w.cross(&twist.linear),
        w.cross(&(inertia.inertia * w)),
    )
}

/// Continuous-time body acceleration `M^-1 (w_a + w_e + gravity - C v)`.
pub fn acceleration(
    state: &BodyState,
    w_a: &Wrench,
    w_e: &Wrench,
    inertia: &InertiaModel,
) -> Twist {
    let gravity = gravity_wrench(&state.orientation, inertia.mass);
    let c = coriolis_term(inertia, &state.twist);
    inertia.solve(&(*w_a + *w_e + gravity - c))
}

const MIDPOINT_ITERS: usize = 50;
const MIDPOINT_TOL: f64 = 1e-15;

/// Advances the state by one fixed step.
///
/// Velocity first, then pose from the new velocity. The velocity-product term
/// is evaluated at the step midpoint (solved by fixed-point iteration), which
/// keeps torque-free kinetic energy constant.
pub fn step(
    state: &BodyState,
    w_a: &Wrench,
    w_e: &Wrench,
    inertia: &InertiaModel,
    dt: f64,
) -> Result<BodyState> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::OutOfValidRange(format!(
            "dt must lie in (0, {MAX_DT}] (got {dt})"
        )));
    }
    let applied = *w_a + *w_e + gravity_wrench(&state.orientation, inertia.mass);
    let v0 = state.twist.to_vector();
    let advance = |c: &Wrench| v0 + inertia.solve(&(applied - *c)).to_vector() * dt;

    let mut v1 = advance(&coriolis_term(inertia, &state.twist));
    for _ in 0..MIDPOINT_ITERS {
        let mid = Twist::from_vector(&((v0 + v1) * 0.5));
        let next = advance(&coriolis_term(inertia, &mid));
        let change = (next - v1).amax();
        v1 = next;
        if change <= MIDPOINT_TOL * (1.0 + v1.amax()) {
            break;
        }
    }
    let twist = Twist::from_vector(&v1);

    let position = state.position + state.orientation * twist.linear * dt;
    let delta = UnitQuaternion::from_scaled_axis(twist.angular * dt);
    let orientation = UnitQuaternion::new_normalize((state.orientation * delta).into_inner());

    let next = BodyState {
        position,
        orientation,
        twist,
    };
    if !next.is_finite() || !applied.is_finite() {
        return Err(Error::NonFiniteState { time_s: f64::NAN });
    }
    Ok(next)
}
