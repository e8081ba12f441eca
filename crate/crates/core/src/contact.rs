//! Penalty contact between the three spherical EE tips and a flat work surface.
//!
//! Normal force is a clamped Kelvin-Voigt law. Tangential force uses a
//! per-foot stick anchor: while the foot sticks, a stiff spring-damper ties it
//! to the anchor; once that force leaves the static friction cone the foot
//! slips, kinetic friction opposes the sliding velocity and the anchor is
//! dragged along.

use nalgebra::Unit;
use serde::{Deserialize, Serialize};

use crate::dynamics::{BodyState, Wrench};
use crate::error::{Error, Result};
use crate::geom::{EeGeometry, UnitVec3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkSurface {
    /// Any point on the surface (m).
    pub point: Vec3,
    /// Unit normal pointing from the surface toward the robot.
    pub normal: UnitVec3,
    pub mu_s: f64,
    pub mu_k: f64,
}

impl WorkSurface {
    pub fn new(point: Vec3, normal: Vec3, mu_s: f64, mu_k: f64) -> Result<Self> {
        let s = Self {
            point,
            normal: Unit::new_normalize(normal),
            mu_s,
            mu_k,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_s >= 0.0 && self.mu_k >= 0.0 && self.mu_k <= self.mu_s) {
            return Err(Error::InvalidScenario(format!(
                "friction requires 0 <= mu_k <= mu_s (got mu_s = {}, mu_k = {})",
                self.mu_s, self.mu_k
            )));
        }
        if (self.normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidScenario(
                "surface normal must be unit length".into(),
            ));
        }
        Ok(())
    }

    /// Signed distance of `p` from the surface along the normal.
    pub fn gap(&self, p: &Vec3) -> f64 {
        (p - self.point).dot(&self.normal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactParams {
    /// Normal stiffness per foot (N/m).
    pub k_n: f64,
    /// Normal damping per foot (N s/m).
    pub c_n: f64,
    /// Tangential stick stiffness per foot (N/m).
    pub k_t: f64,
    /// Tangential stick damping per foot (N s/m).
    pub c_t: f64,
    /// Sliding speed above which kinetic friction opposes the velocity (m/s).
    pub v_eps: f64,
    /// Pressure reading above which a foot counts as touching (N).
    pub pressure_threshold: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            k_n: 1e4,
            c_n: 50.0,
            k_t: 1e4,
            c_t: 50.0,
            v_eps: 1e-4,
            pressure_threshold: 0.5,
        }
    }
}

impl ContactParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.k_n,
            self.c_n,
            self.k_t,
            self.c_t,
            self.v_eps,
            self.pressure_threshold,
        ];
        if all.iter().any(|v| !(*v >= 0.0)) || self.k_n == 0.0 || self.k_t == 0.0 {
            return Err(Error::InvalidScenario(
                "contact parameters must be non-negative with positive stiffness".into(),
            ));
        }
        Ok(())
    }
}

/// Stick anchor of each foot on the surface, carried between steps.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FootAnchors(pub [Option<Vec3>; 3]);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootContact {
    /// 1-based foot number.
    pub foot_index: usize,
    pub in_contact: bool,
    /// Tip position in the world frame (m).
    pub point: Vec3,
    pub penetration: f64,
    pub normal_force: f64,
    /// Friction force on the body, world frame (N).
    pub tangential_force: Vec3,
    pub slipping: bool,
}

impl FootContact {
    fn idle(foot_index: usize, point: Vec3, penetration: f64) -> Self {
        Self {
            foot_index,
            in_contact: false,
            point,
            penetration,
            normal_force: 0.0,
            tangential_force: Vec3::zeros(),
            slipping: false,
        }
    }

    /// Total force on the body from this foot, world frame.
    pub fn force(&self, normal: &UnitVec3) -> Vec3 {
        normal.into_inner() * self.normal_force + self.tangential_force
    }

    /// This foot's wrench about the CoM, body frame.
    pub fn body_wrench(&self, state: &BodyState, normal: &UnitVec3) -> Wrench {
        let f = self.force(normal);
        let tau = (self.point - state.position).cross(&f);
        Wrench::new(
            state.orientation.inverse_transform_vector(&f),
            state.orientation.inverse_transform_vector(&tau),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactResolution {
    pub feet: [FootContact; 3],
    pub contact_count: usize,
    /// Normal-force weighted mean of touching tips; `None` in free flight.
    pub cop: Option<Vec3>,
    /// CoP to CC, world frame (zero without contact).
    pub l_o: Vec3,
    /// CoP to CoM, world frame (zero without contact).
    pub l_c: Vec3,
    /// Resultant contact wrench about the CoM, body frame.
    pub wrench_on_body: Wrench,
    pub total_f_n: f64,
    /// Magnitude of the resultant friction force.
    pub total_f_t: f64,
    /// Anchors to feed into the next resolution.
    pub anchors: FootAnchors,
}

impl ContactResolution {
    pub fn any_slipping(&self) -> bool {
        self.feet.iter().any(|f| f.slipping)
    }

    pub fn normal_forces(&self) -> [f64; 3] {
        self.feet.map(|f| f.normal_force)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureReading {
    pub value: f64,
    pub in_contact: bool,
}

/// World positions of the three tips.
pub fn foot_positions(state: &BodyState, geom: &EeGeometry) -> [Vec3; 3] {
    geom.feet_body().map(|p| state.to_world(&p))
}

fn tangential(v: &Vec3, n: &UnitVec3) -> Vec3 {
    v - n.into_inner() * v.dot(n)
}

pub fn resolve_contact(
    state: &BodyState,
    geom: &EeGeometry,
    surface: &WorkSurface,
    params: &ContactParams,
    anchors: &FootAnchors,
) -> ContactResolution {
    let n = surface.normal;
    let body_feet = geom.feet_body();
    let mut next_anchors = FootAnchors::default();

    let feet: [FootContact; 3] = std::array::from_fn(|i| {
        let p = state.to_world(&body_feet[i]);
        let penetration = (-surface.gap(&p)).max(0.0);
        if penetration <= 0.0 {
            return FootContact::idle(i + 1, p, 0.0);
        }
        let v = state.point_velocity(&body_feet[i]);
        let f_n = (params.k_n * penetration - params.c_n * v.dot(&n)).max(0.0);
        if f_n <= 0.0 {
            return FootContact::idle(i + 1, p, penetration);
        }

        let v_t = tangential(&v, &n);
        let anchor = anchors.0[i].unwrap_or(p);
        let stretch = tangential(&(p - anchor), &n);
        let trial = -params.k_t * stretch - params.c_t * v_t;
        let (force, slipping) = if trial.norm() <= surface.mu_s * f_n {
            next_anchors.0[i] = Some(anchor);
            (trial, false)
        } else {
            let dir = if v_t.norm() > params.v_eps {
                -v_t.normalize()
            } else {
                trial.normalize()
            };
            let force = dir * (surface.mu_k * f_n);
            next_anchors.0[i] = Some(p + force / params.k_t);
            // unloading tips saturate trivially; only a loaded tip counts as slipping
            (force, f_n > params.pressure_threshold)
        };
        FootContact {
            foot_index: i + 1,
            in_contact: true,
            point: p,
            penetration,
            normal_force: f_n,
            tangential_force: force,
            slipping,
        }
    });

    let contact_count = feet.iter().filter(|f| f.in_contact).count();
    let total_f_n: f64 = feet.iter().map(|f| f.normal_force).sum();
    let friction: Vec3 = feet.iter().map(|f| f.tangential_force).sum();
    let wrench_on_body = feet
        .iter()
        .filter(|f| f.in_contact)
        .fold(Wrench::zero(), |acc, f| acc + f.body_wrench(state, &n));

    let (cop, l_o, l_c) = if contact_count > 0 {
        let cop = feet.iter().map(|f| f.point * f.normal_force).sum::<Vec3>() / total_f_n;
        let cc = state.to_world(&geom.cc_offset_m);
        (Some(cop), cc - cop, state.position - cop)
    } else {
        (None, Vec3::zeros(), Vec3::zeros())
    };

    ContactResolution {
        feet,
        contact_count,
        cop,
        l_o,
        l_c,
        wrench_on_body,
        total_f_n,
        total_f_t: friction.norm(),
        anchors: next_anchors,
    }
}

pub fn pressure_readings(res: &ContactResolution, threshold: f64) -> [PressureReading; 3] {
    res.feet.map(|f| PressureReading {
        value: f.normal_force,
        in_contact: f.normal_force > threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::UnitQuaternion;
    use std::f64::consts::PI;

    fn ceiling(height: f64, mu_s: f64) -> WorkSurface {
        WorkSurface::new(Vec3::new(0.0, 0.0, height), -Vec3::z(), mu_s, mu_s * 0.8).unwrap()
    }

    #[test]
    fn feet_on_the_circle() {
        let g = EeGeometry::default();
        let s = BodyState::at_rest(Vec3::zeros(), UnitQuaternion::identity());
        let [f1, f2, f3] = foot_positions(&s, &g);
        assert_abs_diff_eq!(f1, Vec3::new(0.0525, 0.0, 0.1), epsilon = 1e-12);
        assert_abs_diff_eq!(f2, Vec3::new(-0.02625, 0.045466, 0.1), epsilon = 1e-6);
        assert_abs_diff_eq!(f3, Vec3::new(-0.02625, -0.045466, 0.1), epsilon = 1e-6);

        let shifted = BodyState::at_rest(Vec3::new(1.0, 2.0, 3.0), UnitQuaternion::identity());
        for (a, b) in foot_positions(&shifted, &g).iter().zip([f1, f2, f3]) {
            assert_abs_diff_eq!(*a, b + Vec3::new(1.0, 2.0, 3.0), epsilon = 1e-12);
        }

        let yawed = BodyState::at_rest(
            Vec3::zeros(),
            UnitQuaternion::from_euler_angles(0.0, 0.0, PI),
        );
        assert_abs_diff_eq!(
            foot_positions(&yawed, &g)[0],
            Vec3::new(-0.0525, 0.0, 0.1),
            epsilon = 1e-12
        );
    }

    #[test]
    fn free_flight_has_no_contact() {
        let s = BodyState::at_rest(Vec3::zeros(), UnitQuaternion::identity());
        let r = resolve_contact(
            &s,
            &EeGeometry::default(),
            &ceiling(0.2, 0.6),
            &ContactParams::default(),
            &FootAnchors::default(),
        );
        assert_eq!(r.contact_count, 0);
        assert_eq!(r.cop, None);
        assert_eq!(r.wrench_on_body, Wrench::zero());
        assert_eq!(r.total_f_n, 0.0);
    }

    #[test]
    fn equal_penetration_centers_the_cop() {
        let s = BodyState::at_rest(Vec3::zeros(), UnitQuaternion::identity());
        let r = resolve_contact(
            &s,
            &EeGeometry::default(),
            &ceiling(0.099, 0.6),
            &ContactParams::default(),
            &FootAnchors::default(),
        );
        assert_eq!(r.contact_count, 3);
        for f in &r.feet {
            assert_abs_diff_eq!(f.normal_force, 10.0, epsilon = 1e-9);
            assert!(!f.slipping);
        }
        assert_abs_diff_eq!(r.cop.unwrap(), Vec3::new(0.0, 0.0, 0.1), epsilon = 1e-12);
        assert_abs_diff_eq!(r.l_o.norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            r.wrench_on_body.force,
            Vec3::new(0.0, 0.0, -30.0),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(r.wrench_on_body.torque.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn single_foot_contact_puts_cop_on_the_foot() {
        // pitch so that foot 1 (+x) rises by just over 1 mm relative to the others
        let g = EeGeometry::default();
        let pitch = UnitQuaternion::from_euler_angles(0.0, -0.05, 0.0);
        let s = BodyState::at_rest(Vec3::zeros(), pitch);
        let f1 = foot_positions(&s, &g)[0];
        let surf = ceiling(f1.z - 0.001, 0.6);
        let r = resolve_contact(
            &s,
            &g,
            &surf,
            &ContactParams::default(),
            &FootAnchors::default(),
        );
        assert_eq!(r.contact_count, 1);
        assert!(r.feet[0].in_contact);
        assert_abs_diff_eq!(r.feet[0].normal_force, 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.cop.unwrap(), f1, epsilon = 1e-12);
        assert_abs_diff_eq!(r.l_o.norm(), 0.0525, epsilon = 1e-12);
    }

    #[test]
    fn stick_force_respects_the_cone_and_slip_uses_kinetic_friction() {
        let g = EeGeometry::default();
        let surf = ceiling(0.099, 0.6);
        let params = ContactParams::default();
        let s0 = BodyState::at_rest(Vec3::zeros(), UnitQuaternion::identity());
        let r0 = resolve_contact(&s0, &g, &surf, &params, &FootAnchors::default());

        // small sideways displacement: stays stuck, spring pulls back
        let mut s1 = s0;
        s1.position.x += 1e-4;
        let r1 = resolve_contact(&s1, &g, &surf, &params, &r0.anchors);
        for f in &r1.feet {
            assert!(!f.slipping);
            assert_abs_diff_eq!(
                f.tangential_force,
                Vec3::new(-1.0, 0.0, 0.0),
                epsilon = 1e-9
            );
        }

        // large displacement: every foot saturates and slides
        let mut s2 = s0;
        s2.position.x += 0.01;
        s2.twist.linear.x = 0.1;
        let r2 = resolve_contact(&s2, &g, &surf, &params, &r0.anchors);
        for f in &r2.feet {
            assert!(f.slipping);
            assert_abs_diff_eq!(
                f.tangential_force.norm(),
                surf.mu_k * f.normal_force,
                epsilon = 1e-9
            );
            assert!(f.tangential_force.x < 0.0);
        }
    }

    #[test]
    fn pressure_threshold_semantics() {
        let s = BodyState::at_rest(Vec3::zeros(), UnitQuaternion::identity());
        let mut r = resolve_contact(
            &s,
            &EeGeometry::default(),
            &ceiling(0.099, 0.6),
            &ContactParams::default(),
            &FootAnchors::default(),
        );
        assert!(pressure_readings(&r, 0.5)
            .iter()
            .all(|p| p.in_contact && p.value == r.feet[0].normal_force));

        for (f, v) in r.feet.iter_mut().zip([10.0, 0.0, 0.0]) {
            f.normal_force = v;
        }
        let flags = pressure_readings(&r, 0.5).map(|p| p.in_contact);
        assert_eq!(flags, [true, false, false]);

        for f in r.feet.iter_mut() {
            f.normal_force = 0.4;
        }
        assert!(pressure_readings(&r, 0.5).iter().all(|p| !p.in_contact));
    }

    #[test]
    fn surface_validation() {
        assert!(WorkSurface::new(Vec3::zeros(), Vec3::z(), 0.5, 0.6).is_err());
        assert!(WorkSurface::new(Vec3::zeros(), Vec3::z() * 3.0, 0.5, 0.4).is_ok());
    }
}
