//! S-plane construction, driving-force decomposition and the contact-status
//! indicators derived from it.
//!
//! The S-plane is spanned by the surface normal `n` and the lever `l_O`
//! (CoP to CC). The driving force `f^B` splits into an in-plane part, which
//! produces the aligning torque about the CoP, and an out-of-plane part along
//! the plane normal `n^S`. Two angles describe the split:
//!
//! ```text
//! theta = angle(f^B, f_plane)          in [0, pi/2)
//! beta  = signed angle(-n, f_plane)    in (-pi/2, pi/2), positive about +n^S
//! ```

use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type UnitVec3 = Unit<Vector3<f64>>;

/// Lever length below which the S-plane is considered degenerate (m).
pub const EPS_LEN: f64 = 1e-6;
/// Angular tolerance for the lever being parallel to the normal (rad).
pub const EPS_ANGLE: f64 = 1e-6;
/// Force magnitude treated as zero (N).
pub const EPS_FORCE: f64 = 1e-9;

/// The plane spanned by the surface normal and the lever `l_O`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SPlane {
    /// Plane normal `n^S = unit(n x l_O)`.
    pub normal: UnitVec3,
    /// Surface normal `n`; lies in the plane.
    pub surface_normal: UnitVec3,
    /// `n^S x n`: the in-plane direction of the tangential part of `l_O`.
    /// `(n, tangent, normal)` is a right-handed orthonormal frame.
    pub tangent: UnitVec3,
}

impl SPlane {
    pub fn in_plane_basis(&self) -> [UnitVec3; 2] {
        [self.surface_normal, self.tangent]
    }
}

/// `f^B` split with respect to an [`SPlane`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceDecomposition {
    /// Projection of `f^B` onto the plane (N).
    pub f_plane: Vec3,
    /// Component of `f^B` along the plane normal (N).
    pub f_out: Vec3,
    /// Out-of-plane angle (rad).
    pub theta: f64,
    /// Signed in-plane tilt from `-n` (rad).
    pub beta: f64,
}

/// Tripod end-effector layout in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EeGeometry {
    /// Radius of the circle carrying the three feet (m).
    pub d_r_m: f64,
    /// Angular position of each foot on the circle, measured from body +x (rad).
    pub foot_angles_rad: [f64; 3],
    /// Center of the EE top surface (CC) in the body frame (m).
    pub cc_offset_m: Vec3,
}

impl Default for EeGeometry {
    fn default() -> Self {
        Self {
            d_r_m: 0.0525,
            foot_angles_rad: [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0],
            cc_offset_m: Vec3::new(0.0, 0.0, 0.1),
        }
    }
}

impl EeGeometry {
    pub fn with_radius(d_r_m: f64) -> Self {
        Self {
            d_r_m,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_r_m > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "d_r must be positive (got {})",
                self.d_r_m
            )));
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                let sep = (self.foot_angles_rad[i] - self.foot_angles_rad[j]).rem_euclid(2.0 * PI);
                let sep = sep.min(2.0 * PI - sep);
                if (sep - 2.0 * PI / 3.0).abs() > 1e-9 {
                    return Err(Error::InvalidScenario(
                        "foot angles must be 120 degrees apart".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Foot tip positions in the body frame.
    pub fn feet_body(&self) -> [Vec3; 3] {
        self.foot_angles_rad
            .map(|a| self.cc_offset_m + Vec3::new(self.d_r_m * a.cos(), self.d_r_m * a.sin(), 0.0))
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64, slack: f64) -> bool {
        x >= self.lo - slack && x <= self.hi + slack
    }
}

/// Normal and tangential contact force magnitudes implied by a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactRatio {
    pub f_n: f64,
    pub f_t: f64,
    pub mu: f64,
}

pub fn build_s_plane(n: &UnitVec3, l_o: &Vec3) -> Result<SPlane> {
    let len = l_o.norm();
    if len <= EPS_LEN {
        return Err(Error::DegenerateSPlane);
    }
    let cross = n.cross(l_o);
    // |n x l_O| / |l_O| = sin(angle(n, l_O))
    if cross.norm() / len <= EPS_ANGLE.sin() {
        return Err(Error::DegenerateSPlane);
    }
    let normal = Unit::new_normalize(cross);
    let tangent = Unit::new_normalize(normal.cross(n));
    Ok(SPlane {
        normal,
        surface_normal: *n,
        tangent,
    })
}

pub fn decompose_force(f_b: &Vec3, plane: &SPlane, n: &UnitVec3) -> Result<ForceDecomposition> {
    if f_b.norm() <= EPS_FORCE {
        return Err(Error::ZeroForce);
    }
    let into_surface = -n.into_inner();
    if f_b.dot(&into_surface) <= 0.0 {
        return Err(Error::WrongSide);
    }
    let f_out = plane.normal.into_inner() * f_b.dot(&plane.normal);
    let f_plane = f_b - f_out;
    let theta = f_out.norm().atan2(f_plane.norm());
    let beta = into_surface
        .cross(&f_plane)
        .dot(&plane.normal)
        .atan2(into_surface.dot(&f_plane));
    Ok(ForceDecomposition {
        f_plane,
        f_out,
        theta,
        beta,
    })
}

/// Distance from CC to the surface implied by the lever length and tilt.
pub fn d_cc(l_o_len: f64, beta: f64) -> f64 {
    l_o_len * beta.abs().sin()
}

/// Admissible range of `|l_O|` for `contact_count` feet on the surface.
pub fn l_o_bounds(contact_count: usize, d_r: f64) -> Result<Interval> {
    match contact_count {
        1 => Ok(Interval { lo: d_r, hi: d_r }),
        2 => Ok(Interval {
            lo: d_r / 2.0,
            hi: d_r,
        }),
        3 => Ok(Interval { lo: 0.0, hi: d_r }),
        other => Err(Error::BadContactCount(other)),
    }
}

fn sqrt3_sin(beta: f64) -> f64 {
    3f64.sqrt() * beta.abs().sin()
}

/// Supremum of the out-of-plane angle before a second foot lands.
///
/// The bound itself is exclusive: valid `theta` satisfy `theta < bound`.
pub fn theta_max_bound(beta: f64) -> Result<f64> {
    let s = sqrt3_sin(beta);
    if s >= 1.0 {
        return Err(Error::OutOfValidRange(format!(
            "sqrt(3)*sin|beta| = {s:.4} >= 1 for beta = {:.3} deg",
            beta.to_degrees()
        )));
    }
    Ok(s.asin())
}

pub fn contact_ratio(dec: &ForceDecomposition) -> Result<ContactRatio> {
    let plane_mag = dec.f_plane.norm();
    let f_n = plane_mag * dec.beta.cos();
    if f_n <= EPS_FORCE {
        return Err(Error::ZeroNormalForce);
    }
    let f_t = (plane_mag * dec.beta.abs().sin()).hypot(dec.f_out.norm());
    Ok(ContactRatio {
        f_n,
        f_t,
        mu: f_t / f_n,
    })
}

/// Upper bound of the tangential/normal force ratio at tilt `beta`.
pub fn mu_lim(beta: f64) -> Result<f64> {
    let s2 = beta.abs().sin().powi(2);
    let denom = 1.0 - 3.0 * s2;
    if denom <= 0.0 {
        return Err(Error::OutOfValidRange(format!(
            "3*sin^2|beta| >= 1 for beta = {:.3} deg",
            beta.to_degrees()
        )));
    }
    Ok(beta.abs().tan() * (1.0 + 3.0 / denom).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn z() -> UnitVec3 {
        Vec3::z_axis()
    }

    #[test]
    fn s_plane_normal_follows_cross_product() {
        let p = build_s_plane(&z(), &Vec3::new(0.0525, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(
            p.normal.into_inner(),
            Vec3::new(0.0, 1.0, 0.0),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            p.tangent.into_inner(),
            Vec3::new(1.0, 0.0, 0.0),
            epsilon = 1e-12
        );
        let [a, b] = p.in_plane_basis();
        assert_abs_diff_eq!(a.dot(&b), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.cross(&b), p.normal.into_inner(), epsilon = 1e-12);
    }

    #[test]
    fn s_plane_degenerate_cases() {
        assert!(matches!(
            build_s_plane(&z(), &Vec3::zeros()),
            Err(Error::DegenerateSPlane)
        ));
        assert!(matches!(
            build_s_plane(&z(), &Vec3::new(0.0, 0.0, 0.01)),
            Err(Error::DegenerateSPlane)
        ));
        assert!(matches!(
            build_s_plane(&z(), &Vec3::new(5e-7, 0.0, 0.0)),
            Err(Error::DegenerateSPlane)
        ));
    }

    #[test]
    fn force_along_minus_n_has_no_tilt() {
        let p = build_s_plane(&z(), &Vec3::new(0.0525, 0.0, 0.0)).unwrap();
        let d = decompose_force(&Vec3::new(0.0, 0.0, -10.0), &p, &z()).unwrap();
        assert_abs_diff_eq!(d.f_plane, Vec3::new(0.0, 0.0, -10.0), epsilon = 1e-12);
        assert_abs_diff_eq!(d.f_out.norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.theta, 0.0);
        assert_abs_diff_eq!(d.beta, 0.0);
    }

    #[test]
    fn in_plane_tilt_recovers_beta() {
        let p = build_s_plane(&z(), &Vec3::new(0.0525, 0.0, 0.0)).unwrap();
        let b = 6f64.to_radians();
        let f = 20.0 * (b.sin() * p.tangent.into_inner() - b.cos() * z().into_inner());
        let d = decompose_force(&f, &p, &z()).unwrap();
        assert_abs_diff_eq!(d.theta, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.beta.abs(), 0.10472, epsilon = 1e-5);
        // leaning toward +tangent is a negative rotation about n^S
        assert!(d.beta < 0.0);
    }

    #[test]
    fn out_of_plane_tilt_splits_magnitudes() {
        let p = build_s_plane(&z(), &Vec3::new(0.0525, 0.0, 0.0)).unwrap();
        let (t, b) = (10f64.to_radians(), 6f64.to_radians());
        let in_plane = b.sin() * p.tangent.into_inner() - b.cos() * z().into_inner();
        let f = 20.0 * (t.cos() * in_plane + t.sin() * p.normal.into_inner());
        let d = decompose_force(&f, &p, &z()).unwrap();
        assert_abs_diff_eq!(d.f_plane.norm(), 19.696, epsilon = 1e-3);
        assert_abs_diff_eq!(d.f_out.norm(), 3.472, epsilon = 1e-3);
        assert_abs_diff_eq!(d.theta, t, epsilon = 1e-12);
    }

    #[test]
    fn decompose_rejects_bad_forces() {
        let p = build_s_plane(&z(), &Vec3::new(0.0525, 0.0, 0.0)).unwrap();
        assert!(matches!(
            decompose_force(&Vec3::zeros(), &p, &z()),
            Err(Error::ZeroForce)
        ));
        assert!(matches!(
            decompose_force(&Vec3::new(0.0, 0.0, 5.0), &p, &z()),
            Err(Error::WrongSide)
        ));
        assert!(matches!(
            decompose_force(&Vec3::new(1.0, 0.0, 0.0), &p, &z()),
            Err(Error::WrongSide)
        ));
    }

    #[test]
    fn d_cc_values() {
        assert_eq!(d_cc(0.0525, 0.0), 0.0);
        assert_eq!(d_cc(0.0, 0.3), 0.0);
        assert_abs_diff_eq!(d_cc(0.0525, 6f64.to_radians()), 0.005488, epsilon = 1e-6);
        assert_eq!(d_cc(0.0525, 0.2), d_cc(0.0525, -0.2));
    }

    #[test]
    fn l_o_bounds_per_contact_count() {
        assert_eq!(
            l_o_bounds(1, 0.0525).unwrap(),
            Interval {
                lo: 0.0525,
                hi: 0.0525
            }
        );
        assert_eq!(
            l_o_bounds(2, 0.0525).unwrap(),
            Interval {
                lo: 0.02625,
                hi: 0.0525
            }
        );
        assert_eq!(
            l_o_bounds(3, 0.0525).unwrap(),
            Interval {
                lo: 0.0,
                hi: 0.0525
            }
        );
        assert!(matches!(
            l_o_bounds(0, 0.0525),
            Err(Error::BadContactCount(0))
        ));
        assert!(matches!(
            l_o_bounds(4, 0.0525),
            Err(Error::BadContactCount(4))
        ));
    }

    #[test]
    fn theta_max_values() {
        assert_eq!(theta_max_bound(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            theta_max_bound(6f64.to_radians()).unwrap().to_degrees(),
            10.434,
            epsilon = 5e-3
        );
        assert_abs_diff_eq!(
            theta_max_bound(34f64.to_radians()).unwrap().to_degrees(),
            75.59,
            epsilon = 0.01
        );
        assert!(matches!(
            theta_max_bound(36f64.to_radians()),
            Err(Error::OutOfValidRange(_))
        ));
    }

    fn synthetic(plane_mag: f64, beta: f64, out_mag: f64) -> ForceDecomposition {
        ForceDecomposition {
            f_plane: plane_mag * Vec3::new(beta.sin(), 0.0, -beta.cos()),
            f_out: Vec3::new(0.0, out_mag, 0.0),
            theta: out_mag.atan2(plane_mag),
            beta,
        }
    }

    #[test]
    fn contact_ratio_values() {
        let r = contact_ratio(&synthetic(20.0, 0.0, 0.0)).unwrap();
        assert_eq!((r.f_n, r.f_t, r.mu), (20.0, 0.0, 0.0));

        let b = 6f64.to_radians();
        let r = contact_ratio(&synthetic(20.0, b, 0.0)).unwrap();
        assert_abs_diff_eq!(r.f_n, 19.890, epsilon = 1e-3);
        assert_abs_diff_eq!(r.f_t, 2.0906, epsilon = 1e-4);
        assert_abs_diff_eq!(r.mu, b.tan(), epsilon = 1e-12);

        let r = contact_ratio(&synthetic(19.696, b, 3.472)).unwrap();
        assert_abs_diff_eq!(r.f_n, 19.588, epsilon = 1e-3);
        assert_abs_diff_eq!(r.f_t, 4.0366, epsilon = 1e-4);
        assert_abs_diff_eq!(r.mu, 0.20608, epsilon = 2e-5);

        assert!(matches!(
            contact_ratio(&synthetic(0.0, 0.0, 1.0)),
            Err(Error::ZeroNormalForce)
        ));
    }

    #[test]
    fn mu_lim_anchors() {
        assert_eq!(mu_lim(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(mu_lim(6f64.to_radians()).unwrap(), 0.2129, epsilon = 1e-4);
        assert_abs_diff_eq!(mu_lim(11f64.to_radians()).unwrap(), 0.4063, epsilon = 1e-4);
        assert_eq!(mu_lim(-0.1).unwrap(), mu_lim(0.1).unwrap());
        assert!(matches!(
            mu_lim((1.0 / 3f64.sqrt()).asin()),
            Err(Error::OutOfValidRange(_))
        ));
    }

    #[test]
    fn default_geometry_is_valid() {
        EeGeometry::default().validate().unwrap();
        assert!(EeGeometry::with_radius(0.0).validate().is_err());
        let mut g = EeGeometry::default();
        g.foot_angles_rad[2] = 1.0;
        assert!(g.validate().is_err());
    }
}
