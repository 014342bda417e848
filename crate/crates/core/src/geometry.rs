//! Bistatic geometry primitives and the closed-form Doppler, micro-Doppler
//! spread and far-field relations.
//!
//! # Aspect-angle frame
//!
//! Velocity aspect angles are measured in a right-handed frame attached to
//! the target:
//!
//! * `x` points along the *outward* bistatic bisector, i.e. away from the
//!   Tx/Rx pair. Motion along `+x` lengthens the bistatic path.
//! * `z` is the global `+z` axis made orthogonal to `x` (global `+y` is used
//!   when the bisector is vertical).
//! * `y = z × x`.
//!
//! The elevation `theta` is measured from `z`, the azimuth `phi` from `x`
//! in the `x`–`y` plane. With this frame
//! `f_D = -2 |v| cos(beta/2) cos(phi) sin(theta) / lambda`
//! equals `-(1/lambda) d/dt (d_tx + d_rx)`: receding targets have negative
//! Doppler.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal free-space propagation speed in m/s.
///
/// Rounded engineering value: 81.08 mm wavelength at 3.7 GHz, 629.3 m far
/// field for a 4 m aperture at 5.9 GHz.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Sum of unit vectors below this norm is treated as exact forward scatter.
const FORWARD_SCATTER_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction, `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rotation about the global `z` axis by `angle` radians.
    pub fn rotated_z(self, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        Vec3::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }

    /// Any unit vector orthogonal to `self` (which must be non-zero).
    pub fn any_orthogonal(self) -> Vec3 {
        let helper = if self.x.abs() <= self.y.abs() && self.x.abs() <= self.z.abs() {
            Vec3::X
        } else if self.y.abs() <= self.z.abs() {
            Vec3::Y
        } else {
            Vec3::Z
        };
        self.cross(helper).normalized().expect("non-zero input")
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Transmitter, receiver and target positions in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BistaticGeometry {
    tx_pos: Vec3,
    rx_pos: Vec3,
    target_pos: Vec3,
}

impl BistaticGeometry {
    pub fn new(tx_pos: Vec3, rx_pos: Vec3, target_pos: Vec3) -> Result<Self> {
        if !(tx_pos.is_finite() && rx_pos.is_finite() && target_pos.is_finite()) {
            return Err(Error::DegenerateGeometry("non-finite position"));
        }
        if tx_pos == target_pos {
            return Err(Error::DegenerateGeometry("target coincides with transmitter"));
        }
        if rx_pos == target_pos {
            return Err(Error::DegenerateGeometry("target coincides with receiver"));
        }
        Ok(Self {
            tx_pos,
            rx_pos,
            target_pos,
        })
    }

    /// Tx and Rx at `range_m` from `target`, placed symmetrically about the
    /// unit direction `bisector` (target towards the antennas) inside the
    /// plane with unit normal `plane_normal`, subtending `beta` radians.
    pub fn symmetric(
        target: Vec3,
        beta: f64,
        range_m: f64,
        bisector: Vec3,
        plane_normal: Vec3,
    ) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI).contains(&beta) {
            return Err(Error::arg("beta", format!("{beta} rad outside [0, pi]")));
        }
        if !(range_m > 0.0 && range_m.is_finite()) {
            return Err(Error::arg("range_m", "must be positive"));
        }
        let b = bisector
            .normalized()
            .ok_or_else(|| Error::arg("bisector", "zero vector"))?;
        let lateral = plane_normal
            .cross(b)
            .normalized()
            .ok_or_else(|| Error::arg("plane_normal", "parallel to bisector"))?;
        let (s, c) = (beta / 2.0).sin_cos();
        let tx = target + (b * c - lateral * s) * range_m;
        let rx = target + (b * c + lateral * s) * range_m;
        Self::new(tx, rx, target)
    }

    pub fn tx_pos(&self) -> Vec3 {
        self.tx_pos
    }

    pub fn rx_pos(&self) -> Vec3 {
        self.rx_pos
    }

    pub fn target_pos(&self) -> Vec3 {
        self.target_pos
    }

    pub fn tx_range(&self) -> f64 {
        self.tx_pos.distance(self.target_pos)
    }

    pub fn rx_range(&self) -> f64 {
        self.rx_pos.distance(self.target_pos)
    }

    /// Same antennas, different target position.
    pub fn with_target(&self, target_pos: Vec3) -> Result<Self> {
        Self::new(self.tx_pos, self.rx_pos, target_pos)
    }

    pub fn swapped(&self) -> Self {
        Self {
            tx_pos: self.rx_pos,
            rx_pos: self.tx_pos,
            target_pos: self.target_pos,
        }
    }

    fn unit_legs(&self) -> (Vec3, Vec3) {
        let to_tx = (self.tx_pos - self.target_pos) * (1.0 / self.tx_range());
        let to_rx = (self.rx_pos - self.target_pos) * (1.0 / self.rx_range());
        (to_tx, to_rx)
    }

    /// `cos(beta/2)` computed as half the norm of the summed leg directions,
    /// which is exactly zero for an exactly collinear forward-scatter case.
    fn half_angle_cos(&self) -> f64 {
        let (a, b) = self.unit_legs();
        ((a + b).norm() / 2.0).min(1.0)
    }

    pub fn bistatic_angle(&self) -> f64 {
        let (a, b) = self.unit_legs();
        a.cross(b).norm().atan2(a.dot(b))
    }

    pub fn bisector(&self) -> Result<Vec3> {
        let (a, b) = self.unit_legs();
        let sum = a + b;
        let n = sum.norm();
        if n < FORWARD_SCATTER_EPS {
            return Err(Error::BisectorUndefined);
        }
        Ok(sum * (1.0 / n))
    }

    /// Aspect angles of `velocity` in the bisector frame described in the
    /// module docs.
    pub fn aspect_angles(&self, velocity: Vec3) -> Result<AspectAngles> {
        let x = -self.bisector()?;
        let up = if x.cross(Vec3::Z).norm() > 1e-9 { Vec3::Z } else { Vec3::Y };
        let z = (up - x * up.dot(x)).normalized().expect("up not parallel to x");
        let y = z.cross(x);
        let Some(dir) = velocity.normalized() else {
            return Ok(AspectAngles {
                phi: 0.0,
                theta: std::f64::consts::FRAC_PI_2,
            });
        };
        let theta = dir.dot(z).clamp(-1.0, 1.0).acos();
        let phi = dir.dot(y).atan2(dir.dot(x));
        Ok(AspectAngles { phi, theta })
    }
}

/// Azimuth `phi` in [-pi, pi] and elevation `theta` in [0, pi] of a
/// velocity vector relative to the bisector frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AspectAngles {
    pub phi: f64,
    pub theta: f64,
}

pub fn wavelength(frequency_hz: f64) -> Result<f64> {
    if !(frequency_hz > 0.0 && frequency_hz.is_finite()) {
        return Err(Error::arg("frequency", "must be positive and finite"));
    }
    Ok(SPEED_OF_LIGHT / frequency_hz)
}

fn check_wavelength(wavelength: f64) -> Result<()> {
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(Error::arg("wavelength", "must be positive and finite"));
    }
    Ok(())
}

/// Angle at the target between the target→Tx and target→Rx directions.
pub fn bistatic_angle(geom: &BistaticGeometry) -> f64 {
    geom.bistatic_angle()
}

pub fn bistatic_bisector(geom: &BistaticGeometry) -> Result<Vec3> {
    geom.bisector()
}

/// Doppler shift of a point target moving with `velocity` (m/s).
///
/// Exact forward scatter returns 0 Hz without consulting the (undefined)
/// bisector frame.
pub fn point_doppler(geom: &BistaticGeometry, velocity: Vec3, wavelength: f64) -> Result<f64> {
    check_wavelength(wavelength)?;
    let speed = velocity.norm();
    let half_cos = geom.half_angle_cos();
    if speed == 0.0 || half_cos < FORWARD_SCATTER_EPS {
        return Ok(0.0);
    }
    let AspectAngles { phi, theta } = geom.aspect_angles(velocity)?;
    Ok(-2.0 * speed * half_cos * phi.cos() * theta.sin() / wavelength)
}

/// Instantaneous Doppler of a blade element at radius `l` on a propeller
/// spinning at `omega` rad/s.
pub fn propeller_point_doppler(
    omega: f64,
    l: f64,
    phi0: f64,
    t: f64,
    beta: f64,
    theta: f64,
    wavelength: f64,
) -> Result<f64> {
    check_wavelength(wavelength)?;
    if l < 0.0 {
        return Err(Error::arg("l", "blade radius must be non-negative"));
    }
    Ok(-2.0 * omega * l * (beta / 2.0).cos() * (phi0 + omega * t).cos() * theta.sin() / wavelength)
}

/// Two-sided micro-Doppler spread `4 omega L cos(beta/2) sin(theta) / lambda`.
pub fn micro_doppler_spread(
    omega: f64,
    blade_length: f64,
    beta: f64,
    theta: f64,
    wavelength: f64,
) -> Result<f64> {
    check_wavelength(wavelength)?;
    if blade_length < 0.0 {
        return Err(Error::arg("blade_length", "must be non-negative"));
    }
    Ok((4.0 * omega * blade_length * (beta / 2.0).cos() * theta.sin() / wavelength).abs())
}

/// Far-field distance `2 D^2 / lambda` for an aperture of size `size_m`.
pub fn far_field_distance(size_m: f64, frequency_hz: f64) -> Result<f64> {
    if !(size_m >= 0.0 && size_m.is_finite()) {
        return Err(Error::arg("size_m", "must be non-negative"));
    }
    Ok(2.0 * size_m * size_m / wavelength(frequency_hz)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn geom(tx: [f64; 3], rx: [f64; 3], t: [f64; 3]) -> BistaticGeometry {
        BistaticGeometry::new(
            Vec3::new(tx[0], tx[1], tx[2]),
            Vec3::new(rx[0], rx[1], rx[2]),
            Vec3::new(t[0], t[1], t[2]),
        )
        .unwrap()
    }

    #[test]
    fn bistatic_angle_reference_cases() {
        assert_eq!(geom([-1., 0., 0.], [1., 0., 0.], [0., 0., 0.]).bistatic_angle(), PI);
        assert_eq!(geom([0., 0., 3.], [0., 0., 3.], [0., 0., 0.]).bistatic_angle(), 0.0);
        // dot-product oracle on the unit legs
        let g = geom([0., 3., 0.], [3., 0., 0.], [0., 0., 0.]);
        let oracle = (Vec3::Y.dot(Vec3::X)).acos();
        assert!((g.bistatic_angle() - oracle).abs() < 1e-15);
        assert!((g.bistatic_angle() - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn degenerate_geometry_rejected() {
        let o = Vec3::ZERO;
        assert!(matches!(
            BistaticGeometry::new(o, Vec3::X, o),
            Err(Error::DegenerateGeometry(_))
        ));
        assert!(BistaticGeometry::new(Vec3::X, o, o).is_err());
        assert!(BistaticGeometry::new(Vec3::new(f64::NAN, 0.0, 0.0), Vec3::X, o).is_err());
    }

    #[test]
    fn bisector_cases() {
        let mono = geom([0., 0., 3.], [0., 0., 3.], [0., 0., 0.]);
        assert_eq!(mono.bisector().unwrap(), Vec3::Z);
        let sym = geom([-2., 0., 2.], [2., 0., 2.], [0., 0., 0.]);
        let b = sym.bisector().unwrap();
        assert!((b - Vec3::Z).norm() < 1e-15);
        let fwd = geom([-1., 0., 0.], [1., 0., 0.], [0., 0., 0.]);
        assert!(matches!(fwd.bisector(), Err(Error::BisectorUndefined)));
    }

    #[test]
    fn bisector_makes_equal_angles_with_both_legs() {
        let g = geom([3.1, -0.7, 2.2], [-1.4, 5.0, 0.3], [0.2, 0.1, -0.4]);
        let b = g.bisector().unwrap();
        let to_tx = (g.tx_pos() - g.target_pos()).normalized().unwrap();
        let to_rx = (g.rx_pos() - g.target_pos()).normalized().unwrap();
        assert!((b.dot(to_tx).acos() - b.dot(to_rx).acos()).abs() < 1e-12);
        assert!((b.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_constructor_realizes_requested_angle() {
        for deg in [0.0, 10.0, 60.0, 135.0, 180.0] {
            let beta = f64::to_radians(deg);
            let g = BistaticGeometry::symmetric(Vec3::ZERO, beta, 3.0, -Vec3::Z, Vec3::Y).unwrap();
            assert!((g.bistatic_angle() - beta).abs() < 1e-9, "{deg}");
            assert!((g.tx_range() - 3.0).abs() < 1e-12);
            assert!((g.rx_range() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn point_doppler_zero_cases() {
        let lam = 0.08;
        let g = geom([0., 3., 0.], [3., 0., 0.], [0., 0., 0.]);
        assert_eq!(point_doppler(&g, Vec3::ZERO, lam).unwrap(), 0.0);
        let fwd = geom([-1., 0., 0.], [1., 0., 0.], [0., 0., 0.]);
        assert_eq!(point_doppler(&fwd, Vec3::new(3.0, -2.0, 7.0), lam).unwrap(), 0.0);
        assert!(point_doppler(&g, Vec3::X, 0.0).is_err());
    }

    #[test]
    fn point_doppler_monostatic_reduces_to_two_way_formula() {
        let lam = 0.081;
        let g = geom([10., 0., 0.], [10., 0., 0.], [0., 0., 0.]);
        // receding at 5 m/s, 30 deg off the line of sight, in the horizontal plane
        let v = Vec3::new(-5.0 * 30f64.to_radians().cos(), 5.0 * 30f64.to_radians().sin(), 0.0);
        let fd = point_doppler(&g, v, lam).unwrap();
        let expected = -2.0 * 5.0 * 30f64.to_radians().cos() / lam;
        assert!((fd - expected).abs() < 1e-9);
    }

    #[test]
    fn point_doppler_matches_range_rate() {
        let lam = 0.05;
        let g = geom([40., 10., 5.], [-30., 25., 2.], [1., 2., 3.]);
        let v = Vec3::new(12.0, -3.0, 4.0);
        let dt = 1e-6;
        let path = |p: Vec3| p.distance(g.tx_pos()) + p.distance(g.rx_pos());
        let rate = (path(g.target_pos() + v * dt) - path(g.target_pos() - v * dt)) / (2.0 * dt);
        let oracle = -rate / lam;
        let fd = point_doppler(&g, v, lam).unwrap();
        assert!((fd - oracle).abs() <= 1e-3 * oracle.abs());
    }

    #[test]
    fn propeller_point_doppler_reference_value() {
        let lam = wavelength(3.7e9).unwrap();
        let omega = 2.0 * PI * 25.0;
        assert_eq!(propeller_point_doppler(omega, 0.0, 0.3, 0.1, 1.0, 1.0, lam).unwrap(), 0.0);
        let fd =
            propeller_point_doppler(omega, 0.1655, 0.0, 0.0, 60f64.to_radians(), FRAC_PI_2, lam)
                .unwrap();
        // 555.4 Hz reported for this blade tip
        assert!(fd < 0.0);
        assert!((fd.abs() - 555.4).abs() / 555.4 < 1e-3, "{fd}");
    }

    #[test]
    fn propeller_point_doppler_peak_over_rotation() {
        let lam = 0.081;
        let omega = 2.0 * PI * 25.0;
        let (l, beta, theta) = (0.12, 0.7, 1.2);
        let peak = (0..=100_000)
            .map(|i| {
                let t = i as f64 / 100_000.0 / 25.0;
                propeller_point_doppler(omega, l, 0.4, t, beta, theta, lam).unwrap().abs()
            })
            .fold(0.0, f64::max);
        let expected = 2.0 * omega * l * (beta / 2.0).cos() * theta.sin() / lam;
        assert!((peak - expected).abs() / expected < 1e-8);
    }

    #[test]
    fn spread_reference_values() {
        let lam = wavelength(3.7e9).unwrap();
        let omega = 2.0 * PI * 25.0;
        let at = |deg: f64| micro_doppler_spread(omega, 0.1655, deg.to_radians(), FRAC_PI_2, lam).unwrap();
        assert!((at(60.0) - 1110.8).abs() / 1110.8 < 1e-3);
        assert!(at(180.0).abs() < 1e-9);
        // direct evaluation of 4 omega L / lambda
        let mono = 4.0 * omega * 0.1655 / lam;
        assert!((at(0.0) - mono).abs() < 1e-9);
        assert!((mono - 1282.6).abs() < 0.5);
    }

    #[test]
    fn far_field_reference_values() {
        let d = far_field_distance(4.0, 5.9e9).unwrap();
        assert!((d - 629.4).abs() < 0.1, "{d}");
        assert!(d > 600.0);
        assert_eq!(far_field_distance(0.0, 5.9e9).unwrap(), 0.0);
        let small = far_field_distance(0.35, 3.7e9).unwrap();
        assert!((small - 3.02).abs() < 0.01, "{small}");
        assert!(far_field_distance(1.0, 0.0).is_err());
    }
}
