//! Target and clutter models: point scatterers, rotating propellers and the
//! field-ratio reflectivity / RCS relations.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    HH,
    HV,
    VH,
    VV,
}

impl Polarization {
    pub const ALL: [Polarization; 4] = [
        Polarization::HH,
        Polarization::HV,
        Polarization::VH,
        Polarization::VV,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Polarization::HH => "HH",
            Polarization::HV => "HV",
            Polarization::VH => "VH",
            Polarization::VV => "VV",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.label().eq_ignore_ascii_case(s))
    }

    /// Transmit/receive roles exchanged (HV <-> VH).
    pub fn transposed(self) -> Self {
        match self {
            Polarization::HV => Polarization::VH,
            Polarization::VH => Polarization::HV,
            p => p,
        }
    }
}

/// 2x2 complex scattering amplitudes indexed `[rx][tx]` over {H, V}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarimetricCoeff {
    pub m: [[Complex64; 2]; 2],
}

impl PolarimetricCoeff {
    pub fn new(hh: Complex64, hv: Complex64, vh: Complex64, vv: Complex64) -> Self {
        Self {
            m: [[hh, hv], [vh, vv]],
        }
    }

    /// Co-polarized only, identical in H and V.
    pub fn isotropic(amplitude: f64) -> Self {
        let a = Complex64::new(amplitude, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Self::new(a, z, z, a)
    }

    pub fn get(&self, pol: Polarization) -> Complex64 {
        match pol {
            Polarization::HH => self.m[0][0],
            Polarization::HV => self.m[0][1],
            Polarization::VH => self.m[1][0],
            Polarization::VV => self.m[1][1],
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = *self;
        out.m.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn is_reciprocal(&self) -> bool {
        self.m[0][1] == self.m[1][0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointScatterer {
    pub position: Vec3,
    pub velocity: Vec3,
    pub coeff: PolarimetricCoeff,
}

impl PointScatterer {
    pub fn fixed(position: Vec3, coeff: PolarimetricCoeff) -> Self {
        Self {
            position,
            velocity: Vec3::ZERO,
            coeff,
        }
    }

    /// Position after `dt` seconds of uniform motion.
    pub fn advanced(&self, dt: f64) -> Self {
        Self {
            position: self.position + self.velocity * dt,
            ..*self
        }
    }

    fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite() && self.coeff.is_finite()
    }
}

/// Rigid rotor whose blades are discretized into point scatterers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Propeller {
    center: Vec3,
    axis: Vec3,
    n_blades: usize,
    radius_m: f64,
    f_rot_hz: f64,
    phase0: f64,
    points_per_blade: usize,
    coeff: PolarimetricCoeff,
}

pub const DEFAULT_POINTS_PER_BLADE: usize = 16;

impl Propeller {
    /// `coeff` is the amplitude of each blade element.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        center: Vec3,
        axis: Vec3,
        n_blades: usize,
        radius_m: f64,
        f_rot_hz: f64,
        phase0: f64,
        points_per_blade: usize,
        coeff: PolarimetricCoeff,
    ) -> Result<Self> {
        let axis = axis
            .normalized()
            .ok_or_else(|| Error::arg("axis", "rotation axis must be non-zero"))?;
        if !center.is_finite() {
            return Err(Error::arg("center", "must be finite"));
        }
        if n_blades == 0 {
            return Err(Error::arg("n_blades", "need at least one blade"));
        }
        if !(radius_m > 0.0 && radius_m.is_finite()) {
            return Err(Error::arg("radius_m", "must be positive"));
        }
        if !(f_rot_hz >= 0.0 && f_rot_hz.is_finite()) {
            return Err(Error::arg("f_rot_hz", "must be non-negative"));
        }
        if !phase0.is_finite() {
            return Err(Error::arg("phase0", "must be finite"));
        }
        if points_per_blade == 0 {
            return Err(Error::arg("points_per_blade", "need at least one element"));
        }
        if !coeff.is_finite() {
            return Err(Error::arg("coeff", "must be finite"));
        }
        Ok(Self {
            center,
            axis,
            n_blades,
            radius_m,
            f_rot_hz,
            phase0,
            points_per_blade,
            coeff,
        })
    }

    /// Two-blade 16.55 cm rotor at 25 Hz spinning about `+z`, with the
    /// total per-blade amplitude `blade_amplitude` spread evenly over the
    /// default number of elements.
    pub fn reference_rotor(center: Vec3, blade_amplitude: f64) -> Self {
        let n = DEFAULT_POINTS_PER_BLADE;
        Self::new(
            center,
            Vec3::Z,
            2,
            0.1655,
            25.0,
            0.0,
            n,
            PolarimetricCoeff::isotropic(blade_amplitude / n as f64),
        )
        .expect("reference rotor parameters are valid")
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    pub fn n_blades(&self) -> usize {
        self.n_blades
    }

    pub fn radius_m(&self) -> f64 {
        self.radius_m
    }

    pub fn f_rot_hz(&self) -> f64 {
        self.f_rot_hz
    }

    pub fn phase0(&self) -> f64 {
        self.phase0
    }

    pub fn points_per_blade(&self) -> usize {
        self.points_per_blade
    }

    pub fn coeff(&self) -> PolarimetricCoeff {
        self.coeff
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.f_rot_hz
    }

    pub fn tip_speed(&self) -> f64 {
        self.omega() * self.radius_m
    }

    /// Orthonormal pair spanning the rotation plane; blade angle is measured
    /// from the first towards the second.
    pub fn plane_basis(&self) -> (Vec3, Vec3) {
        let e1 = self.axis.any_orthogonal();
        let e2 = self.axis.cross(e1);
        (e1, e2)
    }

    /// Element radii `(k - 1/2) L / P`, k = 1..=P.
    pub fn element_radii(&self) -> impl Iterator<Item = f64> + '_ {
        let p = self.points_per_blade as f64;
        (0..self.points_per_blade).map(move |k| (k as f64 + 0.5) * self.radius_m / p)
    }

    /// Angle of blade `b` in the rotation plane at time `t`.
    pub fn blade_angle(&self, blade: usize, t: f64) -> f64 {
        self.phase0 + 2.0 * PI * blade as f64 / self.n_blades as f64 + self.omega() * t
    }

    /// Snapshot of all blade elements at time `t`: positions on the rotating
    /// blades and tangential velocities `omega x r`.
    pub fn point_cloud(&self, t: f64) -> Vec<PointScatterer> {
        let (e1, e2) = self.plane_basis();
        let omega = self.omega();
        let mut out = Vec::with_capacity(self.n_blades * self.points_per_blade);
        for blade in 0..self.n_blades {
            let (s, c) = self.blade_angle(blade, t).sin_cos();
            let radial = e1 * c + e2 * s;
            let tangential = e2 * c - e1 * s;
            for l in self.element_radii() {
                out.push(PointScatterer {
                    position: self.center + radial * l,
                    velocity: tangential * (omega * l),
                    coeff: self.coeff,
                });
            }
        }
        out
    }

    pub fn rotated_z(&self, angle: f64) -> Self {
        let mut out = *self;
        out.center = self.center.rotated_z(angle);
        out.axis = self.axis.rotated_z(angle);
        out
    }
}

pub fn propeller_point_cloud(prop: &Propeller, t: f64) -> Vec<PointScatterer> {
    prop.point_cloud(t)
}

/// Static target parts, rotors and chamber clutter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub static_scatterers: Vec<PointScatterer>,
    pub propellers: Vec<Propeller>,
    pub background_scatterers: Vec<PointScatterer>,
}

impl Scene {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_static(mut self, s: PointScatterer) -> Self {
        self.static_scatterers.push(s);
        self
    }

    pub fn with_propeller(mut self, p: Propeller) -> Self {
        self.propellers.push(p);
        self
    }

    pub fn with_background(mut self, s: PointScatterer) -> Self {
        self.background_scatterers.push(s);
        self
    }

    /// Hub scatterer of amplitude `body_amplitude` plus one reference rotor
    /// at `center`, the single-propeller scene used for micro-Doppler runs.
    pub fn single_rotor(center: Vec3, body_amplitude: f64, blade_amplitude: f64) -> Self {
        let mut scene = Scene::new().with_propeller(Propeller::reference_rotor(center, blade_amplitude));
        if body_amplitude != 0.0 {
            scene = scene.with_static(PointScatterer::fixed(
                center,
                PolarimetricCoeff::isotropic(body_amplitude),
            ));
        }
        scene
    }

    pub fn is_empty(&self) -> bool {
        self.static_scatterers.is_empty()
            && self.propellers.is_empty()
            && self.background_scatterers.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.static_scatterers.iter().chain(&self.background_scatterers);
        if all.into_iter().any(|s| !s.is_finite()) {
            return Err(Error::arg("scene", "scatterer with non-finite field"));
        }
        Ok(())
    }

    /// Target-only scatterers (static parts and propeller elements) at `t`.
    /// Static scatterers move with their own velocity.
    pub fn target_scatterers_at(&self, t: f64) -> Vec<PointScatterer> {
        let mut out: Vec<PointScatterer> = self.static_scatterers.iter().map(|s| s.advanced(t)).collect();
        for p in &self.propellers {
            out.extend(p.point_cloud(t));
        }
        out
    }

    pub fn background_at(&self, t: f64) -> Vec<PointScatterer> {
        self.background_scatterers.iter().map(|s| s.advanced(t)).collect()
    }

    /// Every scatterer in the scene at `t`.
    pub fn all_scatterers_at(&self, t: f64) -> Vec<PointScatterer> {
        let mut out = self.target_scatterers_at(t);
        out.extend(self.background_at(t));
        out
    }

    /// Turntable rotation: target scatterers and rotors rotate about the
    /// vertical axis through the origin; background stays put.
    pub fn with_turntable(&self, angle_rad: f64) -> Self {
        let rot = |s: &PointScatterer| PointScatterer {
            position: s.position.rotated_z(angle_rad),
            velocity: s.velocity.rotated_z(angle_rad),
            coeff: s.coeff,
        };
        Self {
            static_scatterers: self.static_scatterers.iter().map(rot).collect(),
            propellers: self.propellers.iter().map(|p| p.rotated_z(angle_rad)).collect(),
            background_scatterers: self.background_scatterers.clone(),
        }
    }

    /// Target part only (background removed).
    pub fn target_only(&self) -> Self {
        Self {
            background_scatterers: Vec::new(),
            ..self.clone()
        }
    }

    /// Fastest scatterer speed over a rotation, m/s.
    pub fn max_speed(&self) -> f64 {
        let stat = self
            .static_scatterers
            .iter()
            .chain(&self.background_scatterers)
            .map(|s| s.velocity.norm());
        let props = self.propellers.iter().map(|p| p.tip_speed());
        stat.chain(props).fold(0.0, f64::max)
    }

    pub fn is_reciprocal(&self) -> bool {
        let stat = self.static_scatterers.iter().chain(&self.background_scatterers).all(|s| s.coeff.is_reciprocal());
        stat && self.propellers.iter().all(|p| p.coeff.is_reciprocal())
    }
}

/// Power ratio `|E_scat|^2 / |E_inc|^2`.
pub fn reflectivity(e_scat_mag: f64, e_inc_mag: f64) -> Result<f64> {
    if e_inc_mag.is_nan() || e_inc_mag <= 0.0 {
        return Err(Error::arg("e_inc_mag", "incident field must be positive"));
    }
    Ok((e_scat_mag / e_inc_mag).powi(2))
}

/// Radar cross section `4 pi d_rx^2 |E_scat|^2 / |E_inc|^2` in m^2. Only
/// meaningful when the receiver sits in the far field.
pub fn rcs_from_fields(e_scat_mag: f64, e_inc_mag: f64, d_rx: f64) -> Result<f64> {
    if d_rx.is_nan() || d_rx <= 0.0 {
        return Err(Error::arg("d_rx", "range must be positive"));
    }
    Ok(4.0 * PI * d_rx * d_rx * reflectivity(e_scat_mag, e_inc_mag)?)
}
