//! Poses, Euler rotations and A2A link geometry.
//!
//! Orientation matrices map body-frame vectors to the global frame. The
//! incident-angle components follow the literal link definition: both are
//! taken against the full 3D separation `d`, not its horizontal projection.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
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

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// A 3×3 rotation matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationMatrix(pub [[f64; 3]; 3]);

impl Default for RotationMatrix {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix =
        RotationMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Roll: rotation about the x axis.
    pub fn rx(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    /// Pitch: rotation about the y axis.
    pub fn ry(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    /// Yaw: rotation about the z axis.
    pub fn rz(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        let mut t = [[0.0; 3]; 3];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[j][i];
            }
        }
        Self(t)
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// Largest absolute entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let p = self.transpose() * *self;
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p.0[i][j] - target).abs());
            }
        }
        worst
    }

    /// Membership test for SO(3) at tolerance `tol`.
    pub fn is_rotation(&self, tol: f64) -> bool {
        self.orthonormality_error() <= tol && (self.det() - 1.0).abs() <= tol
    }

    /// Largest absolute entry of `self − other`.
    pub fn max_abs_diff(&self, other: &RotationMatrix) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        worst
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, o: RotationMatrix) -> RotationMatrix {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        RotationMatrix(r)
    }
}

/// Z-Y-X Euler composition `Rz(yaw)·Ry(pitch)·Rx(roll)`.
pub fn euler_zyx(yaw: f64, pitch: f64, roll: f64) -> RotationMatrix {
    RotationMatrix::rz(yaw) * RotationMatrix::ry(pitch) * RotationMatrix::rx(roll)
}

/// Inverse of [`euler_zyx`], built from negated angles in reversed order.
pub fn euler_zyx_inverse(yaw: f64, pitch: f64, roll: f64) -> RotationMatrix {
    RotationMatrix::rx(-roll) * RotationMatrix::ry(-pitch) * RotationMatrix::rz(-yaw)
}

/// Spherical basis `(ê_R, ê_ψ, ê_θ)` at elevation `theta` and azimuth `psi`.
pub fn spherical_basis(theta: f64, psi: f64) -> (Vec3, Vec3, Vec3) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    let e_r = Vec3::new(ct * cp, ct * sp, st);
    let e_psi = Vec3::new(-sp, cp, 0.0);
    let e_theta = Vec3::new(-st * cp, -st * sp, ct);
    (e_r, e_psi, e_theta)
}

/// Position plus body-to-global orientation of one UAV.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: RotationMatrix,
}

impl Pose {
    pub fn at(position: Vec3) -> Self {
        Self { position, orientation: RotationMatrix::IDENTITY }
    }

    pub fn new(position: Vec3, yaw: f64, pitch: f64, roll: f64) -> Self {
        Self { position, orientation: euler_zyx(yaw, pitch, roll) }
    }

    /// Body z axis in the global frame; the on-board dipole lies along it.
    pub fn antenna_axis(&self) -> Vec3 {
        self.orientation.apply(Vec3::Z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// Full 3D separation in meters.
    pub d: f64,
    pub d_x: f64,
    pub d_y: f64,
    pub d_z: f64,
    /// Elevation component of the incident angle, `atan(d_z / d)`.
    pub phi_theta: f64,
    /// Azimuth component of the incident angle, `atan(d_y / d)`.
    pub phi_psi: f64,
}

impl LinkGeometry {
    /// Geometry for a receiver offset `(d_x, d_y, d_z)` from the transmitter.
    pub fn from_offsets(d_x: f64, d_y: f64, d_z: f64) -> Result<Self> {
        let d = Vec3::new(d_x, d_y, d_z).norm();
        if !(d > 0.0 && d.is_finite()) {
            return Err(domain("transmitter and receiver positions coincide"));
        }
        Ok(Self {
            d,
            d_x,
            d_y,
            d_z,
            phi_theta: (d_z / d).atan(),
            phi_psi: (d_y / d).atan(),
        })
    }
}

/// Link geometry from transmitter to receiver.
pub fn link_geometry(tx: &Pose, rx: &Pose) -> Result<LinkGeometry> {
    let off = rx.position - tx.position;
    LinkGeometry::from_offsets(off.x, off.y, off.z)
}

/// Interval of elevation angles reachable for separations in `[d_min, d_max]`
/// at height offset `d_z`; the elevation density integrates to one over it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElevationSupport {
    pub lower: f64,
    pub upper: f64,
}

impl ElevationSupport {
    pub fn new(d_z: f64, d_min: f64, d_max: f64) -> Result<Self> {
        check_range(d_z, d_min, d_max)?;
        let a = (d_z / d_max).atan();
        let b = (d_z / d_min).atan();
        Ok(Self { lower: a.min(b), upper: a.max(b) })
    }

    pub fn contains(&self, phi: f64) -> bool {
        (self.lower..=self.upper).contains(&phi)
    }
}

fn check_range(d_z: f64, d_min: f64, d_max: f64) -> Result<()> {
    if !(d_min > 0.0 && d_max > d_min && d_max.is_finite()) {
        return Err(domain(format!("need 0 < d_min < d_max, got [{d_min}, {d_max}]")));
    }
    if !d_z.is_finite() || d_z == 0.0 {
        return Err(domain("height offset d_z must be finite and non-zero"));
    }
    Ok(())
}

/// Density of the elevation angle under a uniform separation in
/// `[d_min, d_max]`: `|d_z| csc²(φ) / (d_max − d_min)`.
///
/// The formula is evaluated for any non-zero angle; use [`ElevationSupport`]
/// for the interval on which it normalizes.
pub fn elevation_pdf(phi_theta: f64, d_z: f64, d_min: f64, d_max: f64) -> Result<f64> {
    check_range(d_z, d_min, d_max)?;
    let s = phi_theta.sin();
    if phi_theta == 0.0 || s == 0.0 {
        return Err(domain("elevation density is singular at phi = 0"));
    }
    Ok(d_z.abs() / (d_max - d_min) / (s * s))
}
