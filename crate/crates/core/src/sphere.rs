//! The ideal spherical camera model.
//!
//! Conversions between the three coordinate systems every other module
//! builds on:
//!
//! - continuous ERP pixel coordinates `(u, v)`, `u` along the width;
//! - spherical coordinates `(lon, lat)` in radians;
//! - 3D unit vectors in the camera frame: `+Z` forward, `+X` right,
//!   `+Y` down.
//!
//! The projection is `u = (lon/2π + 0.5)·W`, `v = (−lat/π + 0.5)·H`, with
//! `lon = atan2(X, Z)` and `lat = atan2(−Y, √(X²+Z²))`. All angles are
//! radians; degrees appear only at I/O boundaries.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub const TAU: f64 = std::f64::consts::TAU;
pub const PI: f64 = std::f64::consts::PI;

/// Wrap a longitude into the canonical band `[-π, π)`.
///
/// Every operation that can move a longitude out of the band goes through
/// here, so wrap behaviour is defined in exactly one place.
#[inline]
pub fn wrap_lon(lon: f64) -> f64 {
    let w = lon - TAU * ((lon + PI) / TAU).floor();
    // floor() rounding can land exactly on +π for inputs just below a period
    // boundary; fold it back.
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// A direction on the unit sphere in spherical coordinates.
///
/// `lon ∈ [-π, π)`, `lat ∈ [-π/2, π/2]`. Construction clamps latitudes that
/// exceed a pole by at most 1e-12 (floating rounding) and rejects anything
/// further out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LonLat {
    lon: f64,
    lat: f64,
}

impl LonLat {
    pub fn new(lon: f64, lat: f64) -> Result<Self> {
        const SLACK: f64 = 1e-12;
        if !lon.is_finite() || !lat.is_finite() {
            return Err(Error::Domain(format!("non-finite lon/lat ({lon}, {lat})")));
        }
        if lat.abs() > PI / 2.0 + SLACK {
            return Err(Error::Domain(format!("latitude {lat} outside [-π/2, π/2]")));
        }
        Ok(Self {
            lon: wrap_lon(lon),
            lat: lat.clamp(-PI / 2.0, PI / 2.0),
        })
    }

    pub fn from_degrees(lon_deg: f64, lat_deg: f64) -> Result<Self> {
        Self::new(lon_deg.to_radians(), lat_deg.to_radians())
    }

    #[inline]
    pub fn lon(&self) -> f64 {
        self.lon
    }

    #[inline]
    pub fn lat(&self) -> f64 {
        self.lat
    }

    /// Direction of this point in the camera frame.
    pub fn to_vec(&self) -> UnitVec {
        let (sin_lon, cos_lon) = self.lon.sin_cos();
        let (sin_lat, cos_lat) = self.lat.sin_cos();
        UnitVec(Vector3::new(cos_lat * sin_lon, -sin_lat, cos_lat * cos_lon))
    }
}

/// A unit-norm direction in the camera frame (`+Z` forward, `+X` right,
/// `+Y` down, so `lat = atan2(-Y, √(X²+Z²))`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec(Vector3<f64>);

impl UnitVec {
    /// Normalizes defensively; back-projection pipelines accumulate rounding.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::from_vector(Vector3::new(x, y, z))
    }

    pub fn from_vector(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if n < 1e-300 || !n.is_finite() {
            return Err(Error::Domain("cannot normalize zero vector".into()));
        }
        Ok(Self(v / n))
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.0.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.0.y
    }

    #[inline]
    pub fn z(&self) -> f64 {
        self.0.z
    }

    #[inline]
    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }

    /// Spherical coordinates of this direction.
    pub fn to_lonlat(&self) -> LonLat {
        let lon = self.0.x.atan2(self.0.z);
        let lat = (-self.0.y).atan2((self.0.x * self.0.x + self.0.z * self.0.z).sqrt());
        LonLat {
            lon: wrap_lon(lon),
            lat,
        }
    }

    #[inline]
    pub fn dot(&self, other: &UnitVec) -> f64 {
        self.0.dot(&other.0)
    }
}

/// ERP frame dimensions in pixels. Widths are twice the height.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErpDims {
    width: u32,
    height: u32,
}

impl ErpDims {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width < 2 || width != 2 * height {
            return Err(Error::Validation(format!(
                "ERP dims must satisfy W = 2H, W >= 2 (got {width}x{height})"
            )));
        }
        Ok(Self { width, height })
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn w(&self) -> f64 {
        f64::from(self.width)
    }

    #[inline]
    pub fn h(&self) -> f64 {
        f64::from(self.height)
    }

    /// Pixel footprint in longitude: radians per pixel along the equator.
    #[inline]
    pub fn lon_per_pixel(&self) -> f64 {
        TAU / self.w()
    }
}

/// Continuous ERP pixel coordinates. `u ∈ [0, W)` (wrapping), `v ∈ [0, H]`;
/// the center of column 0 sits at `u = 0.5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixCoord {
    pub u: f64,
    pub v: f64,
}

impl PixCoord {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Project a sphere point onto the ERP image. Total function.
pub fn sph_to_pix(p: LonLat, d: ErpDims) -> PixCoord {
    let u = (p.lon / TAU + 0.5) * d.w();
    let v = (-p.lat / PI + 0.5) * d.h();
    PixCoord {
        u: u.rem_euclid(d.w()),
        v,
    }
}

/// Exact algebraic inverse of [`sph_to_pix`]. `v` must lie in `[0, H]`.
pub fn pix_to_sph(q: PixCoord, d: ErpDims) -> Result<LonLat> {
    if !(0.0..=d.h()).contains(&q.v) {
        return Err(Error::Domain(format!(
            "pixel v = {} outside [0, {}]",
            q.v,
            d.h()
        )));
    }
    let u = q.u.rem_euclid(d.w());
    Ok(LonLat {
        lon: wrap_lon((u / d.w() - 0.5) * TAU),
        lat: (0.5 - q.v / d.h()) * PI,
    })
}

/// Direction of an ERP pixel *center* `(ix + 0.5, iy + 0.5)`.
pub fn pixel_center_dir(ix: u32, iy: u32, d: ErpDims) -> UnitVec {
    let q = PixCoord::new(f64::from(ix) + 0.5, f64::from(iy) + 0.5);
    pix_to_sph(q, d).expect("pixel center in range").to_vec()
}

/// A proper rotation (orthonormal, det = +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Rotation about the Y (down) axis; moves the forward axis to
    /// longitude `a`.
    pub fn about_y(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    /// Rotation about the X (right) axis; moves the forward axis to
    /// latitude `a`.
    pub fn about_x(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    /// In-plane rotation about the Z (forward) axis.
    pub fn about_z(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// The frame orientation of a bounding region: `R_y(lon)·R_x(lat)·R_z(gamma)`.
    pub fn frame(lon: f64, lat: f64, gamma: f64) -> Self {
        Self::about_y(lon) * Self::about_x(lat) * Self::about_z(gamma)
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    #[inline]
    pub fn apply(&self, v: &UnitVec) -> UnitVec {
        UnitVec(self.0 * v.0)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Decompose into `R_y(a)·R_x(b)·R_z(c)` Euler angles, the family that
    /// parametrizes bounding-region frames. `b` is returned in
    /// `[-π/2, π/2]`; degenerate (gimbal) configurations put all in-plane
    /// rotation into `c`.
    pub fn to_yxz_euler(&self) -> (f64, f64, f64) {
        let m = &self.0;
        let b = (-m[(1, 2)]).clamp(-1.0, 1.0).asin();
        if m[(1, 2)].abs() < 1.0 - 1e-12 {
            let a = m[(0, 2)].atan2(m[(2, 2)]);
            let c = m[(1, 0)].atan2(m[(1, 1)]);
            (a, b, c)
        } else {
            // cos(b) = 0: a and c are not separable; fold everything into c.
            let c = (-m[(0, 1)]).atan2(m[(0, 0)]);
            (0.0, b, c)
        }
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

/// Great-circle angle between two directions, in `[0, π]`.
pub fn angular_distance(a: LonLat, b: LonLat) -> f64 {
    angular_distance_vec(&a.to_vec(), &b.to_vec())
}

pub fn angular_distance_vec(a: &UnitVec, b: &UnitVec) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos()
}

/// Spherical (vector-mean) centroid of a set of directions.
///
/// Returns an error when the mean vanishes (e.g. perfectly antipodal or
/// full-sphere input), where the direction would be rounding noise.
pub fn centroid(dirs: &[UnitVec]) -> Result<UnitVec> {
    if dirs.is_empty() {
        return Err(Error::Domain("centroid of empty direction set".into()));
    }
    let sum = dirs
        .iter()
        .fold(Vector3::zeros(), |acc, d| acc + d.as_vector());
    if sum.norm() < 1e-9 * dirs.len() as f64 {
        return Err(Error::Domain("direction set has no stable centroid".into()));
    }
    UnitVec::from_vector(sum)
}
