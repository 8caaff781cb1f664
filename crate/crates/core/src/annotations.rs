//! The four target-location representations and their validity rules.

use crate::error::{Error, Result};
use crate::sphere::{ErpDims, LonLat, PixCoord, PI, TAU};

/// A (possibly rotated) pixel bounding rectangle on the ERP image,
/// center-based: `[cx, cy, w, h, gamma]`. `gamma = 0` means axis-aligned.
///
/// Boxes that cross the left/right border are represented by wrap semantics:
/// a canonical box stores `cx ∈ [0, W)` and consumers treat `u` modulo `W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bbox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    /// In-plane rotation in radians, canonical band `(-π/2, π/2]`.
    pub gamma: f64,
}

impl Bbox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, gamma: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) {
            return Err(Error::Validation(format!(
                "box extents must be positive (got w={w}, h={h})"
            )));
        }
        if ![cx, cy, gamma].iter().all(|v| v.is_finite()) {
            return Err(Error::Validation("non-finite box field".into()));
        }
        Ok(Self { cx, cy, w, h, gamma })
    }

    pub fn axis_aligned(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx, cy, w, h, 0.0)
    }

    pub fn is_rotated(&self) -> bool {
        self.gamma != 0.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> PixCoord {
        PixCoord::new(self.cx, self.cy)
    }

    /// Corner coordinates, in drawing order. `v` grows downward and the
    /// rotation follows the image convention (positive gamma turns the
    /// +u edge toward +v).
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (s, c) = self.gamma.sin_cos();
        let hw = self.w / 2.0;
        let hh = self.h / 2.0;
        let mut out = [(0.0, 0.0); 4];
        for (k, (dx, dy)) in [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
            .into_iter()
            .enumerate()
        {
            out[k] = (self.cx + c * dx - s * dy, self.cy + s * dx + c * dy);
        }
        out
    }

    /// Wrap `cx` into `[0, W)` and fold `gamma` into `(-π/2, π/2]`,
    /// swapping `w`/`h` for every quarter turn removed. Idempotent, and the
    /// covered pixel set is unchanged modulo horizontal wrap.
    pub fn canonicalize(&self, d: ErpDims) -> Result<Bbox> {
        let mut b = Bbox::new(self.cx, self.cy, self.w, self.h, self.gamma)?;
        b.cx = b.cx.rem_euclid(d.w());
        // First remove half turns (no effect on the rectangle), then quarter
        // turns, which swap the roles of w and h.
        b.gamma %= PI;
        while b.gamma > PI / 2.0 {
            b.gamma -= PI / 2.0;
            std::mem::swap(&mut b.w, &mut b.h);
        }
        while b.gamma <= -PI / 2.0 {
            b.gamma += PI / 2.0;
            std::mem::swap(&mut b.w, &mut b.h);
        }
        // A rotated box may legitimately be longer than the frame width (a
        // diagonal strip), but nothing fits beyond the frame diagonal.
        let diag = d.w().hypot(d.h());
        if b.w > diag + 1e-9 || b.h > diag + 1e-9 {
            return Err(Error::Validation(format!(
                "box {}x{} exceeds frame {}x{} diagonal",
                b.w,
                b.h,
                d.width(),
                d.height()
            )));
        }
        Ok(b)
    }
}

/// A (possibly rotated) bounding field-of-view `[clon, clat, theta, phi, gamma]`:
/// the angular region around a center direction, `theta`/`phi` being the
/// maximum horizontal/vertical FoV extents. `gamma = 0` means unrotated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bfov {
    pub clon: f64,
    pub clat: f64,
    pub theta: f64,
    pub phi: f64,
    pub gamma: f64,
}

impl Bfov {
    pub fn new(clon: f64, clat: f64, theta: f64, phi: f64, gamma: f64) -> Result<Self> {
        let f = Self {
            clon,
            clat,
            theta,
            phi,
            gamma,
        };
        f.validate()
    }

    pub fn from_degrees(clon: f64, clat: f64, theta: f64, phi: f64, gamma: f64) -> Result<Self> {
        Self::new(
            clon.to_radians(),
            clat.to_radians(),
            theta.to_radians(),
            phi.to_radians(),
            gamma.to_radians(),
        )
    }

    /// Checks the FoV invariants: `theta ∈ (0, 2π]`, `phi ∈ (0, π]`, valid
    /// center. Returns the value unchanged when everything holds.
    pub fn validate(self) -> Result<Self> {
        if !(self.theta > 0.0 && self.theta <= TAU + 1e-12) {
            return Err(Error::Validation(format!(
                "theta = {} rad outside (0, 2π]",
                self.theta
            )));
        }
        if !(self.phi > 0.0 && self.phi <= PI + 1e-12) {
            return Err(Error::Validation(format!(
                "phi = {} rad outside (0, π]",
                self.phi
            )));
        }
        let center = LonLat::new(self.clon, self.clat)?;
        Ok(Self {
            clon: center.lon(),
            clat: center.lat(),
            theta: self.theta.min(TAU),
            phi: self.phi.min(PI),
            gamma: self.gamma,
        })
    }

    pub fn center(&self) -> LonLat {
        LonLat::new(self.clon, self.clat).expect("validated center")
    }

    pub fn is_rotated(&self) -> bool {
        self.gamma != 0.0
    }
}

/// A binary target raster aligned to an ERP grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    dims: ErpDims,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(dims: ErpDims) -> Self {
        Self {
            dims,
            bits: vec![false; (dims.width() * dims.height()) as usize],
        }
    }

    pub fn from_fn(dims: ErpDims, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = Self::empty(dims);
        for iy in 0..dims.height() {
            for ix in 0..dims.width() {
                if f(ix, iy) {
                    m.set(ix, iy, true);
                }
            }
        }
        m
    }

    /// Interpret an 8-bit single-channel raster: 0 = background, anything
    /// above 127 = target.
    pub fn from_gray(dims: ErpDims, data: &[u8]) -> Result<Self> {
        let expected = (dims.width() * dims.height()) as usize;
        if data.len() != expected {
            return Err(Error::DimMismatch(format!(
                "mask buffer has {} bytes, dims {}x{} need {}",
                data.len(),
                dims.width(),
                dims.height(),
                expected
            )));
        }
        Ok(Self {
            dims,
            bits: data.iter().map(|&b| b > 127).collect(),
        })
    }

    #[inline]
    pub fn dims(&self) -> ErpDims {
        self.dims
    }

    #[inline]
    pub fn get(&self, ix: u32, iy: u32) -> bool {
        self.bits[(iy * self.dims.width() + ix) as usize]
    }

    #[inline]
    pub fn set(&mut self, ix: u32, iy: u32, on: bool) {
        self.bits[(iy * self.dims.width() + ix) as usize] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn set_pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.dims.width();
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i as u32 % w, i as u32 / w))
    }

    pub fn to_gray(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }
}

/// Everything known about a target in one frame. At least one representation
/// must be present.
#[derive(Debug, Clone, Default)]
pub struct FrameAnnotation {
    pub frame: usize,
    pub bbox: Option<Bbox>,
    pub rbbox: Option<Bbox>,
    pub bfov: Option<Bfov>,
    pub rbfov: Option<Bfov>,
    pub mask: Option<Mask>,
}

impl FrameAnnotation {
    pub fn validate(self) -> Result<Self> {
        if self.bbox.is_none()
            && self.rbbox.is_none()
            && self.bfov.is_none()
            && self.rbfov.is_none()
            && self.mask.is_none()
        {
            return Err(Error::Validation(format!(
                "frame {} annotation holds no representation",
                self.frame
            )));
        }
        Ok(self)
    }

    /// Best available angular center: BFoV center when present, otherwise
    /// the box center lifted through the spherical camera model.
    pub fn sphere_center(&self, d: ErpDims) -> Option<LonLat> {
        if let Some(f) = self.bfov.or(self.rbfov) {
            return Some(f.center());
        }
        let b = self.bbox.or(self.rbbox)?;
        crate::sphere::pix_to_sph(
            PixCoord::new(b.cx, b.cy.clamp(0.0, d.h())),
            d,
        )
        .ok()
    }
}
