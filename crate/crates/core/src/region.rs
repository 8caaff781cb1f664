//! ERP regions realized by a (r)BFoV.
//!
//! A bounding field-of-view owns a patch `Ω` in its local frame: a tangent
//! plane rectangle for small FoV, or a spherical surface patch once the FoV
//! reaches 90° in either direction (a tangent plane cannot represent a
//! region approaching 180°). The region on the 360° image is the projection
//! of `R_y(clon)·R_x(clat)·R_z(gamma)·Ω`.
//!
//! [`RegionMap`] materializes the patch as a dense grid of sphere
//! directions, one per output pixel. Directions (not pixel coordinates) are
//! stored so the horizontal seam never corrupts interpolation; conversion
//! to pixels happens only at sampling time.

use image::RgbImage;
use rayon::prelude::*;

use crate::annotations::{Bbox, Bfov};
use crate::error::{Error, Result};
use crate::geom;
use crate::sphere::{
    self, sph_to_pix, ErpDims, LonLat, PixCoord, Rotation, UnitVec, PI, TAU,
};

/// Which surface generates the region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionMode {
    Tangent,
    Sphere,
}

impl RegionMode {
    /// The gating rule: a tangent plane only while both extents stay under
    /// 90°, a spherical patch otherwise.
    pub fn for_fov(theta: f64, phi: f64) -> RegionMode {
        if theta < PI / 2.0 && phi < PI / 2.0 {
            RegionMode::Tangent
        } else {
            RegionMode::Sphere
        }
    }
}

impl std::fmt::Display for RegionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegionMode::Tangent => "tangent",
            RegionMode::Sphere => "sphere",
        })
    }
}

/// Output resolution for unwarped patches. Defaults to the source image's
/// equatorial pixel density (`W/360` pixels per degree), capped per side.
#[derive(Debug, Clone, Copy)]
pub struct ResolutionPolicy {
    /// Override the pixels-per-degree density; `None` uses `W/360`.
    pub pixels_per_degree: Option<f64>,
    pub max_side: u32,
    pub min_side: u32,
    /// Force an exact output size, bypassing the density computation.
    pub exact: Option<(u32, u32)>,
}

impl Default for ResolutionPolicy {
    fn default() -> Self {
        Self {
            pixels_per_degree: None,
            max_side: 1024,
            min_side: 16,
            exact: None,
        }
    }
}

impl ResolutionPolicy {
    pub fn exact(width: u32, height: u32) -> Self {
        Self {
            exact: Some((width, height)),
            ..Self::default()
        }
    }

    fn size_for(&self, f: &Bfov, d: ErpDims) -> (u32, u32) {
        if let Some(sz) = self.exact {
            return (sz.0.max(2), sz.1.max(2));
        }
        let ppd = self.pixels_per_degree.unwrap_or(d.w() / 360.0);
        let clamp = |x: f64| -> u32 {
            (x.round() as i64)
                .clamp(i64::from(self.min_side.max(2)), i64::from(self.max_side)) as u32
        };
        (
            clamp(f.theta.to_degrees() * ppd),
            clamp(f.phi.to_degrees() * ppd),
        )
    }
}

/// Tangent-plane grid in the local frame: `Wr x Hr` samples uniform in
/// `X ∈ [-tan(θ/2), tan(θ/2)]`, `Y ∈ [-tan(φ/2), tan(φ/2)]` on the plane
/// `Z = 1`, normalized. Row 0 is the top of the image (`Y < 0` is up).
pub fn tangent_grid(theta: f64, phi: f64, wr: u32, hr: u32) -> Result<Vec<UnitVec>> {
    if !(theta > 0.0 && theta < PI && phi > 0.0 && phi < PI) {
        return Err(Error::Domain(format!(
            "tangent plane cannot represent FoV {:.2}x{:.2} deg",
            theta.to_degrees(),
            phi.to_degrees()
        )));
    }
    check_grid_size(wr, hr)?;
    let tx = (theta / 2.0).tan();
    let ty = (phi / 2.0).tan();
    let mut dirs = Vec::with_capacity((wr * hr) as usize);
    for i in 0..hr {
        let y = lerp(-ty, ty, f64::from(i) / f64::from(hr - 1));
        for j in 0..wr {
            let x = lerp(-tx, tx, f64::from(j) / f64::from(wr - 1));
            dirs.push(UnitVec::new(x, y, 1.0).expect("nonzero"));
        }
    }
    Ok(dirs)
}

/// Spherical-surface grid in the local frame: uniform in
/// `Θ ∈ [-θ/2, θ/2]`, `Φ ∈ [-φ/2, φ/2]`, mapped through
/// `(cosΦ·sinΘ, -sinΦ, cosΦ·cosΘ)`. Row 0 is the top (`Φ = +φ/2`).
pub fn sphere_grid(theta: f64, phi: f64, wr: u32, hr: u32) -> Result<Vec<UnitVec>> {
    if !(theta > 0.0 && theta <= TAU && phi > 0.0 && phi <= PI) {
        return Err(Error::Domain(format!(
            "sphere patch FoV {:.2}x{:.2} deg out of range",
            theta.to_degrees(),
            phi.to_degrees()
        )));
    }
    check_grid_size(wr, hr)?;
    let mut dirs = Vec::with_capacity((wr * hr) as usize);
    for i in 0..hr {
        let lat = lerp(phi / 2.0, -phi / 2.0, f64::from(i) / f64::from(hr - 1));
        for j in 0..wr {
            let lon = lerp(-theta / 2.0, theta / 2.0, f64::from(j) / f64::from(wr - 1));
            dirs.push(LonLat::new(lon, lat).expect("in range").to_vec());
        }
    }
    Ok(dirs)
}

fn check_grid_size(wr: u32, hr: u32) -> Result<()> {
    if wr < 2 || hr < 2 {
        return Err(Error::Domain(format!("grid {wr}x{hr} too small")));
    }
    Ok(())
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Resolution-free geometry of a bounding region: membership tests and
/// closed-form projection into local patch coordinates.
#[derive(Debug, Clone, Copy)]
pub struct RegionGeometry {
    bfov: Bfov,
    mode: RegionMode,
    frame_inv: Rotation,
    tan_half_theta: f64,
    tan_half_phi: f64,
}

impl RegionGeometry {
    pub fn new(bfov: &Bfov, mode_override: Option<RegionMode>) -> Result<Self> {
        let bfov = bfov.validate()?;
        let mode = mode_override.unwrap_or_else(|| RegionMode::for_fov(bfov.theta, bfov.phi));
        if mode == RegionMode::Tangent && (bfov.theta >= PI || bfov.phi >= PI) {
            return Err(Error::Domain(format!(
                "tangent mode cannot cover {:.1}x{:.1} deg",
                bfov.theta.to_degrees(),
                bfov.phi.to_degrees()
            )));
        }
        Ok(Self {
            bfov,
            mode,
            frame_inv: Rotation::frame(bfov.clon, bfov.clat, bfov.gamma).inverse(),
            tan_half_theta: (bfov.theta / 2.0).tan(),
            tan_half_phi: (bfov.phi / 2.0).tan(),
        })
    }

    pub fn mode(&self) -> RegionMode {
        self.mode
    }

    pub fn bfov(&self) -> &Bfov {
        &self.bfov
    }

    /// Whether a sphere direction falls inside the region.
    pub fn contains(&self, dir: &UnitVec) -> bool {
        let p = self.frame_inv.apply(dir);
        match self.mode {
            RegionMode::Tangent => {
                p.z() > 0.0
                    && (p.x() / p.z()).abs() <= self.tan_half_theta
                    && (p.y() / p.z()).abs() <= self.tan_half_phi
            }
            RegionMode::Sphere => {
                let ll = p.to_lonlat();
                ll.lon().abs() <= self.bfov.theta / 2.0 && ll.lat().abs() <= self.bfov.phi / 2.0
            }
        }
    }

    /// Closed-form projection of a direction into continuous local pixel
    /// coordinates of a `wl x hl` patch. `None` when the direction lies
    /// outside the patch parametrization.
    pub fn project_to_local(&self, dir: &UnitVec, wl: u32, hl: u32) -> Option<PixCoord> {
        let p = self.frame_inv.apply(dir);
        let (fx, fy) = match self.mode {
            RegionMode::Tangent => {
                if p.z() <= 0.0 {
                    return None;
                }
                let x = p.x() / p.z();
                let y = p.y() / p.z();
                if x.abs() > self.tan_half_theta || y.abs() > self.tan_half_phi {
                    return None;
                }
                (
                    (x + self.tan_half_theta) / (2.0 * self.tan_half_theta),
                    (y + self.tan_half_phi) / (2.0 * self.tan_half_phi),
                )
            }
            RegionMode::Sphere => {
                let ll = p.to_lonlat();
                if ll.lon().abs() > self.bfov.theta / 2.0 || ll.lat().abs() > self.bfov.phi / 2.0 {
                    return None;
                }
                (
                    (ll.lon() + self.bfov.theta / 2.0) / self.bfov.theta,
                    (self.bfov.phi / 2.0 - ll.lat()) / self.bfov.phi,
                )
            }
        };
        Some(PixCoord::new(
            fx * f64::from(wl - 1) + 0.5,
            fy * f64::from(hl - 1) + 0.5,
        ))
    }

    /// Largest angular distance from the region center to its boundary.
    pub fn radius(&self) -> f64 {
        let corner = match self.mode {
            RegionMode::Tangent => (1.0
                / (1.0 + self.tan_half_theta.powi(2) + self.tan_half_phi.powi(2)).sqrt())
            .clamp(-1.0, 1.0)
            .acos(),
            RegionMode::Sphere => ((self.bfov.theta / 2.0).cos() * (self.bfov.phi / 2.0).cos())
                .clamp(-1.0, 1.0)
                .acos(),
        };
        corner.max(self.bfov.theta / 2.0).max(self.bfov.phi / 2.0).min(PI)
    }

    /// Directions along the region boundary (the outline of `Ω` pushed
    /// through the frame rotation), `samples_per_edge` per side.
    pub fn boundary_dirs(&self, samples_per_edge: usize) -> Vec<UnitVec> {
        let n = samples_per_edge.max(2);
        let frame = self.frame_inv.inverse();
        let mut out = Vec::with_capacity(4 * n);
        let local = |fx: f64, fy: f64| -> UnitVec {
            match self.mode {
                RegionMode::Tangent => UnitVec::new(
                    lerp(-self.tan_half_theta, self.tan_half_theta, fx),
                    lerp(-self.tan_half_phi, self.tan_half_phi, fy),
                    1.0,
                )
                .expect("nonzero"),
                RegionMode::Sphere => LonLat::new(
                    lerp(-self.bfov.theta / 2.0, self.bfov.theta / 2.0, fx),
                    lerp(self.bfov.phi / 2.0, -self.bfov.phi / 2.0, fy),
                )
                .expect("in range")
                .to_vec(),
            }
        };
        for k in 0..n {
            let t = k as f64 / n as f64;
            out.push(local(t, 0.0)); // top edge, left -> right
            out.push(local(1.0, t)); // right edge
            out.push(local(1.0 - t, 1.0)); // bottom edge
            out.push(local(0.0, 1.0 - t)); // left edge
        }
        out.iter().map(|d| frame.apply(d)).collect()
    }
}

/// A dense grid of sphere directions realizing a region on a target ERP
/// frame. Immutable after construction; shareable across threads.
#[derive(Debug, Clone)]
pub struct RegionMap {
    geometry: RegionGeometry,
    dims: ErpDims,
    width: u32,
    height: u32,
    dirs: Vec<UnitVec>,
}

/// Build the region for a BFoV, selecting the generating surface by the
/// 90° gating rule (or the explicit override, used for ablations).
pub fn build_region(f: &Bfov, d: ErpDims, res: &ResolutionPolicy) -> Result<RegionMap> {
    build_region_with_mode(f, d, res, None)
}

pub fn build_region_with_mode(
    f: &Bfov,
    d: ErpDims,
    res: &ResolutionPolicy,
    mode_override: Option<RegionMode>,
) -> Result<RegionMap> {
    let geometry = RegionGeometry::new(f, mode_override)?;
    let f = *geometry.bfov();
    let (wr, hr) = res.size_for(&f, d);
    let local = match geometry.mode() {
        RegionMode::Tangent => tangent_grid(f.theta, f.phi, wr, hr)?,
        RegionMode::Sphere => sphere_grid(f.theta, f.phi, wr, hr)?,
    };
    let frame = Rotation::frame(f.clon, f.clat, f.gamma);
    let dirs: Vec<UnitVec> = local.iter().map(|v| frame.apply(v)).collect();
    Ok(RegionMap {
        geometry,
        dims: d,
        width: wr,
        height: hr,
        dirs,
    })
}

impl RegionMap {
    pub fn bfov(&self) -> &Bfov {
        self.geometry.bfov()
    }

    pub fn mode(&self) -> RegionMode {
        self.geometry.mode()
    }

    pub fn geometry(&self) -> &RegionGeometry {
        &self.geometry
    }

    pub fn dims(&self) -> ErpDims {
        self.dims
    }

    pub fn local_width(&self) -> u32 {
        self.width
    }

    pub fn local_height(&self) -> u32 {
        self.height
    }

    pub fn dir_at(&self, col: u32, row: u32) -> &UnitVec {
        &self.dirs[(row * self.width + col) as usize]
    }

    pub fn dirs(&self) -> &[UnitVec] {
        &self.dirs
    }

    /// Closed-form projection of a direction into this map's local pixel
    /// coordinates.
    pub fn project_to_local(&self, dir: &UnitVec) -> Option<PixCoord> {
        self.geometry.project_to_local(dir, self.width, self.height)
    }

    /// Solid angle of the gridded region, by summing the spherical excess
    /// of the two triangles of every grid cell. For tangent-mode regions
    /// the cell edges are geodesics, making this exact up to rounding.
    pub fn solid_angle(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..(self.height - 1) {
            for j in 0..(self.width - 1) {
                let a = self.dir_at(j, i);
                let b = self.dir_at(j + 1, i);
                let c = self.dir_at(j + 1, i + 1);
                let d = self.dir_at(j, i + 1);
                total += spherical_triangle_area(a, b, c) + spherical_triangle_area(a, c, d);
            }
        }
        total
    }

    /// Back-project local pixel coordinates to the sphere: bilinear
    /// interpolation of the direction grid (in 3D, then renormalized).
    /// Points must lie within `[0, Wl] x [0, Hl]`.
    pub fn local_points_to_global(&self, points: &[PixCoord]) -> Result<Vec<LonLat>> {
        points
            .iter()
            .map(|p| {
                if !(0.0..=f64::from(self.width)).contains(&p.u)
                    || !(0.0..=f64::from(self.height)).contains(&p.v)
                {
                    return Err(Error::Domain(format!(
                        "local point ({}, {}) outside {}x{}",
                        p.u, p.v, self.width, self.height
                    )));
                }
                Ok(self.interpolate_dir(p.u, p.v).to_lonlat())
            })
            .collect()
    }

    fn interpolate_dir(&self, u: f64, v: f64) -> UnitVec {
        let gx = (u - 0.5).clamp(0.0, f64::from(self.width - 1));
        let gy = (v - 0.5).clamp(0.0, f64::from(self.height - 1));
        let x0 = (gx.floor() as u32).min(self.width.saturating_sub(2));
        let y0 = (gy.floor() as u32).min(self.height.saturating_sub(2));
        let fx = gx - f64::from(x0);
        let fy = gy - f64::from(y0);
        let d00 = self.dir_at(x0, y0).as_vector();
        let d10 = self.dir_at(x0 + 1, y0).as_vector();
        let d01 = self.dir_at(x0, y0 + 1).as_vector();
        let d11 = self.dir_at(x0 + 1, y0 + 1).as_vector();
        let v3 = d00 * ((1.0 - fx) * (1.0 - fy))
            + d10 * (fx * (1.0 - fy))
            + d01 * ((1.0 - fx) * fy)
            + d11 * (fx * fy);
        UnitVec::from_vector(v3).expect("grid cell spans far less than a hemisphere")
    }
}

/// Area of the spherical triangle with the given unit-vector vertices.
fn spherical_triangle_area(a: &UnitVec, b: &UnitVec, c: &UnitVec) -> f64 {
    let av = a.as_vector();
    let bv = b.as_vector();
    let cv = c.as_vector();
    let num = av.dot(&bv.cross(cv)).abs();
    let den = 1.0 + av.dot(bv) + bv.dot(cv) + cv.dot(av);
    2.0 * num.atan2(den)
}

/// Remap ERP content into the region's local image. Per output pixel the
/// stored direction is projected onto the source frame and sampled
/// bilinearly, wrapping horizontally across the seam.
pub fn unwarp(frame: &RgbImage, rm: &RegionMap) -> Result<RgbImage> {
    if frame.width() != rm.dims.width() || frame.height() != rm.dims.height() {
        return Err(Error::DimMismatch(format!(
            "frame is {}x{}, region map targets {}x{}",
            frame.width(),
            frame.height(),
            rm.dims.width(),
            rm.dims.height()
        )));
    }
    let wl = rm.width as usize;
    let hl = rm.height as usize;
    let mut buf = vec![0u8; wl * hl * 3];
    buf.par_chunks_mut(wl * 3).enumerate().for_each(|(row, out)| {
        for col in 0..wl {
            let dir = rm.dir_at(col as u32, row as u32);
            let q = sph_to_pix(dir.to_lonlat(), rm.dims);
            let rgb = sample_bilinear_wrapped(frame, q.u, q.v);
            out[col * 3..col * 3 + 3].copy_from_slice(&rgb);
        }
    });
    Ok(RgbImage::from_raw(rm.width, rm.height, buf).expect("sized buffer"))
}

/// Bilinear sample with horizontal wrap and vertical clamp.
pub fn sample_bilinear_wrapped(img: &RgbImage, u: f64, v: f64) -> [u8; 3] {
    let w = img.width() as i64;
    let h = img.height() as i64;
    let x = u - 0.5;
    let y = (v - 0.5).clamp(0.0, (h - 1) as f64);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let xi0 = (x0 as i64).rem_euclid(w) as u32;
    let xi1 = ((x0 as i64) + 1).rem_euclid(w) as u32;
    let yi0 = (y0 as i64).clamp(0, h - 1) as u32;
    let yi1 = ((y0 as i64) + 1).clamp(0, h - 1) as u32;
    let p00 = img.get_pixel(xi0, yi0).0;
    let p10 = img.get_pixel(xi1, yi0).0;
    let p01 = img.get_pixel(xi0, yi1).0;
    let p11 = img.get_pixel(xi1, yi1).0;
    let mut out = [0u8; 3];
    for ch in 0..3 {
        let top = f64::from(p00[ch]) * (1.0 - fx) + f64::from(p10[ch]) * fx;
        let bot = f64::from(p01[ch]) * (1.0 - fx) + f64::from(p11[ch]) * fx;
        out[ch] = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Fit the minimum bounding box of sphere points projected onto the ERP
/// image. Point sets spanning the seam are made contiguous by the circular
/// shift that minimizes the horizontal extent before fitting.
pub fn points_to_min_bbox(points: &[LonLat], d: ErpDims, rotated: bool) -> Result<Bbox> {
    if points.is_empty() {
        return Err(Error::Domain("bounding box of no points".into()));
    }
    let projected: Vec<PixCoord> = points.iter().map(|p| sph_to_pix(*p, d)).collect();
    let us: Vec<f64> = projected.iter().map(|q| q.u).collect();
    let (_, start) = geom::largest_circular_gap(&us, d.w())?;
    let pts: Vec<geom::Pt> = projected
        .iter()
        .map(|q| ((q.u - start).rem_euclid(d.w()), q.v))
        .collect();
    let fit = if rotated {
        geom::min_area_rect(&pts)?
    } else {
        geom::axis_rect(&pts)?
    };
    const MIN_EXTENT: f64 = 1e-9;
    Bbox::new(
        fit.cx + start,
        fit.cy,
        fit.w.max(MIN_EXTENT),
        fit.h.max(MIN_EXTENT),
        fit.gamma,
    )?
    .canonicalize(d)
}

/// Fit the maximum bounding FoV of a set of sphere points.
///
/// The points are rotated so their spherical centroid sits at the origin
/// (and by `-gamma_hint` for the rotated variant); `theta`/`phi` are the
/// longitude/latitude ranges in that frame, and the range midpoint is
/// rotated back to give the center.
pub fn points_to_bfov(points: &[LonLat], rotated: bool, gamma_hint: f64) -> Result<Bfov> {
    if points.is_empty() {
        return Err(Error::Domain("bounding FoV of no points".into()));
    }
    let dirs: Vec<UnitVec> = points.iter().map(LonLat::to_vec).collect();
    // Antipodally balanced clouds (e.g. full-sphere coverage) have no
    // meaningful centroid; any center works for them.
    let center = sphere::centroid(&dirs)
        .unwrap_or_else(|_| UnitVec::new(0.0, 0.0, 1.0).expect("unit"));
    let c_ll = center.to_lonlat();
    let gamma = if rotated { gamma_hint } else { 0.0 };
    let frame = Rotation::frame(c_ll.lon(), c_ll.lat(), gamma);
    let inv = frame.inverse();

    let mut lons = Vec::with_capacity(dirs.len());
    let mut lat_min = f64::INFINITY;
    let mut lat_max = f64::NEG_INFINITY;
    for d in &dirs {
        let ll = inv.apply(d).to_lonlat();
        lons.push(ll.lon());
        lat_min = lat_min.min(ll.lat());
        lat_max = lat_max.max(ll.lat());
    }
    let (gap, arc_start) = geom::largest_circular_gap(&lons, TAU)?;
    const MIN_EXTENT: f64 = 1e-9;
    let theta = (TAU - gap).max(MIN_EXTENT);
    let phi = (lat_max - lat_min).max(MIN_EXTENT);
    let lon_center = sphere::wrap_lon(arc_start + theta / 2.0);
    let lat_center = (lat_min + lat_max) / 2.0;
    let center_dir = frame.apply(&LonLat::new(lon_center, lat_center)?.to_vec());
    let c = center_dir.to_lonlat();
    Bfov::new(c.lon(), c.lat(), theta, phi.min(PI), gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn dims() -> ErpDims {
        ErpDims::new(3840, 1920).unwrap()
    }

    fn bfov_deg(clon: f64, clat: f64, theta: f64, phi: f64, gamma: f64) -> Bfov {
        Bfov::from_degrees(clon, clat, theta, phi, gamma).unwrap()
    }

    /// Closed-form solid angle of the tangent region: 4·asin(sin(θ/2)·sin(φ/2)).
    fn tangent_solid_angle_closed_form(theta: f64, phi: f64) -> f64 {
        4.0 * ((theta / 2.0).sin() * (phi / 2.0).sin()).asin()
    }

    /// Analytic area of the sphere patch: 2θ·sin(φ/2).
    fn sphere_patch_area(theta: f64, phi: f64) -> f64 {
        2.0 * theta * (phi / 2.0).sin()
    }

    #[test]
    fn tangent_grid_center_and_corners() {
        let g = tangent_grid(PI / 2.0, PI / 2.0, 11, 11).unwrap();
        let center = &g[5 * 11 + 5];
        assert_abs_diff_eq!(center.z(), 1.0, epsilon = 1e-12);
        // tan(45 deg) = 1 at the corners
        let corner = &g[0];
        let expect = UnitVec::new(-1.0, -1.0, 1.0).unwrap();
        assert_abs_diff_eq!(corner.x(), expect.x(), epsilon = 1e-12);
        assert_abs_diff_eq!(corner.y(), expect.y(), epsilon = 1e-12);
        assert_abs_diff_eq!(corner.z(), expect.z(), epsilon = 1e-12);
    }

    #[test]
    fn tangent_grid_rejects_half_sphere() {
        assert!(tangent_grid(PI, 1.0, 8, 8).is_err());
        assert!(tangent_grid(1.0, 3.2, 8, 8).is_err());
    }

    #[test]
    fn sphere_grid_formula_and_full_cover() {
        let g = sphere_grid(1.0, 1.0, 9, 9).unwrap();
        let center = &g[4 * 9 + 4];
        assert_abs_diff_eq!(center.z(), 1.0, epsilon = 1e-12);
        // spot-check one node against the parametrization
        let top_left = &g[0];
        let lon: f64 = -0.5;
        let lat: f64 = 0.5;
        assert_abs_diff_eq!(top_left.x(), lat.cos() * lon.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(top_left.y(), -lat.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(top_left.z(), lat.cos() * lon.cos(), epsilon = 1e-12);
    }

    #[test]
    fn solid_angle_tangent_matches_closed_form() {
        let f = bfov_deg(0.0, 0.0, 90.0, 90.0, 0.0);
        let rm = build_region_with_mode(
            &f,
            dims(),
            &ResolutionPolicy::exact(256, 256),
            Some(RegionMode::Tangent),
        )
        .unwrap();
        let measured = rm.solid_angle();
        // 4·asin(sin² 45 deg) = 2π/3
        assert_abs_diff_eq!(
            tangent_solid_angle_closed_form(PI / 2.0, PI / 2.0),
            2.0 * PI / 3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(measured, 2.0 * PI / 3.0, epsilon = 1e-3);
    }

    #[test]
    fn solid_angle_tangent_monte_carlo_cross_check() {
        // Independent estimate: uniform directions, count hits.
        let f = bfov_deg(0.0, 0.0, 90.0, 90.0, 0.0);
        let geo = RegionGeometry::new(&f, Some(RegionMode::Tangent)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let n = 2_000_000;
        let mut hits = 0u64;
        for _ in 0..n {
            let z: f64 = rng.gen_range(-1.0..1.0);
            let t: f64 = rng.gen_range(0.0..TAU);
            let r = (1.0 - z * z).sqrt();
            let d = UnitVec::new(r * t.cos(), r * t.sin(), z).unwrap();
            if geo.contains(&d) {
                hits += 1;
            }
        }
        let estimate = 4.0 * PI * (hits as f64) / (n as f64);
        // 4 sigma of the binomial estimator
        assert_abs_diff_eq!(estimate, 2.0 * PI / 3.0, epsilon = 0.014);
    }

    #[test]
    fn solid_angle_sphere_matches_analytic_integral() {
        let theta = 120.0_f64.to_radians();
        let phi = 120.0_f64.to_radians();
        let f = bfov_deg(0.0, 0.0, 120.0, 120.0, 0.0);
        let rm = build_region(&f, dims(), &ResolutionPolicy::exact(1024, 512)).unwrap();
        assert_eq!(rm.mode(), RegionMode::Sphere);
        let analytic = sphere_patch_area(theta, phi);
        assert_abs_diff_eq!(analytic, 2.0 * PI / 3.0 * 3.0_f64.sqrt(), epsilon = 1e-9);
        assert!((rm.solid_angle() - analytic).abs() < 0.01 * analytic);

        // cross-check by cos-weighted quadrature over the parameter cells
        let (nx, ny) = (1024, 512);
        let mut quad = 0.0;
        for i in 0..ny {
            let lat = -phi / 2.0 + (i as f64 + 0.5) * phi / ny as f64;
            quad += lat.cos() * (phi / ny as f64) * theta / nx as f64 * nx as f64;
        }
        assert!((quad - analytic).abs() < 0.01 * analytic);
    }

    #[test]
    fn full_sphere_patch_area() {
        let f = bfov_deg(0.0, 0.0, 360.0, 180.0, 0.0);
        let rm = build_region(&f, dims(), &ResolutionPolicy::exact(512, 256)).unwrap();
        assert!((rm.solid_angle() - 4.0 * PI).abs() < 0.01 * 4.0 * PI);
    }

    #[test]
    fn mode_gating_rule() {
        assert_eq!(
            RegionMode::for_fov(89.0_f64.to_radians(), 89.0_f64.to_radians()),
            RegionMode::Tangent
        );
        assert_eq!(
            RegionMode::for_fov(91.0_f64.to_radians(), 60.0_f64.to_radians()),
            RegionMode::Sphere
        );
        assert_eq!(
            RegionMode::for_fov(PI / 2.0, 0.1),
            RegionMode::Sphere
        );
        let rm = build_region(&bfov_deg(10.0, 5.0, 89.0, 89.0, 0.0), dims(), &ResolutionPolicy::exact(32, 32)).unwrap();
        assert_eq!(rm.mode(), RegionMode::Tangent);
        let rm = build_region(&bfov_deg(10.0, 5.0, 91.0, 60.0, 0.0), dims(), &ResolutionPolicy::exact(32, 32)).unwrap();
        assert_eq!(rm.mode(), RegionMode::Sphere);
    }

    #[test]
    fn identity_rotation_center_cell() {
        let f = bfov_deg(0.0, 0.0, 20.0, 20.0, 0.0);
        let rm = build_region(&f, dims(), &ResolutionPolicy::exact(33, 33)).unwrap();
        let center = rm.dir_at(16, 16);
        assert_abs_diff_eq!(center.z(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_equivariance_in_longitude() {
        let res = ResolutionPolicy::exact(24, 20);
        let delta = 0.7;
        let a = build_region(&Bfov::new(0.3, 0.4, 1.0, 0.8, 0.2).unwrap(), dims(), &res).unwrap();
        let b = build_region(&Bfov::new(0.3 + delta, 0.4, 1.0, 0.8, 0.2).unwrap(), dims(), &res)
            .unwrap();
        let rot = Rotation::about_y(delta);
        for (da, db) in a.dirs().iter().zip(b.dirs().iter()) {
            let ra = rot.apply(da);
            assert_abs_diff_eq!(ra.x(), db.x(), epsilon = 1e-12);
            assert_abs_diff_eq!(ra.y(), db.y(), epsilon = 1e-12);
            assert_abs_diff_eq!(ra.z(), db.z(), epsilon = 1e-12);
        }
    }

    #[test]
    fn small_fov_tangent_and_sphere_converge() {
        let theta = 1.0_f64.to_radians();
        let t = tangent_grid(theta, theta, 16, 16).unwrap();
        let s = sphere_grid(theta, theta, 16, 16).unwrap();
        let mut max_dev: f64 = 0.0;
        for (a, b) in t.iter().zip(s.iter()) {
            max_dev = max_dev.max(crate::sphere::angular_distance_vec(a, b));
        }
        assert!(max_dev < 1e-3, "max deviation {max_dev} rad");
    }

    #[test]
    fn unwarp_constant_frame() {
        let d = ErpDims::new(256, 128).unwrap();
        let frame = RgbImage::from_pixel(256, 128, image::Rgb([17, 99, 203]));
        let rm = build_region(&bfov_deg(40.0, 10.0, 50.0, 30.0, 15.0), d, &ResolutionPolicy::default()).unwrap();
        let out = unwarp(&frame, &rm).unwrap();
        assert!(out.pixels().all(|p| p.0 == [17, 99, 203]));
    }

    #[test]
    fn unwarp_single_white_pixel_lands_at_center() {
        let d = ErpDims::new(256, 128).unwrap();
        // center chosen so it projects exactly onto the center of pixel
        // (149, 78): u = 149.5, v = 78.5
        let f = bfov_deg(30.234375, -20.390625, 21.0, 21.0, 0.0);
        let mut frame = RgbImage::from_pixel(256, 128, image::Rgb([0, 0, 0]));
        let q = sph_to_pix(f.center(), d);
        assert_abs_diff_eq!(q.u, 149.5, epsilon = 1e-9);
        assert_abs_diff_eq!(q.v, 78.5, epsilon = 1e-9);
        frame.put_pixel(149, 78, image::Rgb([255, 255, 255]));
        let rm = build_region(&f, d, &ResolutionPolicy::exact(21, 21)).unwrap();
        let out = unwarp(&frame, &rm).unwrap();
        let center = out.get_pixel(10, 10).0;
        assert!(center[0] > 200, "center pixel {center:?}");
    }

    #[test]
    fn unwarp_dim_mismatch_rejected() {
        let d = ErpDims::new(256, 128).unwrap();
        let frame = RgbImage::new(128, 64);
        let rm = build_region(&bfov_deg(0.0, 0.0, 30.0, 30.0, 0.0), d, &ResolutionPolicy::default()).unwrap();
        assert!(unwarp(&frame, &rm).is_err());
    }

    #[test]
    fn unwarped_disk_spans_half_the_output() {
        // 10 deg radius disk, 40x40 deg tangent window: forward-project the
        // disk boundary through the same geometry and compare with the
        // rendered footprint.
        let d = ErpDims::new(1024, 512).unwrap();
        let f = bfov_deg(0.0, 0.0, 40.0, 40.0, 0.0);
        let radius = 10.0_f64.to_radians();
        let center = f.center().to_vec();
        let mut frame = RgbImage::from_pixel(1024, 512, image::Rgb([0, 0, 0]));
        for iy in 0..512 {
            for ix in 0..1024 {
                let dir = crate::sphere::pixel_center_dir(ix, iy, d);
                if crate::sphere::angular_distance_vec(&dir, &center) <= radius {
                    frame.put_pixel(ix, iy, image::Rgb([255, 255, 255]));
                }
            }
        }
        let rm = build_region(&f, d, &ResolutionPolicy::exact(101, 101)).unwrap();
        let out = unwarp(&frame, &rm).unwrap();
        let mid_white: Vec<u32> = (0..101)
            .filter(|&x| out.get_pixel(x, 50).0[0] > 127)
            .collect();
        let measured = (mid_white.len() as f64) / 101.0;

        // oracle: project boundary points of the disk into local coords
        let mut min_u = f64::INFINITY;
        let mut max_u = f64::NEG_INFINITY;
        for k in 0..720 {
            let alpha = TAU * (k as f64) / 720.0;
            let dir = UnitVec::new(
                radius.sin() * alpha.cos(),
                radius.sin() * alpha.sin(),
                radius.cos(),
            )
            .unwrap();
            let q = rm.project_to_local(&dir).expect("disk inside window");
            min_u = min_u.min(q.u);
            max_u = max_u.max(q.u);
        }
        let oracle = (max_u - min_u) / 101.0;
        assert!((measured - oracle).abs() < 0.05, "measured {measured} oracle {oracle}");
        assert!(measured > 0.4 && measured < 0.6, "disk spans {measured}");
    }

    #[test]
    fn back_projection_center_and_nodes() {
        let f = bfov_deg(25.0, 40.0, 60.0, 45.0, 10.0);
        let rm = build_region(&f, dims(), &ResolutionPolicy::exact(64, 48)).unwrap();
        let wl = f64::from(rm.local_width());
        let hl = f64::from(rm.local_height());
        let got = rm
            .local_points_to_global(&[PixCoord::new(wl / 2.0, hl / 2.0)])
            .unwrap()[0];
        assert_abs_diff_eq!(got.lon().to_degrees(), 25.0, epsilon = 1e-6);
        assert_abs_diff_eq!(got.lat().to_degrees(), 40.0, epsilon = 1e-6);

        // a grid node comes back exactly as stored
        let node = rm.dir_at(13, 7).to_lonlat();
        let got = rm
            .local_points_to_global(&[PixCoord::new(13.5, 7.5)])
            .unwrap()[0];
        assert_abs_diff_eq!(got.lon(), node.lon(), epsilon = 1e-12);
        assert_abs_diff_eq!(got.lat(), node.lat(), epsilon = 1e-12);
    }

    #[test]
    fn back_projection_midpoint_matches_slerp() {
        // adjacent nodes ~1 degree apart: bilinear + renormalize vs exact
        // spherical interpolation
        let f = bfov_deg(0.0, 0.0, 33.0, 33.0, 0.0);
        let rm = build_region(&f, dims(), &ResolutionPolicy::exact(34, 34)).unwrap();
        let a = rm.dir_at(5, 9);
        let b = rm.dir_at(6, 9);
        let mid = rm
            .local_points_to_global(&[PixCoord::new(6.0, 9.5)])
            .unwrap()[0];
        // slerp(0.5) of unit vectors is the normalized mean
        let slerp = UnitVec::from_vector(a.as_vector() + b.as_vector()).unwrap();
        let dev = crate::sphere::angular_distance(mid, slerp.to_lonlat());
        assert!(dev.to_degrees() < 1e-4, "deviation {} deg", dev.to_degrees());
    }

    #[test]
    fn back_projection_rejects_out_of_bounds() {
        let f = bfov_deg(0.0, 0.0, 30.0, 30.0, 0.0);
        let rm = build_region(&f, dims(), &ResolutionPolicy::exact(32, 32)).unwrap();
        assert!(rm.local_points_to_global(&[PixCoord::new(-0.1, 5.0)]).is_err());
        assert!(rm.local_points_to_global(&[PixCoord::new(33.0, 5.0)]).is_err());
    }

    #[test]
    fn unwarp_roundtrip_recovers_sphere_point() {
        // project a known point into the local frame, lift it back
        let f = bfov_deg(140.0, 35.0, 70.0, 50.0, 20.0);
        let rm = build_region(&f, dims(), &ResolutionPolicy::default()).unwrap();
        let p = LonLat::from_degrees(150.0, 30.0).unwrap();
        let local = rm.project_to_local(&p.to_vec()).expect("inside");
        let back = rm.local_points_to_global(&[local]).unwrap()[0];
        let err = crate::sphere::angular_distance(p, back).to_degrees();
        assert!(err < 0.1, "roundtrip error {err} deg");
    }

    #[test]
    fn min_bbox_plain_rectangle() {
        let d = dims();
        let corners = [
            (1000.0, 900.0),
            (1100.0, 900.0),
            (1100.0, 950.0),
            (1000.0, 950.0),
        ];
        let pts: Vec<LonLat> = corners
            .iter()
            .map(|&(u, v)| crate::sphere::pix_to_sph(PixCoord::new(u, v), d).unwrap())
            .collect();
        let b = points_to_min_bbox(&pts, d, false).unwrap();
        assert_abs_diff_eq!(b.cx, 1050.0, epsilon = 1e-6);
        assert_abs_diff_eq!(b.cy, 925.0, epsilon = 1e-6);
        assert_abs_diff_eq!(b.w, 100.0, epsilon = 1e-6);
        assert_abs_diff_eq!(b.h, 50.0, epsilon = 1e-6);
    }

    #[test]
    fn min_bbox_seam_clusters_match_brute_force() {
        let d = dims();
        let mut pts = Vec::new();
        for u in 3800..=3839 {
            pts.push((f64::from(u), 900.0));
            pts.push((f64::from(u) + 1.0, 950.0));
        }
        for u in 0..=39 {
            pts.push((f64::from(u), 900.0));
            pts.push((f64::from(u) + 1.0, 950.0));
        }
        let lls: Vec<LonLat> = pts
            .iter()
            .map(|&(u, v)| crate::sphere::pix_to_sph(PixCoord::new(u, v), d).unwrap())
            .collect();
        let b = points_to_min_bbox(&lls, d, false).unwrap();

        // brute force: minimum horizontal extent over all integer shifts
        let us: Vec<f64> = pts.iter().map(|&(u, _)| u.rem_euclid(3840.0)).collect();
        let mut best = f64::INFINITY;
        for s in 0..3840 {
            let shifted: Vec<f64> = us.iter().map(|&u| (u + f64::from(s)).rem_euclid(3840.0)).collect();
            let lo = shifted.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = shifted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            best = best.min(hi - lo);
        }
        assert_abs_diff_eq!(best, 80.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b.w, best, epsilon = 1e-6);
        assert_abs_diff_eq!(b.h, 50.0, epsilon = 1e-6);
        // the fitted box crosses the seam
        assert!(b.cx + b.w / 2.0 > d.w() || b.cx - b.w / 2.0 < 0.0);
    }

    #[test]
    fn min_bbox_rotated_square_halves_area() {
        let d = dims();
        // square of side 100 px rotated 45 degrees around (1920, 960)
        let g = 45.0_f64.to_radians();
        let (s, c) = g.sin_cos();
        let mut pts = Vec::new();
        for k in 0..40 {
            let t = k as f64 / 39.0;
            for &(x, y) in &[
                (t * 100.0 - 50.0, -50.0),
                (t * 100.0 - 50.0, 50.0),
                (-50.0, t * 100.0 - 50.0),
                (50.0, t * 100.0 - 50.0),
            ] {
                pts.push(PixCoord::new(1920.0 + c * x - s * y, 960.0 + s * x + c * y));
            }
        }
        let lls: Vec<LonLat> = pts
            .iter()
            .map(|q| crate::sphere::pix_to_sph(*q, d).unwrap())
            .collect();
        let rot = points_to_min_bbox(&lls, d, true).unwrap();
        let axis = points_to_min_bbox(&lls, d, false).unwrap();
        assert_abs_diff_eq!(rot.gamma.abs().to_degrees(), 45.0, epsilon = 0.5);
        let ratio = rot.area() / axis.area();
        assert!((ratio - 0.5).abs() < 0.02, "area ratio {ratio}");
    }

    #[test]
    fn min_bbox_contains_all_projected_points() {
        let d = dims();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let n = rng.gen_range(3..40);
            let lls: Vec<LonLat> = (0..n)
                .map(|_| {
                    LonLat::new(rng.gen_range(-PI..PI), rng.gen_range(-1.2..1.2)).unwrap()
                })
                .collect();
            for rotated in [false, true] {
                let b = points_to_min_bbox(&lls, d, rotated).unwrap();
                let (sg, cg) = b.gamma.sin_cos();
                for p in &lls {
                    let q = sph_to_pix(*p, d);
                    // try all horizontal wraps of the point
                    let inside = [-1.0, 0.0, 1.0].iter().any(|k| {
                        let dx = q.u + k * d.w() - b.cx;
                        let dy = q.v - b.cy;
                        let lx = cg * dx + sg * dy;
                        let ly = -sg * dx + cg * dy;
                        lx.abs() <= b.w / 2.0 + 0.5 && ly.abs() <= b.h / 2.0 + 0.5
                    });
                    assert!(inside, "point escaped fitted box");
                }
            }
        }
    }

    #[test]
    fn bfov_of_disk_boundary() {
        let radius = 10.0_f64.to_radians();
        let boundary = |frame: Rotation| -> Vec<LonLat> {
            (0..720)
                .map(|k| {
                    let alpha = TAU * (k as f64) / 720.0;
                    let d = UnitVec::new(
                        radius.sin() * alpha.cos(),
                        radius.sin() * alpha.sin(),
                        radius.cos(),
                    )
                    .unwrap();
                    frame.apply(&d).to_lonlat()
                })
                .collect()
        };
        let f = points_to_bfov(&boundary(Rotation::identity()), false, 0.0).unwrap();
        assert_abs_diff_eq!(f.theta.to_degrees(), 20.0, epsilon = 1e-6);
        assert_abs_diff_eq!(f.phi.to_degrees(), 20.0, epsilon = 1e-6);
        assert_abs_diff_eq!(f.clon, 0.0, epsilon = 1e-9);

        // moved to lat 80: same extents, recovered center
        let f = points_to_bfov(&boundary(Rotation::frame(0.0, 80.0_f64.to_radians(), 0.0)), false, 0.0)
            .unwrap();
        assert_abs_diff_eq!(f.theta.to_degrees(), 20.0, epsilon = 1e-6);
        assert_abs_diff_eq!(f.phi.to_degrees(), 20.0, epsilon = 1e-6);
        assert_abs_diff_eq!(f.clat.to_degrees(), 80.0, epsilon = 1e-6);
    }

    #[test]
    fn bfov_of_full_sphere_cloud() {
        let mut pts = Vec::new();
        for i in 0..=180 {
            for j in 0..360 {
                pts.push(
                    LonLat::from_degrees(f64::from(j) - 180.0, f64::from(i) - 90.0).unwrap(),
                );
            }
        }
        let f = points_to_bfov(&pts, false, 0.0).unwrap();
        // extents are exact up to the 1 degree sampling pitch
        assert!(f.theta.to_degrees() >= 359.0 - 1e-9);
        assert_abs_diff_eq!(f.phi.to_degrees(), 180.0, epsilon = 1e-9);
    }

    #[test]
    fn region_contains_matches_projection() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(44);
        for _ in 0..20 {
            let f = Bfov::new(
                rng.gen_range(-PI..PI),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.2..5.0),
                rng.gen_range(0.2..2.8),
                rng.gen_range(-1.0..1.0),
            )
            .unwrap();
            let geo = RegionGeometry::new(&f, None).unwrap();
            for _ in 0..200 {
                let z: f64 = rng.gen_range(-1.0..1.0);
                let t: f64 = rng.gen_range(0.0..TAU);
                let r = (1.0 - z * z).sqrt();
                let d = UnitVec::new(r * t.cos(), r * t.sin(), z).unwrap();
                let inside = geo.contains(&d);
                let projected = geo.project_to_local(&d, 128, 128).is_some();
                assert_eq!(inside, projected);
            }
        }
    }

    #[test]
    fn boundary_dirs_lie_on_the_region_edge() {
        // boundary samples of a slightly shrunk region stay strictly inside
        // the full one; samples of a slightly grown region stay outside
        for (theta, phi) in [(120.0, 70.0), (50.0, 40.0)] {
            let geo = RegionGeometry::new(&bfov_deg(40.0, 20.0, theta, phi, 25.0), None).unwrap();
            let inner =
                RegionGeometry::new(&bfov_deg(40.0, 20.0, theta - 0.2, phi - 0.2, 25.0), None)
                    .unwrap();
            let outer =
                RegionGeometry::new(&bfov_deg(40.0, 20.0, theta + 5.0, phi + 5.0, 25.0), None)
                    .unwrap();
            for d in inner.boundary_dirs(32) {
                assert!(geo.contains(&d), "inner boundary sample fell outside");
            }
            let escaped = outer
                .boundary_dirs(32)
                .iter()
                .filter(|d| !geo.contains(d))
                .count();
            assert!(escaped > 100, "grown boundary should mostly be outside");
        }
    }
}
