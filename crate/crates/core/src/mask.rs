//! Conversion of per-pixel target masks into unbiased (r)BBox and (r)BFoV
//! ground truth.
//!
//! Both converters follow the same recipe: recenter the mask so its
//! dominant segment sits where ERP distortion is smallest, fit the minimal
//! bounding region there, then map the fit back to the original frame.
//! Boxes need a single horizontal recentering; bounding FoVs recenter twice
//! (the raster centroid moves slightly under the first remap) and measure
//! extents on the sphere.

use rayon::prelude::*;

pub use crate::geom::{min_area_rect, RectFit};

use crate::annotations::{Bbox, Bfov, Mask};
use crate::error::Result;
use crate::geom;
use crate::sphere::{
    pix_to_sph, pixel_center_dir, sph_to_pix, ErpDims, LonLat, PixCoord, Rotation, UnitVec, PI,
    TAU,
};

/// Largest 4-connected segment of the mask, with horizontal wrap: pixels in
/// column 0 neighbor column W-1, so a target split by the seam counts as
/// one segment.
#[derive(Debug)]
pub struct MaskGeometry {
    /// Pixels of the largest segment.
    pub largest: Vec<(u32, u32)>,
    /// Spherical centroid of the largest segment.
    pub centroid: LonLat,
    pub segment_count: usize,
}

impl MaskGeometry {
    pub fn analyze(m: &Mask) -> Result<Option<MaskGeometry>> {
        let d = m.dims();
        let (w, h) = (d.width(), d.height());
        let mut label = vec![0u32; (w * h) as usize];
        let mut segments: Vec<Vec<(u32, u32)>> = Vec::new();
        let mut stack = Vec::new();
        for sy in 0..h {
            for sx in 0..w {
                if !m.get(sx, sy) || label[(sy * w + sx) as usize] != 0 {
                    continue;
                }
                let id = segments.len() as u32 + 1;
                let mut pixels = Vec::new();
                stack.push((sx, sy));
                label[(sy * w + sx) as usize] = id;
                while let Some((x, y)) = stack.pop() {
                    pixels.push((x, y));
                    let left = if x == 0 { w - 1 } else { x - 1 };
                    let right = if x + 1 == w { 0 } else { x + 1 };
                    let mut visit = |nx: u32, ny: u32| {
                        if m.get(nx, ny) && label[(ny * w + nx) as usize] == 0 {
                            label[(ny * w + nx) as usize] = id;
                            stack.push((nx, ny));
                        }
                    };
                    visit(left, y);
                    visit(right, y);
                    if y > 0 {
                        visit(x, y - 1);
                    }
                    if y + 1 < h {
                        visit(x, y + 1);
                    }
                }
                segments.push(pixels);
            }
        }
        if segments.is_empty() {
            return Ok(None);
        }
        segments.sort_by_key(|s| std::cmp::Reverse(s.len()));
        let largest = segments.remove(0);
        let centroid = pixel_set_centroid(largest.iter().copied(), d)?;
        Ok(Some(MaskGeometry {
            largest,
            centroid,
            segment_count: segments.len() + 1,
        }))
    }
}

fn pixel_set_centroid(pixels: impl Iterator<Item = (u32, u32)>, d: ErpDims) -> Result<LonLat> {
    let dirs: Vec<UnitVec> = pixels.map(|(x, y)| pixel_center_dir(x, y, d)).collect();
    Ok(crate::sphere::centroid(&dirs)?.to_lonlat())
}

/// Remap the mask under a sphere rotation: output pixel `p` is set iff the
/// input is set at the projection of `r⁻¹ · dir(p)` (nearest neighbor, so
/// the mask stays binary).
pub fn rotate_mask(m: &Mask, r: &Rotation) -> Mask {
    let d = m.dims();
    let (w, h) = (d.width(), d.height());
    let inv = r.inverse();
    let mut out = Mask::empty(d);
    let rows: Vec<Vec<bool>> = (0..h)
        .into_par_iter()
        .map(|iy| {
            let mut row = vec![false; w as usize];
            for ix in 0..w {
                let src = inv.apply(&pixel_center_dir(ix, iy, d));
                let q = sph_to_pix(src.to_lonlat(), d);
                let sx = (q.u.floor() as i64).rem_euclid(i64::from(w)) as u32;
                let sy = (q.v.floor() as i64).clamp(0, i64::from(h) - 1) as u32;
                row[ix as usize] = m.get(sx, sy);
            }
            row
        })
        .collect();
    for (iy, row) in rows.into_iter().enumerate() {
        for (ix, on) in row.into_iter().enumerate() {
            if on {
                out.set(ix as u32, iy as u32, true);
            }
        }
    }
    out
}

/// Extreme pixel-corner points of the mask, per row: enough to carry the
/// convex hull of the covered area.
fn row_extreme_corners(m: &Mask) -> Vec<geom::Pt> {
    let d = m.dims();
    let mut pts = Vec::new();
    for iy in 0..d.height() {
        let mut min_x: Option<u32> = None;
        let mut max_x: Option<u32> = None;
        for ix in 0..d.width() {
            if m.get(ix, iy) {
                if min_x.is_none() {
                    min_x = Some(ix);
                }
                max_x = Some(ix);
            }
        }
        if let (Some(lo), Some(hi)) = (min_x, max_x) {
            let y0 = f64::from(iy);
            let y1 = f64::from(iy + 1);
            pts.push((f64::from(lo), y0));
            pts.push((f64::from(lo), y1));
            pts.push((f64::from(hi + 1), y0));
            pts.push((f64::from(hi + 1), y1));
        }
    }
    pts
}

/// Occupied pixel index ranges of a mask, as inclusive `(min_x, max_x,
/// min_y, max_y)` bounds.
fn occupied_extents(m: &Mask) -> Option<(u32, u32, u32, u32)> {
    let mut min_x = u32::MAX;
    let mut max_x = 0;
    let mut min_y = u32::MAX;
    let mut max_y = 0;
    let mut any = false;
    for (x, y) in m.set_pixels() {
        any = true;
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    any.then_some((min_x, max_x, min_y, max_y))
}

/// Mask → (rotated) bounding box.
///
/// Empty masks convert to `None`. The mask is first rotated about the
/// vertical axis so the largest segment's centroid sits at the horizontal
/// image center (where a box cannot straddle the seam), fitted there, then
/// the center is shifted back — unless the mask spans the full width, in
/// which case recentering is meaningless and the box centers on itself.
pub fn mask_to_bbox(m: &Mask, need_rotation: bool) -> Result<Option<Bbox>> {
    let d = m.dims();
    let Some(geo) = MaskGeometry::analyze(m)? else {
        return Ok(None);
    };
    let theta1 = geo.centroid.lon();
    let x1 = sph_to_pix(geo.centroid, d).u;
    let delta_x = x1 - d.w() / 2.0;

    let recentered = rotate_mask(m, &Rotation::about_y(-theta1));
    let corners = row_extreme_corners(&recentered);
    let fit = if need_rotation {
        geom::min_area_rect(&corners)?
    } else {
        geom::axis_rect(&corners)?
    };
    let (min_x, max_x, _, _) =
        occupied_extents(&recentered).expect("recentered mask stays nonempty");
    let axis_w = f64::from(max_x - min_x + 1);

    let cx = if axis_w < d.w() - 1.0 {
        fit.cx + delta_x
    } else {
        fit.w / 2.0
    };
    Ok(Some(
        Bbox::new(cx, fit.cy, fit.w.max(1e-9), fit.h.max(1e-9), fit.gamma)?.canonicalize(d)?,
    ))
}

/// Mask → (rotated) bounding field-of-view.
///
/// Empty masks convert to `None`. The mask is rotated to the frame center
/// twice (the raster centroid shifts slightly under the first remap), the
/// in-plane rotation is estimated there by rotating calipers when
/// requested, and the FoV extents are read off as longitude/latitude
/// ranges after removing center and rotation.
pub fn mask_to_bfov(m: &Mask, need_rotation: bool) -> Result<Option<Bfov>> {
    let d = m.dims();
    let Some(geo) = MaskGeometry::analyze(m)? else {
        return Ok(None);
    };

    // Stage 1: recenter on the largest segment's centroid.
    let r1 = Rotation::about_y(geo.centroid.lon()) * Rotation::about_x(geo.centroid.lat());
    let m_r1 = rotate_mask(m, &r1.inverse());

    // Stage 2: recompute the centroid after the remap and recenter again.
    let c1 = pixel_set_centroid(m_r1.set_pixels(), d)?;
    let c2 = r1.apply(&c1.to_vec()).to_lonlat();
    let r2 = Rotation::about_y(c2.lon()) * Rotation::about_x(c2.lat());
    let m_r2 = rotate_mask(m, &r2.inverse());

    // In-plane rotation from the minimum-area rectangle of the centered
    // mask; pick the angle that puts the longer side horizontal.
    let fit = geom::min_area_rect(&row_extreme_corners(&m_r2))?;
    let gamma = if need_rotation {
        let mut g = if fit.w >= fit.h {
            fit.gamma
        } else {
            fit.gamma - PI / 2.0
        };
        if g <= -PI / 2.0 {
            g += PI;
        }
        g
    } else {
        0.0
    };

    // The rectangle center, taken back to the original frame, is the final
    // recentering target.
    let c_r2 = pix_to_sph(PixCoord::new(fit.cx, fit.cy.clamp(0.0, d.h())), d)?;
    let c3 = r2.apply(&c_r2.to_vec()).to_lonlat();
    let r3 = Rotation::frame(c3.lon(), c3.lat(), gamma);
    let m_r3 = rotate_mask(m, &r3.inverse());

    // FoV extents as pixel-extent longitude/latitude ranges.
    let (lon_center, theta) = column_arc(&m_r3);
    let (_, _, min_y, max_y) =
        occupied_extents(&m_r3).expect("recentered mask stays nonempty");
    let lat_max = (0.5 - f64::from(min_y) / d.h()) * PI;
    let lat_min = (0.5 - f64::from(max_y + 1) / d.h()) * PI;
    let phi = (lat_max - lat_min).max(1e-9);
    let lat_center = (lat_max + lat_min) / 2.0;

    let center = r3
        .apply(&LonLat::new(lon_center, lat_center)?.to_vec())
        .to_lonlat();
    Ok(Some(Bfov::new(
        center.lon(),
        center.lat(),
        theta,
        phi.min(PI),
        gamma,
    )?))
}

/// Longitude arc covered by the mask's occupied columns (pixel extents):
/// returns `(arc center, arc length)` in radians. Column coverage is
/// treated circularly, so a mask hugging the seam still reads as one arc.
fn column_arc(m: &Mask) -> (f64, f64) {
    let d = m.dims();
    let w = d.width();
    let mut occupied = vec![false; w as usize];
    for (x, _) in m.set_pixels() {
        occupied[x as usize] = true;
    }
    let occupied_count = occupied.iter().filter(|&&b| b).count() as u32;
    if occupied_count == w {
        return (0.0, TAU);
    }
    // longest circular run of empty columns; scan twice around for wrap
    let mut best_len = 0u32;
    let mut best_end = 0u32; // first occupied column after the run
    let mut run = 0u32;
    for k in 0..(2 * w) {
        let idx = (k % w) as usize;
        if !occupied[idx] {
            run += 1;
            run = run.min(w);
        } else {
            if run >= best_len {
                best_len = run;
                best_end = k % w;
            }
            run = 0;
        }
    }
    let covered = w - best_len.min(w);
    let theta = f64::from(covered) / d.w() * TAU;
    let start_lon = (f64::from(best_end) / d.w() - 0.5) * TAU;
    let lon_center = crate::sphere::wrap_lon(start_lon + theta / 2.0);
    (lon_center, theta.max(1e-9))
}
