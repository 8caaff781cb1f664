//! Boundary overlays for visual inspection of annotations and results.

use image::{Rgb, RgbImage};

use crate::annotations::{Bbox, Bfov};
use crate::error::Result;
use crate::region::{RegionGeometry, RegionMode};
use crate::sphere::{sph_to_pix, ErpDims};

fn plot(img: &mut RgbImage, u: f64, v: f64, color: Rgb<u8>) {
    let w = img.width() as i64;
    let h = img.height() as i64;
    let x = (u.floor() as i64).rem_euclid(w);
    let y = v.floor() as i64;
    // 2x2 block so boundaries stay visible at full resolution
    for dy in 0..2 {
        for dx in 0..2 {
            let yy = y + dy;
            if yy < 0 || yy >= h {
                continue;
            }
            let xx = (x + dx).rem_euclid(w);
            img.put_pixel(xx as u32, yy as u32, color);
        }
    }
}

/// Draw a (rotated) box outline; edges are sampled densely and wrapped
/// horizontally, so seam-crossing boxes split into two visual parts.
pub fn draw_bbox(img: &mut RgbImage, b: &Bbox, color: Rgb<u8>) {
    let corners = b.corners();
    for i in 0..4 {
        let (x0, y0) = corners[i];
        let (x1, y1) = corners[(i + 1) % 4];
        let steps = ((x1 - x0).hypot(y1 - y0).ceil() as usize).max(2);
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            plot(img, x0 + t * (x1 - x0), y0 + t * (y1 - y0), color);
        }
    }
}

/// Draw the ERP boundary of a bounding FoV region.
pub fn draw_bfov(
    img: &mut RgbImage,
    f: &Bfov,
    d: ErpDims,
    mode_override: Option<RegionMode>,
    color: Rgb<u8>,
) -> Result<()> {
    let geo = RegionGeometry::new(f, mode_override)?;
    for dir in geo.boundary_dirs(512) {
        let q = sph_to_pix(dir.to_lonlat(), d);
        plot(img, q.u, q.v, color);
    }
    Ok(())
}
