//! Evaluation measures for omnidirectional tracking.
//!
//! Box overlap and center distance get *dual* variants that also try the
//! ground truth shifted a full image width left and right, so a prediction
//! on the far side of the seam still scores. Angular measures (angle
//! precision, spherical IoU) live on the sphere and need no wrap handling.
//! [`ope_evaluate`] turns a frame-paired sequence into threshold curves and
//! the headline scalars of one-pass evaluation.

mod attributes;

pub use attributes::{
    compute_attributes, AttributeSet, AttributeTrace, ATTRIBUTE_NAMES, COMPUTED_ATTRIBUTES,
};

use rayon::prelude::*;

use crate::annotations::{Bbox, Bfov, FrameAnnotation};
use crate::error::{Error, Result};
use crate::geom;
use crate::region::RegionGeometry;
use crate::sphere::{angular_distance, ErpDims, LonLat, Rotation, UnitVec, PI};

/// Ground truth and tracker output for one frame.
#[derive(Debug, Clone)]
pub struct FramePair {
    pub gt: FrameAnnotation,
    pub tr: FrameAnnotation,
    pub dims: ErpDims,
}

/// Plain IoU of two (possibly rotated) boxes. No wrap handling here; the
/// dual variant owns that.
pub fn iou_bbox(a: &Bbox, b: &Bbox) -> f64 {
    let inter = if a.gamma == 0.0 && b.gamma == 0.0 {
        let ix = (a.cx + a.w / 2.0).min(b.cx + b.w / 2.0) - (a.cx - a.w / 2.0).max(b.cx - b.w / 2.0);
        let iy = (a.cy + a.h / 2.0).min(b.cy + b.h / 2.0) - (a.cy - a.h / 2.0).max(b.cy - b.h / 2.0);
        ix.max(0.0) * iy.max(0.0)
    } else {
        let pa: Vec<geom::Pt> = a.corners().to_vec();
        let pb: Vec<geom::Pt> = b.corners().to_vec();
        geom::polygon_area(&geom::convex_intersection(&pa, &pb))
    };
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

fn shifted(b: &Bbox, dx: f64) -> Bbox {
    Bbox {
        cx: b.cx + dx,
        ..*b
    }
}

/// Dual success: best IoU over the ground truth and its ±W shifts.
/// Ties resolve toward the unshifted term.
pub fn success_dual(gt: &Bbox, tr: &Bbox, d: ErpDims) -> f64 {
    let mut best = iou_bbox(gt, tr);
    for dx in [-d.w(), d.w()] {
        let s = iou_bbox(&shifted(gt, dx), tr);
        if s > best {
            best = s;
        }
    }
    best
}

/// Dual precision: smallest center distance over the ground truth and its
/// ±W shifts, in pixels.
pub fn precision_dual(gt: &Bbox, tr: &Bbox, d: ErpDims) -> f64 {
    let mut best = (gt.cx - tr.cx).hypot(gt.cy - tr.cy);
    for dx in [-d.w(), d.w()] {
        let p = (gt.cx + dx - tr.cx).hypot(gt.cy - tr.cy);
        if p < best {
            best = p;
        }
    }
    best
}

/// Dual normalized precision: the center displacement is scaled
/// componentwise by the ground-truth box size before taking the norm.
pub fn normalized_precision_dual(gt: &Bbox, tr: &Bbox, d: ErpDims) -> Result<f64> {
    if gt.w <= 0.0 || gt.h <= 0.0 {
        return Err(Error::Validation(
            "normalized precision needs a nonzero ground-truth box".into(),
        ));
    }
    // strict comparison keeps ties on the unshifted term, which comes first
    let mut best = f64::INFINITY;
    for dx in [0.0, -d.w(), d.w()] {
        let p = ((gt.cx + dx - tr.cx) / gt.w).hypot((gt.cy - tr.cy) / gt.h);
        if p < best {
            best = p;
        }
    }
    Ok(best)
}

/// Great-circle angle between two centers, in degrees.
pub fn angle_precision(gt_center: LonLat, tr_center: LonLat) -> f64 {
    angular_distance(gt_center, tr_center).to_degrees()
}

/// Sampling density for [`sphere_iou`].
#[derive(Debug, Clone, Copy)]
pub struct SphereIouGrid {
    pub width: u32,
    pub height: u32,
}

impl Default for SphereIouGrid {
    fn default() -> Self {
        Self {
            width: 1024,
            height: 512,
        }
    }
}

/// Spherical IoU of two bounding FoVs: both regions are rasterized onto a
/// lat-lon sample grid and the intersection/union measured as
/// cos(lat)-weighted sums.
///
/// The grid is aligned to the pair (centered between the two regions and
/// sized to their joint extent, capped at the full sphere), which keeps the
/// measurement invariant under a common horizontal shift of both regions
/// and keeps resolution proportional to the regions themselves. The error
/// budget is O(1/height) of the sampled window.
pub fn sphere_iou(a: &Bfov, b: &Bfov, grid: SphereIouGrid) -> Result<f64> {
    let geo_a = RegionGeometry::new(a, None)?;
    let geo_b = RegionGeometry::new(b, None)?;
    let ca = a.center().to_vec();
    let cb = b.center().to_vec();
    // window center: normalized midpoint; antipodal centers fall back to a
    let mid = UnitVec::from_vector(ca.as_vector() + cb.as_vector()).unwrap_or(ca);
    let mid_ll = mid.to_lonlat();
    let frame = Rotation::about_y(mid_ll.lon()) * Rotation::about_x(mid_ll.lat());

    let reach = |geo: &RegionGeometry, c: &UnitVec| -> f64 {
        crate::sphere::angular_distance_vec(c, &mid) + geo.radius()
    };
    let base = reach(&geo_a, &ca).max(reach(&geo_b, &cb));
    let half_lon = (base * 1.05 + 0.01).min(PI);
    let half_lat = (base * 1.05 + 0.01).min(PI / 2.0);

    let (w, h) = (grid.width.max(2), grid.height.max(2));
    let sums: Vec<(f64, f64)> = (0..h)
        .into_par_iter()
        .map(|i| {
            let lat = -half_lat + (f64::from(i) + 0.5) * 2.0 * half_lat / f64::from(h);
            let weight = lat.cos();
            let mut inter = 0.0;
            let mut union = 0.0;
            for j in 0..w {
                let lon = -half_lon + (f64::from(j) + 0.5) * 2.0 * half_lon / f64::from(w);
                let dir = frame.apply(&LonLat::new(lon, lat).expect("in range").to_vec());
                let in_a = geo_a.contains(&dir);
                let in_b = geo_b.contains(&dir);
                if in_a && in_b {
                    inter += weight;
                }
                if in_a || in_b {
                    union += weight;
                }
            }
            (inter, union)
        })
        .collect();
    let (inter, union) = sums
        .iter()
        .fold((0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1));
    if union <= 0.0 {
        return Ok(0.0);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

/// Per-frame measured values; `None` where the needed representation was
/// absent on either side.
#[derive(Debug, Clone, Default)]
pub struct FrameMetrics {
    pub frame: usize,
    pub s_dual: Option<f64>,
    pub p_dual: Option<f64>,
    pub p_norm_dual: Option<f64>,
    pub p_angle_deg: Option<f64>,
    pub s_sphere: Option<f64>,
}

/// Sequence-level curves and scalars.
#[derive(Debug, Clone, Default)]
pub struct MetricReport {
    pub frames_scored: usize,
    pub per_frame: Vec<FrameMetrics>,
    /// Success rate at 101 overlap thresholds in [0, 1].
    pub success_dual_curve: Vec<f64>,
    /// Precision rate at integer pixel thresholds 0..=50.
    pub precision_dual_curve: Vec<f64>,
    /// Normalized precision rate at 51 thresholds in [0, 0.5].
    pub norm_precision_dual_curve: Vec<f64>,
    /// Angle precision rate at 101 thresholds in [0°, 10°].
    pub angle_curve: Vec<f64>,
    /// Spherical success rate at 101 overlap thresholds in [0, 1].
    pub sphere_success_curve: Vec<f64>,
    pub success_dual_auc: Option<f64>,
    pub precision_dual_at_20px: Option<f64>,
    pub norm_precision_dual_auc: Option<f64>,
    pub angle_precision_at_3deg: Option<f64>,
    pub sphere_success_auc: Option<f64>,
}

fn success_curve(values: &[f64], thresholds: usize, max_t: f64) -> Vec<f64> {
    (0..=thresholds)
        .map(|k| {
            let t = max_t * k as f64 / thresholds as f64;
            values.iter().filter(|&&v| v >= t).count() as f64 / values.len() as f64
        })
        .collect()
}

fn precision_curve(values: &[f64], thresholds: usize, max_t: f64) -> Vec<f64> {
    (0..=thresholds)
        .map(|k| {
            let t = max_t * k as f64 / thresholds as f64;
            values.iter().filter(|&&v| v <= t).count() as f64 / values.len() as f64
        })
        .collect()
}

fn curve_mean(curve: &[f64]) -> f64 {
    curve.iter().sum::<f64>() / curve.len() as f64
}

/// Score a sequence under the one-pass evaluation protocol: the first frame
/// initializes the tracker and is excluded; every later frame with ground
/// truth is scored. Frames where the tracker produced nothing count as
/// complete misses.
pub fn ope_evaluate(pairs: &[FramePair]) -> Result<MetricReport> {
    ope_evaluate_with(pairs, SphereIouGrid::default())
}

pub fn ope_evaluate_with(pairs: &[FramePair], grid: SphereIouGrid) -> Result<MetricReport> {
    if pairs.len() < 2 {
        return Err(Error::Validation(format!(
            "one-pass evaluation needs at least 2 frames, got {}",
            pairs.len()
        )));
    }
    let scored: Vec<Option<FrameMetrics>> = pairs[1..]
        .par_iter()
        .enumerate()
        .map(|(k, pair)| score_frame(k + 1, pair, grid))
        .collect::<Result<Vec<_>>>()?;
    let scored: Vec<FrameMetrics> = scored.into_iter().flatten().collect();

    let collect = |f: fn(&FrameMetrics) -> Option<f64>| -> Vec<f64> {
        scored.iter().filter_map(f).collect()
    };
    let s_dual = collect(|m| m.s_dual);
    let p_dual = collect(|m| m.p_dual);
    let p_norm = collect(|m| m.p_norm_dual);
    let angle = collect(|m| m.p_angle_deg);
    let s_sphere = collect(|m| m.s_sphere);

    let mut report = MetricReport {
        frames_scored: scored.len(),
        per_frame: scored,
        ..Default::default()
    };
    if !s_dual.is_empty() {
        report.success_dual_curve = success_curve(&s_dual, 100, 1.0);
        report.success_dual_auc = Some(curve_mean(&report.success_dual_curve));
    }
    if !p_dual.is_empty() {
        report.precision_dual_curve = precision_curve(&p_dual, 50, 50.0);
        report.precision_dual_at_20px =
            Some(p_dual.iter().filter(|&&v| v <= 20.0).count() as f64 / p_dual.len() as f64);
    }
    if !p_norm.is_empty() {
        report.norm_precision_dual_curve = precision_curve(&p_norm, 50, 0.5);
        report.norm_precision_dual_auc = Some(curve_mean(&report.norm_precision_dual_curve));
    }
    if !angle.is_empty() {
        report.angle_curve = precision_curve(&angle, 100, 10.0);
        report.angle_precision_at_3deg =
            Some(angle.iter().filter(|&&v| v <= 3.0).count() as f64 / angle.len() as f64);
    }
    if !s_sphere.is_empty() {
        report.sphere_success_curve = success_curve(&s_sphere, 100, 1.0);
        report.sphere_success_auc = Some(curve_mean(&report.sphere_success_curve));
    }
    Ok(report)
}

/// `None` when the frame has no ground truth at all (excluded from
/// scoring); individual measures are `None` when their representation is
/// missing on the ground-truth side.
fn score_frame(
    frame: usize,
    pair: &FramePair,
    grid: SphereIouGrid,
) -> Result<Option<FrameMetrics>> {
    let d = pair.dims;
    let gt_box = pair.gt.bbox.or(pair.gt.rbbox);
    let gt_bfov = pair.gt.bfov.or(pair.gt.rbfov);
    if gt_box.is_none() && gt_bfov.is_none() {
        return Ok(None);
    }
    let tr_box = pair.tr.bbox.or(pair.tr.rbbox);
    let tr_bfov = pair.tr.bfov.or(pair.tr.rbfov);

    let mut m = FrameMetrics {
        frame,
        ..Default::default()
    };
    if let Some(gt) = gt_box {
        let gt = gt.canonicalize(d)?;
        match tr_box.map(|b| b.canonicalize(d)).transpose()? {
            Some(tr) => {
                m.s_dual = Some(success_dual(&gt, &tr, d));
                m.p_dual = Some(precision_dual(&gt, &tr, d));
                m.p_norm_dual = Some(normalized_precision_dual(&gt, &tr, d)?);
            }
            None => {
                m.s_dual = Some(0.0);
                m.p_dual = Some(f64::INFINITY);
                m.p_norm_dual = Some(f64::INFINITY);
            }
        }
    }
    if let Some(gt) = gt_bfov {
        m.s_sphere = Some(match tr_bfov {
            Some(tr) => sphere_iou(&gt, &tr, grid)?,
            None => 0.0,
        });
    }
    if let Some(gt_c) = pair.gt.sphere_center(d) {
        m.p_angle_deg = Some(match pair.tr.sphere_center(d) {
            Some(tr_c) => angle_precision(gt_c, tr_c),
            None => 180.0,
        });
    }
    Ok(Some(m))
}
