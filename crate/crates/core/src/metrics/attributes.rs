//! Sequence attribute rules.
//!
//! Ten of the twenty attributes are deterministic functions of the
//! annotation stream and are computed here; the rest (illumination,
//! occlusion, blur, ...) are judgement calls supplied externally and
//! default to off. A computed flag is set for the sequence as soon as its
//! condition holds on any frame; per-frame traces are kept for inspection.

use std::collections::BTreeMap;

use crate::annotations::{Bbox, Bfov, FrameAnnotation};
use crate::error::{Error, Result};
use crate::sphere::{angular_distance, ErpDims};

/// All attribute names, in their conventional order.
pub const ATTRIBUTE_NAMES: [&str; 20] = [
    "IV", "BC", "DEF", "MB", "CM", "ROT", "POC", "FOC", "ARC", "SV", "FM", "LR", "HR", "SA",
    "CB", "FMS", "LFoV", "LV", "HL", "LD",
];

/// The subset derivable from annotations alone.
pub const COMPUTED_ATTRIBUTES: [&str; 10] =
    ["ARC", "SV", "FM", "LR", "HR", "CB", "FMS", "LFoV", "LV", "HL"];

/// Per-sequence attribute flags, one per name in [`ATTRIBUTE_NAMES`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttributeSet {
    pub flags: BTreeMap<String, bool>,
}

impl AttributeSet {
    pub fn get(&self, name: &str) -> bool {
        self.flags.get(name).copied().unwrap_or(false)
    }
}

/// Per-frame condition traces for the computed attributes.
#[derive(Debug, Clone, Default)]
pub struct AttributeTrace {
    pub per_frame: BTreeMap<String, Vec<bool>>,
}

fn need_bbox(ann: &FrameAnnotation, rule: &str) -> Result<Bbox> {
    ann.bbox.ok_or_else(|| {
        Error::Validation(format!(
            "attribute rule {rule} needs an axis-aligned BBox on frame {}",
            ann.frame
        ))
    })
}

fn need_bfov(ann: &FrameAnnotation, rule: &str) -> Result<Bfov> {
    ann.bfov.or(ann.rbfov).ok_or_else(|| {
        Error::Validation(format!(
            "attribute rule {rule} needs a BFoV on frame {}",
            ann.frame
        ))
    })
}

/// Shortest horizontal-wrap-aware center distance between two boxes, px.
fn wrapped_center_distance(a: &Bbox, b: &Bbox, d: ErpDims) -> f64 {
    let mut best = f64::INFINITY;
    for dx in [0.0, -d.w(), d.w()] {
        best = best.min((a.cx + dx - b.cx).hypot(a.cy - b.cy));
    }
    best
}

/// Evaluate the computed attribute rules over a dense annotation stream.
/// Manually judged attributes come back `false`; flip them in the returned
/// set if external judgements exist.
pub fn compute_attributes(
    stream: &[FrameAnnotation],
    dims: ErpDims,
) -> Result<(AttributeSet, AttributeTrace)> {
    if stream.is_empty() {
        return Err(Error::Validation("attribute rules need at least one frame".into()));
    }
    let n = stream.len();
    let mut trace: BTreeMap<String, Vec<bool>> = COMPUTED_ATTRIBUTES
        .iter()
        .map(|&name| (name.to_string(), vec![false; n]))
        .collect();

    let first_box = need_bbox(&stream[0], "ARC/SV")?;
    let first_aspect = first_box.w / first_box.h;
    let first_area = first_box.area();

    let mut lat_min = f64::INFINITY;
    let mut lat_max = f64::NEG_INFINITY;

    for (k, ann) in stream.iter().enumerate() {
        let b = need_bbox(ann, "ARC/SV/FM/LR/HR/CB")?.canonicalize(dims)?;
        let f = need_bfov(ann, "FMS/LFoV/LV/HL")?;

        let aspect_ratio = (first_aspect / (b.w / b.h)).abs();
        trace.get_mut("ARC").unwrap()[k] = !(0.5..=2.0).contains(&aspect_ratio);
        let area_ratio = first_area / b.area();
        trace.get_mut("SV").unwrap()[k] = !(0.5..=2.0).contains(&area_ratio);
        trace.get_mut("LR").unwrap()[k] = b.area() < 1000.0;
        trace.get_mut("HR").unwrap()[k] = b.area() > 500.0 * 500.0;
        trace.get_mut("CB").unwrap()[k] = b.cx - b.w / 2.0 < 0.0 || b.cx + b.w / 2.0 > dims.w();
        trace.get_mut("LFoV").unwrap()[k] =
            f.theta.to_degrees() > 90.0 || f.phi.to_degrees() > 90.0;
        trace.get_mut("HL").unwrap()[k] = f.clat.to_degrees().abs() > 60.0;
        lat_min = lat_min.min(f.clat);
        lat_max = lat_max.max(f.clat);

        if k > 0 {
            let pb = need_bbox(&stream[k - 1], "FM")?.canonicalize(dims)?;
            let motion = wrapped_center_distance(&b, &pb, dims);
            trace.get_mut("FM").unwrap()[k] = motion > (pb.w * pb.h).sqrt();

            let pf = need_bfov(&stream[k - 1], "FMS")?;
            let motion_angle = angular_distance(f.center(), pf.center());
            trace.get_mut("FMS").unwrap()[k] = motion_angle > pf.theta.max(pf.phi);
        }
    }

    // LV is a sequence-level range condition; record it on every frame for
    // uniform trace shape.
    let lv = (lat_max - lat_min).to_degrees() > 50.0;
    trace.get_mut("LV").unwrap().iter_mut().for_each(|v| *v = lv);

    let mut flags: BTreeMap<String, bool> = ATTRIBUTE_NAMES
        .iter()
        .map(|&name| (name.to_string(), false))
        .collect();
    for (name, frames) in &trace {
        flags.insert(name.clone(), frames.iter().any(|&b| b));
    }
    Ok((
        AttributeSet { flags },
        AttributeTrace { per_frame: trace },
    ))
}
