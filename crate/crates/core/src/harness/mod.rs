//! The tracker-agnostic omnidirectional tracking loop.
//!
//! Per frame: enlarge the previous estimate into a search bounding FoV,
//! unwarp that region from the ERP frame, hand the local image to the
//! attached tracker, then lift its local box prediction back onto the
//! sphere and derive all four global representations from the boundary
//! samples. Adapter failures mark the step and carry the previous estimate
//! (short-term tracker semantics); the loop itself never re-initializes.

pub mod adapter;

pub use adapter::{Adapter, LocalTrack, SubprocessAdapter, SEARCH_FILE_ENV};

use std::path::PathBuf;
use std::time::{Duration, Instant};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::annotations::{Bbox, Bfov, FrameAnnotation};
use crate::dataset::SequenceDir;
use crate::error::{Error, Result};
use crate::region::{
    build_region_with_mode, points_to_bfov, points_to_min_bbox, unwarp, RegionMap, RegionMode,
    ResolutionPolicy,
};
use crate::sphere::{pix_to_sph, ErpDims, LonLat, PixCoord, PI, TAU};

/// Whether large search regions switch to the spherical surface (the
/// default gating) or stay on a tangent plane for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarnessMode {
    Extended,
    ForceTangent,
}

impl std::str::FromStr for HarnessMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extended" => Ok(HarnessMode::Extended),
            "force-tangent" | "tangent" => Ok(HarnessMode::ForceTangent),
            _ => Err(Error::Validation(format!(
                "unknown mode '{s}' (expected extended|force-tangent)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HarnessConfig {
    /// Search region scale relative to the previous estimate.
    pub context_scale: f64,
    pub min_search_fov_deg: f64,
    pub max_search_theta_deg: f64,
    pub max_search_phi_deg: f64,
    /// Force-tangent runs clamp the search FoV here; a tangent plane
    /// degenerates as the FoV approaches 180°.
    pub tangent_cap_deg: f64,
    pub resolution: ResolutionPolicy,
    pub mode: HarnessMode,
    /// Boundary samples per box edge when lifting local predictions.
    pub boundary_samples: usize,
    pub timeout: Duration,
    /// Where to record the current search region for adapters that want
    /// global context; adapters find it via [`SEARCH_FILE_ENV`].
    pub sidecar: Option<PathBuf>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            context_scale: 2.0,
            min_search_fov_deg: 30.0,
            max_search_theta_deg: 360.0,
            max_search_phi_deg: 180.0,
            tangent_cap_deg: 170.0,
            resolution: ResolutionPolicy::default(),
            mode: HarnessMode::Extended,
            boundary_samples: 64,
            timeout: Duration::from_secs(30),
            sidecar: None,
        }
    }
}

/// What the harness did on one frame.
#[derive(Debug, Clone)]
pub struct TrackStep {
    /// 1-based frame index.
    pub frame: usize,
    pub search: Bfov,
    pub mode: RegionMode,
    /// The adapter's raw local prediction, when the step succeeded.
    pub local: Option<LocalTrack>,
    pub bbox: Bbox,
    pub rbbox: Bbox,
    pub bfov: Bfov,
    pub rbfov: Bfov,
    pub failed: bool,
    pub wall_ms: f64,
}

/// Per-step search-region record written to the sidecar file (degrees).
#[derive(Debug, Serialize, Deserialize)]
pub struct SearchInfo {
    pub frame: usize,
    pub bfov: [f64; 5],
    pub mode: String,
    pub width: u32,
    pub height: u32,
}

impl SearchInfo {
    pub fn read(path: &std::path::Path) -> Result<SearchInfo> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Adapter(format!("bad search file: {e}")))
    }
}

/// Source of ERP frames, 1-based like the on-disk layout.
pub trait FrameProvider {
    fn len(&self) -> usize;
    fn dims(&self) -> ErpDims;
    fn frame(&self, idx: usize) -> Result<RgbImage>;
}

impl FrameProvider for SequenceDir {
    fn len(&self) -> usize {
        self.frame_count
    }

    fn dims(&self) -> ErpDims {
        self.meta.dims().expect("validated at open")
    }

    fn frame(&self, idx: usize) -> Result<RgbImage> {
        self.load_frame(idx)
    }
}

/// In-memory frames, mostly for tests and synthetic runs.
pub struct MemoryFrames {
    pub dims: ErpDims,
    pub frames: Vec<RgbImage>,
}

impl FrameProvider for MemoryFrames {
    fn len(&self) -> usize {
        self.frames.len()
    }

    fn dims(&self) -> ErpDims {
        self.dims
    }

    fn frame(&self, idx: usize) -> Result<RgbImage> {
        self.frames
            .get(idx - 1)
            .cloned()
            .ok_or_else(|| Error::Validation(format!("no frame {idx}")))
    }
}

/// Lift a first-frame box annotation to the bounding FoV that seeds the
/// loop: sample the box boundary densely, push it through the spherical
/// camera model, and fit the maximum bounding FoV.
pub fn bbox_to_init_bfov(b: &Bbox, d: ErpDims) -> Result<Bfov> {
    let b = b.canonicalize(d)?;
    if b.w < 1e-6 || b.h < 1e-6 {
        return Err(Error::Validation("degenerate init box".into()));
    }
    let pts = box_boundary(&b, 64);
    let lls: Vec<LonLat> = pts
        .iter()
        .map(|&(u, v)| pix_to_sph(PixCoord::new(u, v.clamp(0.0, d.h())), d))
        .collect::<Result<_>>()?;
    let mut f = points_to_bfov(&lls, false, 0.0)?;
    // A full-width box wraps all the way around; boundary sampling cannot
    // see past its own pitch, so close the gap explicitly.
    if b.w >= d.w() - 1e-9 {
        f.theta = TAU;
        let c = pix_to_sph(PixCoord::new(b.cx, b.cy.clamp(0.0, d.h())), d)?;
        f.clon = c.lon();
    }
    Ok(f)
}

fn box_boundary(b: &Bbox, samples_per_edge: usize) -> Vec<(f64, f64)> {
    let corners = b.corners();
    let n = samples_per_edge.max(2);
    let mut out = Vec::with_capacity(4 * n);
    for i in 0..4 {
        let (x0, y0) = corners[i];
        let (x1, y1) = corners[(i + 1) % 4];
        for k in 0..n {
            let t = k as f64 / n as f64;
            out.push((x0 + t * (x1 - x0), y0 + t * (y1 - y0)));
        }
    }
    out
}

fn search_region(estimate: &Bfov, cfg: &HarnessConfig) -> Result<Bfov> {
    let min = cfg.min_search_fov_deg.to_radians();
    let mut max_theta = cfg.max_search_theta_deg.to_radians().min(TAU);
    let mut max_phi = cfg.max_search_phi_deg.to_radians().min(PI);
    if cfg.mode == HarnessMode::ForceTangent {
        let cap = cfg.tangent_cap_deg.to_radians();
        max_theta = max_theta.min(cap);
        max_phi = max_phi.min(cap);
    }
    let theta = (estimate.theta * cfg.context_scale).clamp(min.min(max_theta), max_theta);
    let phi = (estimate.phi * cfg.context_scale).clamp(min.min(max_phi), max_phi);
    Bfov::new(estimate.clon, estimate.clat, theta, phi, 0.0)
}

fn mode_override(cfg: &HarnessConfig) -> Option<RegionMode> {
    match cfg.mode {
        HarnessMode::Extended => None,
        HarnessMode::ForceTangent => Some(RegionMode::Tangent),
    }
}

fn write_sidecar(cfg: &HarnessConfig, frame: usize, rm: &RegionMap) -> Result<()> {
    let Some(path) = &cfg.sidecar else {
        return Ok(());
    };
    let f = rm.bfov();
    let info = SearchInfo {
        frame,
        bfov: [
            f.clon.to_degrees(),
            f.clat.to_degrees(),
            f.theta.to_degrees(),
            f.phi.to_degrees(),
            f.gamma.to_degrees(),
        ],
        mode: rm.mode().to_string(),
        width: rm.local_width(),
        height: rm.local_height(),
    };
    std::fs::write(path, serde_json::to_string(&info).expect("serializable"))?;
    Ok(())
}

/// Global representations derived from one local box prediction.
#[derive(Debug, Clone)]
struct Derived {
    bbox: Bbox,
    rbbox: Bbox,
    bfov: Bfov,
    rbfov: Bfov,
}

fn derive_global(
    local_box: &Bbox,
    rm: &RegionMap,
    d: ErpDims,
    samples_per_edge: usize,
) -> Result<Derived> {
    let wl = f64::from(rm.local_width());
    let hl = f64::from(rm.local_height());
    let pts: Vec<PixCoord> = box_boundary(local_box, samples_per_edge)
        .into_iter()
        .map(|(u, v)| PixCoord::new(u.clamp(0.0, wl), v.clamp(0.0, hl)))
        .collect();
    let lls = rm.local_points_to_global(&pts)?;
    Ok(Derived {
        bbox: points_to_min_bbox(&lls, d, false)?,
        rbbox: points_to_min_bbox(&lls, d, true)?,
        bfov: points_to_bfov(&lls, false, 0.0)?,
        rbfov: points_to_bfov(&lls, true, local_box.gamma)?,
    })
}

/// Representations to seed step 1 with, straight from the init annotation
/// where present.
fn init_derived(init: &FrameAnnotation, init_bfov: &Bfov, d: ErpDims) -> Result<Derived> {
    let boundary = crate::region::RegionGeometry::new(init_bfov, None)?
        .boundary_dirs(64)
        .iter()
        .map(|v| v.to_lonlat())
        .collect::<Vec<_>>();
    Ok(Derived {
        bbox: match init.bbox {
            Some(b) => b.canonicalize(d)?,
            None => points_to_min_bbox(&boundary, d, false)?,
        },
        rbbox: match init.rbbox.or(init.bbox) {
            Some(b) => b.canonicalize(d)?,
            None => points_to_min_bbox(&boundary, d, true)?,
        },
        bfov: *init_bfov,
        rbfov: init.rbfov.unwrap_or(*init_bfov),
    })
}

/// Run the one-pass tracking loop over a sequence.
///
/// `init` annotates frame 1 (a bounding FoV, or a box that gets lifted to
/// one). Returns one [`TrackStep`] per later frame.
pub fn run_ope(
    frames: &dyn FrameProvider,
    init: &FrameAnnotation,
    cfg: &HarnessConfig,
    adapter: &mut dyn Adapter,
) -> Result<Vec<TrackStep>> {
    let n = frames.len();
    if n < 2 {
        return Err(Error::Validation(format!(
            "tracking needs at least 2 frames, got {n}"
        )));
    }
    let d = frames.dims();
    let init_bfov = match init.bfov.or(init.rbfov) {
        Some(f) => f.validate()?,
        None => {
            let b = init.bbox.or(init.rbbox).ok_or_else(|| {
                Error::Validation("init annotation has neither a BFoV nor a box".into())
            })?;
            bbox_to_init_bfov(&b, d)?
        }
    };

    // Initialize the adapter on frame 1: unwarp the init search region and
    // project the target's own region boundary into it.
    let search0 = search_region(&init_bfov, cfg)?;
    let rm0 = build_region_with_mode(&search0, d, &cfg.resolution, mode_override(cfg))?;
    let local0 = unwarp(&frames.frame(1)?, &rm0)?;
    let target_geo = crate::region::RegionGeometry::new(&init_bfov, None)?;
    let local_pts: Vec<(f64, f64)> = target_geo
        .boundary_dirs(64)
        .iter()
        .filter_map(|dir| rm0.project_to_local(dir))
        .map(|q| (q.u, q.v))
        .collect();
    if local_pts.is_empty() {
        return Err(Error::Validation(
            "init target does not intersect its own search region".into(),
        ));
    }
    let fit = crate::geom::axis_rect(&local_pts)?;
    let init_local_box = Bbox::new(fit.cx, fit.cy, fit.w.max(1.0), fit.h.max(1.0), 0.0)?;
    write_sidecar(cfg, 1, &rm0)?;
    adapter.init(&local0, &init_local_box)?;

    let mut estimate = init_bfov;
    let mut last_derived = init_derived(init, &init_bfov, d)?;
    let mut steps = Vec::with_capacity(n - 1);

    for t in 2..=n {
        let started = Instant::now();
        let search = search_region(&estimate, cfg)?;
        let rm = build_region_with_mode(&search, d, &cfg.resolution, mode_override(cfg))?;
        let local_img = unwarp(&frames.frame(t)?, &rm)?;
        write_sidecar(cfg, t, &rm)?;

        let mut failed = false;
        let mut local = None;
        match adapter.track(&local_img) {
            Ok(track) => match derive_global(&track.bbox, &rm, d, cfg.boundary_samples) {
                Ok(derived) => {
                    estimate = derived.bfov;
                    last_derived = derived;
                    local = Some(track);
                }
                Err(_) => failed = true,
            },
            Err(_) => failed = true,
        }

        steps.push(TrackStep {
            frame: t,
            search,
            mode: rm.mode(),
            local,
            bbox: last_derived.bbox,
            rbbox: last_derived.rbbox,
            bfov: last_derived.bfov,
            rbfov: last_derived.rbfov,
            failed,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(steps)
}
