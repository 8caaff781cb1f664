//! Deterministic synthetic 360° sequences with exact ground truth.
//!
//! A scenario is a target (geodesic disk or angular rectangle sprite)
//! moving along a parametric trajectory over a procedural spherical
//! checkerboard. Targets are rendered by a per-pixel angular test, exact up
//! to pixel quantization, so the emitted masks double as conversion
//! fixtures and the analytic center/extents as evaluation oracles.
//!
//! Two reference adapters live here as well: [`OracleTracker`] answers
//! every request with the analytic target projected into the current
//! search region (reading the harness's search file), and [`BlobTracker`]
//! finds the target by its distinctive color in the local image alone.

use std::path::Path;

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotations::{Bbox, Bfov, FrameAnnotation, Mask};
use crate::dataset::{
    frame_name, save_mask, write_annotation_file, write_attributes, write_meta,
    AnnotationRecord, Repr, SequenceMeta,
};
use crate::error::{Error, Result};
use crate::harness::adapter::{Adapter, LocalTrack, SEARCH_FILE_ENV};
use crate::harness::SearchInfo;
use crate::mask::{mask_to_bbox, mask_to_bfov};
use crate::region::{RegionGeometry, RegionMode};
use crate::sphere::{ErpDims, LonLat, Rotation, UnitVec, TAU};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub frames: u32,
    pub seed: u64,
    pub trajectory: Trajectory,
    pub target: TargetSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Trajectory {
    /// Along a great circle: start at `(start_lon_deg, 0)` rotated out of
    /// the equator by `incline_deg`, advancing a fixed angle per frame.
    GreatCircle {
        start_lon_deg: f64,
        incline_deg: f64,
        rate_deg_per_frame: f64,
    },
    /// Latitude sweep at (slowly drifting) fixed longitude.
    LatitudeSweep {
        lon_deg: f64,
        lat_start_deg: f64,
        lat_end_deg: f64,
        lon_rate_deg_per_frame: f64,
    },
    /// Back-and-forth across the ±180° seam.
    SeamLoop {
        lat_deg: f64,
        amplitude_deg: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetSpec {
    /// Geodesic disk; the radius interpolates linearly when an end value
    /// is given.
    Disk {
        radius_deg: f64,
        #[serde(default)]
        radius_end_deg: Option<f64>,
    },
    /// Angular rectangle (sphere-surface patch) with an in-plane spin.
    RectSprite {
        width_deg: f64,
        height_deg: f64,
        spin_deg_per_frame: f64,
    },
}

impl Scenario {
    pub fn dims(&self) -> Result<ErpDims> {
        ErpDims::new(self.width, self.height)
    }

    fn progress(&self, frame: usize) -> f64 {
        if self.frames <= 1 {
            0.0
        } else {
            (frame - 1) as f64 / (self.frames - 1) as f64
        }
    }

    /// Analytic target center at a 1-based frame index.
    pub fn center_at(&self, frame: usize) -> LonLat {
        let t = (frame - 1) as f64;
        let s = self.progress(frame);
        match &self.trajectory {
            Trajectory::GreatCircle {
                start_lon_deg,
                incline_deg,
                rate_deg_per_frame,
            } => {
                let along = (rate_deg_per_frame * t).to_radians();
                let frame_rot = Rotation::about_y(start_lon_deg.to_radians())
                    * Rotation::about_x(0.0)
                    * Rotation::about_z(incline_deg.to_radians());
                frame_rot
                    .apply(&LonLat::new(along, 0.0).expect("in range").to_vec())
                    .to_lonlat()
            }
            Trajectory::LatitudeSweep {
                lon_deg,
                lat_start_deg,
                lat_end_deg,
                lon_rate_deg_per_frame,
            } => LonLat::from_degrees(
                lon_deg + lon_rate_deg_per_frame * t,
                lat_start_deg + (lat_end_deg - lat_start_deg) * s,
            )
            .expect("sweep stays in range"),
            Trajectory::SeamLoop {
                lat_deg,
                amplitude_deg,
            } => {
                let swing = (s * TAU).sin() * amplitude_deg;
                LonLat::from_degrees(180.0 + swing, *lat_deg).expect("in range")
            }
        }
    }

    /// Analytic bounding FoV at a 1-based frame index: `[c, 2r, 2r, 0]`
    /// for disks, `[c, w, h, spin·t]` for sprites.
    pub fn analytic_bfov(&self, frame: usize) -> Bfov {
        let c = self.center_at(frame);
        let t = (frame - 1) as f64;
        match &self.target {
            TargetSpec::Disk { .. } => {
                let r = self.radius_at(frame);
                Bfov::new(c.lon(), c.lat(), 2.0 * r, 2.0 * r, 0.0).expect("valid disk")
            }
            TargetSpec::RectSprite {
                width_deg,
                height_deg,
                spin_deg_per_frame,
            } => Bfov::from_degrees(
                c.lon().to_degrees(),
                c.lat().to_degrees(),
                *width_deg,
                *height_deg,
                spin_deg_per_frame * t,
            )
            .expect("valid sprite"),
        }
    }

    fn radius_at(&self, frame: usize) -> f64 {
        match &self.target {
            TargetSpec::Disk {
                radius_deg,
                radius_end_deg,
            } => {
                let end = radius_end_deg.unwrap_or(*radius_deg);
                (radius_deg + (end - radius_deg) * self.progress(frame)).to_radians()
            }
            TargetSpec::RectSprite { .. } => 0.0,
        }
    }

    /// Directions along the analytic target boundary.
    pub fn boundary_dirs(&self, frame: usize, samples: usize) -> Vec<UnitVec> {
        match &self.target {
            TargetSpec::Disk { .. } => {
                let r = self.radius_at(frame);
                let c = self.center_at(frame);
                let frame_rot = Rotation::about_y(c.lon()) * Rotation::about_x(c.lat());
                (0..samples)
                    .map(|k| {
                        let a = TAU * k as f64 / samples as f64;
                        let d = UnitVec::new(
                            r.sin() * a.cos(),
                            r.sin() * a.sin(),
                            r.cos(),
                        )
                        .expect("unit");
                        frame_rot.apply(&d)
                    })
                    .collect()
            }
            TargetSpec::RectSprite { .. } => {
                let geo = RegionGeometry::new(&self.analytic_bfov(frame), Some(RegionMode::Sphere))
                    .expect("valid sprite");
                geo.boundary_dirs(samples / 4)
            }
        }
    }

    /// Named presets covering the scripted scenarios.
    pub fn preset(name: &str) -> Option<Scenario> {
        let base = |name: &str, trajectory, target| Scenario {
            name: name.to_string(),
            width: 512,
            height: 256,
            frames: 40,
            seed: 7,
            trajectory,
            target,
        };
        let disk = |radius_deg| TargetSpec::Disk {
            radius_deg,
            radius_end_deg: None,
        };
        match name {
            "equator" => Some(base(
                "equator",
                Trajectory::GreatCircle {
                    start_lon_deg: -30.0,
                    incline_deg: 0.0,
                    rate_deg_per_frame: 1.5,
                },
                disk(10.0),
            )),
            "inclined" => Some(base(
                "inclined",
                Trajectory::GreatCircle {
                    start_lon_deg: 40.0,
                    incline_deg: 30.0,
                    rate_deg_per_frame: 2.0,
                },
                disk(12.0),
            )),
            "seam" => Some(base(
                "seam",
                Trajectory::SeamLoop {
                    lat_deg: 5.0,
                    amplitude_deg: 25.0,
                },
                disk(10.0),
            )),
            "latsweep" => Some(base(
                "latsweep",
                Trajectory::LatitudeSweep {
                    lon_deg: 60.0,
                    lat_start_deg: 0.0,
                    lat_end_deg: 85.0,
                    lon_rate_deg_per_frame: 0.5,
                },
                disk(10.0),
            )),
            "sprite" => Some(base(
                "sprite",
                Trajectory::GreatCircle {
                    start_lon_deg: 10.0,
                    incline_deg: 15.0,
                    rate_deg_per_frame: 1.2,
                },
                TargetSpec::RectSprite {
                    width_deg: 24.0,
                    height_deg: 12.0,
                    spin_deg_per_frame: 1.0,
                },
            )),
            "growth" => {
                let mut s = base(
                    "growth",
                    Trajectory::GreatCircle {
                        start_lon_deg: 0.0,
                        incline_deg: 0.0,
                        rate_deg_per_frame: 1.5,
                    },
                    TargetSpec::Disk {
                        radius_deg: 10.0,
                        radius_end_deg: Some(75.0),
                    },
                );
                s.frames = 60;
                Some(s)
            }
            _ => None,
        }
    }
}

/// Target paint: a red family nothing in the background comes near, with
/// concentric rings so local trackers see structure.
fn target_color(dist_frac: f64) -> Rgb<u8> {
    let ring = ((dist_frac * 5.0) as u32) % 2;
    Rgb([if ring == 0 { 235 } else { 200 }, 70, 55])
}

/// Whether a rendered pixel belongs to the target paint (tolerant of
/// bilinear blending at the rim).
pub fn is_target_color(p: &Rgb<u8>) -> bool {
    p.0[0] >= 165 && p.0[1] <= 130 && p.0[2] <= 130
}

/// Deterministic spherical checkerboard with per-cell tint. Stays away from
/// the target's red family.
fn background_color(lon: f64, lat: f64, seed: u64) -> Rgb<u8> {
    let ci = ((lon.to_degrees() + 360.0) / 15.0).floor() as i64;
    let cj = ((lat.to_degrees() + 90.0) / 15.0).floor() as i64;
    let mut h = seed
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add((ci as u64).wrapping_mul(0xbf58476d1ce4e5b9))
        .wrapping_add((cj as u64).wrapping_mul(0x94d049bb133111eb));
    h ^= h >> 31;
    let palette: [[u8; 3]; 4] = [
        [62, 84, 112],
        [96, 114, 134],
        [74, 122, 96],
        [116, 134, 150],
    ];
    let parity = ((ci + cj).rem_euclid(2)) as usize;
    let pick = palette[(h as usize % 2) * 2 + parity];
    Rgb(pick)
}

/// Render one frame and its mask.
pub fn render_frame(s: &Scenario, frame: usize) -> Result<(RgbImage, Mask)> {
    let d = s.dims()?;
    let (w, h) = (d.width(), d.height());
    let center = s.center_at(frame).to_vec();
    let disk_radius = s.radius_at(frame);
    let sprite_geo = match &s.target {
        TargetSpec::RectSprite { .. } => Some(RegionGeometry::new(
            &s.analytic_bfov(frame),
            Some(RegionMode::Sphere),
        )?),
        TargetSpec::Disk { .. } => None,
    };

    let mut img = RgbImage::new(w, h);
    let mut mask = Mask::empty(d);
    let lon_of = |x: u32| (f64::from(x) + 0.5) / d.w() * TAU - TAU / 2.0;
    let lat_of = |y: u32| (0.5 - (f64::from(y) + 0.5) / d.h()) * std::f64::consts::PI;
    for y in 0..h {
        let lat = lat_of(y);
        let (sin_lat, cos_lat) = lat.sin_cos();
        for x in 0..w {
            let lon = lon_of(x);
            let (sin_lon, cos_lon) = lon.sin_cos();
            let dir = UnitVec::new(cos_lat * sin_lon, -sin_lat, cos_lat * cos_lon)
                .expect("unit by construction");
            let on_target = match &sprite_geo {
                Some(geo) => geo.contains(&dir),
                None => dir.dot(&center) >= disk_radius.cos(),
            };
            if on_target {
                let frac = match &s.target {
                    TargetSpec::Disk { .. } => {
                        dir.dot(&center).clamp(-1.0, 1.0).acos() / disk_radius.max(1e-9)
                    }
                    TargetSpec::RectSprite { .. } => {
                        crate::sphere::angular_distance_vec(&dir, &center)
                            / s.analytic_bfov(frame).theta.max(1e-9)
                    }
                };
                img.put_pixel(x, y, target_color(frac));
                mask.set(x, y, true);
            } else {
                img.put_pixel(x, y, background_color(lon, lat, s.seed));
            }
        }
    }
    Ok((img, mask))
}

/// Everything `generate` wrote, kept in memory for direct use.
pub struct GeneratedSequence {
    pub scenario: Scenario,
    pub annotations: Vec<FrameAnnotation>,
    pub analytic: Vec<Bfov>,
}

/// Render the scenario to a sequence directory: frames, masks, the four
/// converted ground-truth files, the analytic sidecar, attributes and
/// metadata. Layout matches [`crate::dataset`], so synthetic sequences are
/// drop-in replacements for real ones.
pub fn generate(s: &Scenario, out_dir: &Path) -> Result<GeneratedSequence> {
    let d = s.dims()?;
    if s.frames < 2 {
        return Err(Error::Validation("scenario needs at least 2 frames".into()));
    }
    let with_ctx = |e: std::io::Error, what: &str| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{what} under {}: {e}", out_dir.display()),
        ))
    };
    std::fs::create_dir_all(out_dir.join("frames"))
        .map_err(|e| with_ctx(e, "creating frames dir"))?;
    std::fs::create_dir_all(out_dir.join("masks"))
        .map_err(|e| with_ctx(e, "creating masks dir"))?;

    let frames: Vec<usize> = (1..=s.frames as usize).collect();
    let per_frame: Vec<(FrameAnnotation, Bfov)> = frames
        .par_iter()
        .map(|&k| -> Result<(FrameAnnotation, Bfov)> {
            let (img, mask) = render_frame(s, k)?;
            img.save(out_dir.join("frames").join(frame_name(k)))?;
            save_mask(&out_dir.join("masks").join(frame_name(k)), &mask)?;
            let ann = FrameAnnotation {
                frame: k,
                bbox: mask_to_bbox(&mask, false)?,
                rbbox: mask_to_bbox(&mask, true)?,
                bfov: mask_to_bfov(&mask, false)?,
                rbfov: mask_to_bfov(&mask, true)?,
                mask: None,
            };
            Ok((ann, s.analytic_bfov(k)))
        })
        .collect::<Result<_>>()?;

    let annotations: Vec<FrameAnnotation> = per_frame.iter().map(|(a, _)| a.clone()).collect();
    let analytic: Vec<Bfov> = per_frame.iter().map(|(_, f)| *f).collect();

    for repr in Repr::ALL {
        let recs: Vec<Option<AnnotationRecord>> = annotations
            .iter()
            .map(|a| match repr {
                Repr::Bbox => a.bbox.map(AnnotationRecord::Box),
                Repr::RBbox => a.rbbox.map(AnnotationRecord::Box),
                Repr::Bfov => a.bfov.map(AnnotationRecord::Fov),
                Repr::RBfov => a.rbfov.map(AnnotationRecord::Fov),
            })
            .collect();
        write_annotation_file(&out_dir.join(repr.filename()), &recs)?;
    }
    let analytic_recs: Vec<Option<AnnotationRecord>> = analytic
        .iter()
        .map(|f| Some(AnnotationRecord::Fov(*f)))
        .collect();
    write_annotation_file(&out_dir.join("analytic.txt"), &analytic_recs)?;

    let (attrs, _) = crate::metrics::compute_attributes(&annotations, d)?;
    write_attributes(&out_dir.join("attributes.txt"), &attrs)?;
    write_meta(
        &out_dir.join("meta.txt"),
        &SequenceMeta {
            name: s.name.clone(),
            width: s.width,
            height: s.height,
            fps: 30.0,
        },
    )?;
    std::fs::write(
        out_dir.join("scenario.json"),
        serde_json::to_string_pretty(s).expect("serializable"),
    )?;
    Ok(GeneratedSequence {
        scenario: s.clone(),
        annotations,
        analytic,
    })
}

/// The closed-loop reference adapter: answers every track request with the
/// analytic target's box projected into the current search region, which it
/// reconstructs from the harness's search file. An optional center bias
/// turns it into a controlled-error tracker.
pub struct OracleTracker {
    scenario: Scenario,
    search_file: std::path::PathBuf,
    pub bias_lon_deg: f64,
    pub bias_lat_deg: f64,
    last: Option<Bbox>,
}

impl OracleTracker {
    pub fn new(scenario: Scenario, search_file: std::path::PathBuf) -> Self {
        Self {
            scenario,
            search_file,
            bias_lon_deg: 0.0,
            bias_lat_deg: 0.0,
            last: None,
        }
    }

    /// Locate the search file through the environment, as a subprocess
    /// adapter would.
    pub fn from_env(scenario: Scenario) -> Result<Self> {
        let path = std::env::var(SEARCH_FILE_ENV).map_err(|_| {
            Error::Adapter(format!("{SEARCH_FILE_ENV} is not set; the oracle needs it"))
        })?;
        Ok(Self::new(scenario, path.into()))
    }

    fn biased_boundary(&self, frame: usize) -> Vec<UnitVec> {
        let bias = Rotation::about_y(self.bias_lon_deg.to_radians())
            * Rotation::about_x(self.bias_lat_deg.to_radians());
        self.scenario
            .boundary_dirs(frame, 256)
            .iter()
            .map(|d| bias.apply(d))
            .collect()
    }
}

impl Adapter for OracleTracker {
    fn name(&self) -> &str {
        "oracle"
    }

    fn init(&mut self, _image: &RgbImage, bbox: &Bbox) -> Result<()> {
        self.last = Some(*bbox);
        Ok(())
    }

    fn track(&mut self, image: &RgbImage) -> Result<LocalTrack> {
        let info = SearchInfo::read(&self.search_file)?;
        let search = Bfov::from_degrees(
            info.bfov[0],
            info.bfov[1],
            info.bfov[2],
            info.bfov[3],
            info.bfov[4],
        )
        .map_err(|e| Error::Adapter(format!("bad search bfov: {e}")))?;
        let mode = match info.mode.as_str() {
            "tangent" => RegionMode::Tangent,
            "sphere" => RegionMode::Sphere,
            other => return Err(Error::Adapter(format!("bad search mode '{other}'"))),
        };
        let geo = RegionGeometry::new(&search, Some(mode))
            .map_err(|e| Error::Adapter(format!("search region: {e}")))?;
        let (wl, hl) = (image.width(), image.height());
        let pts: Vec<(f64, f64)> = self
            .biased_boundary(info.frame)
            .iter()
            .filter_map(|dir| geo.project_to_local(dir, wl, hl))
            .map(|q| (q.u.clamp(0.0, f64::from(wl)), q.v.clamp(0.0, f64::from(hl))))
            .collect();
        let bbox = if pts.len() < 8 {
            // target (essentially) outside the search window: repeat the
            // last answer like a lost short-term tracker would
            self.last.unwrap_or(
                Bbox::axis_aligned(f64::from(wl) / 2.0, f64::from(hl) / 2.0, 4.0, 4.0)
                    .expect("valid"),
            )
        } else {
            let fit = crate::geom::axis_rect(&pts)?;
            Bbox::new(fit.cx, fit.cy, fit.w.max(1.0), fit.h.max(1.0), 0.0)?
        };
        self.last = Some(bbox);
        Ok(LocalTrack { bbox, score: 1.0 })
    }
}

/// A minimal real tracker: finds the target paint in the local image and
/// boxes it. Knows nothing about the sphere; this is the stand-in for an
/// off-the-shelf local visual tracker.
#[derive(Default)]
pub struct BlobTracker {
    last: Option<Bbox>,
}

impl Adapter for BlobTracker {
    fn name(&self) -> &str {
        "blob"
    }

    fn init(&mut self, _image: &RgbImage, bbox: &Bbox) -> Result<()> {
        self.last = Some(*bbox);
        Ok(())
    }

    fn track(&mut self, image: &RgbImage) -> Result<LocalTrack> {
        let mut min_x = u32::MAX;
        let mut max_x = 0;
        let mut min_y = u32::MAX;
        let mut max_y = 0;
        let mut hits = 0u64;
        for (x, y, p) in image.enumerate_pixels() {
            if is_target_color(p) {
                hits += 1;
                min_x = min_x.min(x);
                max_x = max_x.max(x);
                min_y = min_y.min(y);
                max_y = max_y.max(y);
            }
        }
        let bbox = if hits < 4 {
            self.last.unwrap_or(
                Bbox::axis_aligned(
                    f64::from(image.width()) / 2.0,
                    f64::from(image.height()) / 2.0,
                    4.0,
                    4.0,
                )
                .expect("valid"),
            )
        } else {
            Bbox::new(
                f64::from(min_x + max_x + 1) / 2.0,
                f64::from(min_y + max_y + 1) / 2.0,
                f64::from(max_x - min_x + 1),
                f64::from(max_y - min_y + 1),
                0.0,
            )?
        };
        self.last = Some(bbox);
        Ok(LocalTrack {
            bbox,
            score: hits as f64,
        })
    }
}
