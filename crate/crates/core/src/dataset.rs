//! On-disk sequence layout and the annotation text formats.
//!
//! A sequence directory holds:
//!
//! ```text
//! <seq>/
//!   frames/000001.png     ERP frames, 1-based
//!   masks/000001.png      optional 8-bit masks (0 background, 255 target)
//!   bbox.txt  rbbox.txt   cx,cy,w,h,gamma_deg   (pixels, center-based)
//!   bfov.txt  rbfov.txt   clon,clat,theta,phi,gamma   (degrees)
//!   attributes.txt        NAME=0|1 per line
//!   meta.txt              key=value: name, width, height, fps
//! ```
//!
//! Annotation files carry one frame per line; `#` starts a comment and the
//! literal token `none` marks a frame without an annotation. Values are
//! written with six decimal places, which round-trips through the parser.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;

use crate::annotations::{Bbox, Bfov, FrameAnnotation, Mask};
use crate::error::{Error, Result};
use crate::metrics::{AttributeSet, ATTRIBUTE_NAMES};
use crate::sphere::ErpDims;

/// Which annotation stream a file carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Repr {
    Bbox,
    RBbox,
    Bfov,
    RBfov,
}

impl Repr {
    pub const ALL: [Repr; 4] = [Repr::Bbox, Repr::RBbox, Repr::Bfov, Repr::RBfov];

    pub fn filename(&self) -> &'static str {
        match self {
            Repr::Bbox => "bbox.txt",
            Repr::RBbox => "rbbox.txt",
            Repr::Bfov => "bfov.txt",
            Repr::RBfov => "rbfov.txt",
        }
    }

    pub fn is_box(&self) -> bool {
        matches!(self, Repr::Bbox | Repr::RBbox)
    }
}

impl std::str::FromStr for Repr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bbox" => Ok(Repr::Bbox),
            "rbbox" => Ok(Repr::RBbox),
            "bfov" => Ok(Repr::Bfov),
            "rbfov" => Ok(Repr::RBfov),
            _ => Err(Error::Validation(format!(
                "unknown representation '{s}' (expected bbox|rbbox|bfov|rbfov)"
            ))),
        }
    }
}

impl std::fmt::Display for Repr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Repr::Bbox => "bbox",
            Repr::RBbox => "rbbox",
            Repr::Bfov => "bfov",
            Repr::RBfov => "rbfov",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SequenceMeta {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
}

impl SequenceMeta {
    pub fn dims(&self) -> Result<ErpDims> {
        ErpDims::new(self.width, self.height)
    }
}

/// A sequence directory with its metadata and frame listing.
#[derive(Debug, Clone)]
pub struct SequenceDir {
    pub root: PathBuf,
    pub meta: SequenceMeta,
    pub frame_count: usize,
}

impl SequenceDir {
    pub fn open(root: &Path) -> Result<SequenceDir> {
        let meta = read_meta(&root.join("meta.txt"))?;
        let frames_dir = root.join("frames");
        let mut count = 0;
        while frames_dir.join(frame_name(count + 1)).exists() {
            count += 1;
        }
        if count == 0 {
            return Err(Error::Validation(format!(
                "no frames found under {}",
                frames_dir.display()
            )));
        }
        Ok(SequenceDir {
            root: root.to_path_buf(),
            meta,
            frame_count: count,
        })
    }

    pub fn dims(&self) -> Result<ErpDims> {
        self.meta.dims()
    }

    pub fn len(&self) -> usize {
        self.frame_count
    }

    pub fn is_empty(&self) -> bool {
        self.frame_count == 0
    }

    /// Path of the 1-based frame `idx`.
    pub fn frame_path(&self, idx: usize) -> PathBuf {
        self.root.join("frames").join(frame_name(idx))
    }

    pub fn mask_path(&self, idx: usize) -> PathBuf {
        self.root.join("masks").join(frame_name(idx))
    }

    pub fn load_frame(&self, idx: usize) -> Result<RgbImage> {
        Ok(image::open(self.frame_path(idx))?.into_rgb8())
    }

    pub fn load_mask(&self, idx: usize) -> Result<Mask> {
        load_mask(&self.mask_path(idx), self.dims()?)
    }

    pub fn annotation_path(&self, repr: Repr) -> PathBuf {
        self.root.join(repr.filename())
    }

    /// Load one annotation stream; errors when the line count does not
    /// match the frame count.
    pub fn load_annotations(&self, repr: Repr) -> Result<Vec<Option<AnnotationRecord>>> {
        let recs = read_annotation_file(&self.annotation_path(repr), repr)?;
        if recs.len() != self.frame_count {
            return Err(Error::Validation(format!(
                "{}: {} lines for {} frames",
                self.annotation_path(repr).display(),
                recs.len(),
                self.frame_count
            )));
        }
        Ok(recs)
    }

    /// Merge every annotation file that exists into per-frame annotations.
    pub fn load_merged_annotations(&self) -> Result<Vec<FrameAnnotation>> {
        let mut out: Vec<FrameAnnotation> = (0..self.frame_count)
            .map(|k| FrameAnnotation {
                frame: k + 1,
                ..Default::default()
            })
            .collect();
        for repr in Repr::ALL {
            if !self.annotation_path(repr).exists() {
                continue;
            }
            for (ann, rec) in out.iter_mut().zip(self.load_annotations(repr)?) {
                match rec {
                    Some(AnnotationRecord::Box(b)) => match repr {
                        Repr::Bbox => ann.bbox = Some(b),
                        Repr::RBbox => ann.rbbox = Some(b),
                        _ => unreachable!(),
                    },
                    Some(AnnotationRecord::Fov(f)) => match repr {
                        Repr::Bfov => ann.bfov = Some(f),
                        Repr::RBfov => ann.rbfov = Some(f),
                        _ => unreachable!(),
                    },
                    None => {}
                }
            }
        }
        Ok(out)
    }
}

/// One parsed annotation line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnnotationRecord {
    Box(Bbox),
    Fov(Bfov),
}

impl AnnotationRecord {
    pub fn as_box(&self) -> Option<Bbox> {
        match self {
            AnnotationRecord::Box(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_fov(&self) -> Option<Bfov> {
        match self {
            AnnotationRecord::Fov(f) => Some(*f),
            _ => None,
        }
    }
}

pub fn frame_name(idx: usize) -> String {
    format!("{idx:06}.png")
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Parse an annotation file into one record per line (comments and blank
/// lines skipped, `none` → `None`).
pub fn read_annotation_file(path: &Path, repr: Repr) -> Result<Vec<Option<AnnotationRecord>>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == "none" {
            out.push(None);
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(path, lineno + 1, format!("bad number '{f}': {e}")))
            })
            .collect::<Result<_>>()?;
        if fields.len() != 5 {
            return Err(parse_err(
                path,
                lineno + 1,
                format!("expected 5 comma-separated values, got {}", fields.len()),
            ));
        }
        let rec = if repr.is_box() {
            AnnotationRecord::Box(
                Bbox::new(
                    fields[0],
                    fields[1],
                    fields[2],
                    fields[3],
                    fields[4].to_radians(),
                )
                .map_err(|e| parse_err(path, lineno + 1, e.to_string()))?,
            )
        } else {
            AnnotationRecord::Fov(
                Bfov::from_degrees(fields[0], fields[1], fields[2], fields[3], fields[4])
                    .map_err(|e| parse_err(path, lineno + 1, e.to_string()))?,
            )
        };
        out.push(Some(rec));
    }
    Ok(out)
}

pub fn format_box_line(b: &Bbox) -> String {
    format!(
        "{:.6},{:.6},{:.6},{:.6},{:.6}",
        b.cx,
        b.cy,
        b.w,
        b.h,
        b.gamma.to_degrees()
    )
}

pub fn format_bfov_line(f: &Bfov) -> String {
    format!(
        "{:.6},{:.6},{:.6},{:.6},{:.6}",
        f.clon.to_degrees(),
        f.clat.to_degrees(),
        f.theta.to_degrees(),
        f.phi.to_degrees(),
        f.gamma.to_degrees()
    )
}

pub fn write_annotation_file(path: &Path, recs: &[Option<AnnotationRecord>]) -> Result<()> {
    let mut text = String::new();
    for rec in recs {
        match rec {
            Some(AnnotationRecord::Box(b)) => {
                let _ = writeln!(text, "{}", format_box_line(b));
            }
            Some(AnnotationRecord::Fov(f)) => {
                let _ = writeln!(text, "{}", format_bfov_line(f));
            }
            None => {
                let _ = writeln!(text, "none");
            }
        }
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_meta(path: &Path) -> Result<SequenceMeta> {
    let text = fs::read_to_string(path)?;
    let mut name = String::new();
    let mut width = None;
    let mut height = None;
    let mut fps = 30.0;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(path, lineno + 1, "expected key=value"))?;
        match key.trim() {
            "name" => name = value.trim().to_string(),
            "width" => {
                width = Some(value.trim().parse::<u32>().map_err(|e| {
                    parse_err(path, lineno + 1, format!("bad width: {e}"))
                })?)
            }
            "height" => {
                height = Some(value.trim().parse::<u32>().map_err(|e| {
                    parse_err(path, lineno + 1, format!("bad height: {e}"))
                })?)
            }
            "fps" => {
                fps = value.trim().parse::<f64>().map_err(|e| {
                    parse_err(path, lineno + 1, format!("bad fps: {e}"))
                })?
            }
            _ => {} // tolerate unknown keys
        }
    }
    let width = width.ok_or_else(|| parse_err(path, 0, "missing width"))?;
    let height = height.ok_or_else(|| parse_err(path, 0, "missing height"))?;
    Ok(SequenceMeta {
        name,
        width,
        height,
        fps,
    })
}

pub fn write_meta(path: &Path, meta: &SequenceMeta) -> Result<()> {
    fs::write(
        path,
        format!(
            "name={}\nwidth={}\nheight={}\nfps={}\n",
            meta.name, meta.width, meta.height, meta.fps
        ),
    )?;
    Ok(())
}

pub fn read_attributes(path: &Path) -> Result<AttributeSet> {
    let text = fs::read_to_string(path)?;
    let mut set = AttributeSet::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(path, lineno + 1, "expected NAME=0|1"))?;
        let on = match value.trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(parse_err(path, lineno + 1, format!("bad flag '{other}'")));
            }
        };
        set.flags.insert(key.trim().to_string(), on);
    }
    Ok(set)
}

pub fn write_attributes(path: &Path, set: &AttributeSet) -> Result<()> {
    let mut text = String::new();
    for name in ATTRIBUTE_NAMES {
        let _ = writeln!(text, "{}={}", name, if set.get(name) { 1 } else { 0 });
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn load_mask(path: &Path, dims: ErpDims) -> Result<Mask> {
    let img = image::open(path)?.into_luma8();
    if img.width() != dims.width() || img.height() != dims.height() {
        return Err(Error::DimMismatch(format!(
            "{}: mask is {}x{}, sequence is {}x{}",
            path.display(),
            img.width(),
            img.height(),
            dims.width(),
            dims.height()
        )));
    }
    Mask::from_gray(dims, img.as_raw())
}

pub fn save_mask(path: &Path, mask: &Mask) -> Result<()> {
    let d = mask.dims();
    let img = image::GrayImage::from_raw(d.width(), d.height(), mask.to_gray())
        .expect("sized buffer");
    img.save(path)?;
    Ok(())
}
