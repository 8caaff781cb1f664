//! Plane geometry helpers shared by the box fitting and metric code:
//! convex hulls, minimum-area enclosing rectangles, convex polygon
//! intersection, and circular-extent bookkeeping for the horizontal wrap.

use crate::error::{Error, Result};
use crate::sphere::PI;

pub type Pt = (f64, f64);

#[inline]
fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull (Andrew monotone chain), counter-clockwise, no repeated
/// endpoint. Collinear interior points are dropped. Degenerate inputs
/// (single point, collinear set) return the reduced hull.
pub fn convex_hull(points: &[Pt]) -> Vec<Pt> {
    let mut pts: Vec<Pt> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let n = pts.len();
    if n <= 2 {
        return pts;
    }
    let mut hull: Vec<Pt> = Vec::with_capacity(2 * n);
    for &p in pts.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev() {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// A fitted enclosing rectangle: center, extents, and the rotation of the
/// `w` side measured from the +x axis, folded into `(-π/2, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectFit {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub gamma: f64,
}

impl RectFit {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Globally minimal-area enclosing rectangle of a point set.
///
/// The optimum is flush with a convex-hull edge, so scanning hull edges is
/// exhaustive. Degenerate sets (collinear) yield a zero-thickness rectangle.
pub fn min_area_rect(points: &[Pt]) -> Result<RectFit> {
    if points.is_empty() {
        return Err(Error::Domain("minimum-area rectangle of no points".into()));
    }
    let hull = convex_hull(points);
    if hull.len() == 1 {
        return Ok(RectFit {
            cx: hull[0].0,
            cy: hull[0].1,
            w: 0.0,
            h: 0.0,
            gamma: 0.0,
        });
    }
    let mut best: Option<RectFit> = None;
    let edges = if hull.len() == 2 { 1 } else { hull.len() };
    for i in 0..edges {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let angle = (b.1 - a.1).atan2(b.0 - a.0);
        let (s, c) = angle.sin_cos();
        let mut min_x = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for &p in &hull {
            // rotate by -angle
            let x = c * p.0 + s * p.1;
            let y = -s * p.0 + c * p.1;
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
        let w = max_x - min_x;
        let h = max_y - min_y;
        if best.as_ref().map_or(true, |r| w * h < r.area()) {
            let mx = (min_x + max_x) / 2.0;
            let my = (min_y + max_y) / 2.0;
            best = Some(RectFit {
                cx: c * mx - s * my,
                cy: s * mx + c * my,
                w,
                h,
                gamma: angle,
            });
        }
    }
    let mut r = best.expect("hull has at least one edge");
    // Fold gamma into (-π/2, π/2]; quarter turns swap the extents.
    r.gamma %= PI;
    while r.gamma > PI / 2.0 {
        r.gamma -= PI / 2.0;
        std::mem::swap(&mut r.w, &mut r.h);
    }
    while r.gamma <= -PI / 2.0 {
        r.gamma += PI / 2.0;
        std::mem::swap(&mut r.w, &mut r.h);
    }
    Ok(r)
}

/// Axis-aligned bounds of a point set as a [`RectFit`] with `gamma = 0`.
pub fn axis_rect(points: &[Pt]) -> Result<RectFit> {
    if points.is_empty() {
        return Err(Error::Domain("bounding rectangle of no points".into()));
    }
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for &(x, y) in points {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    Ok(RectFit {
        cx: (min_x + max_x) / 2.0,
        cy: (min_y + max_y) / 2.0,
        w: max_x - min_x,
        h: max_y - min_y,
        gamma: 0.0,
    })
}

/// Shoelace area (absolute value).
pub fn polygon_area(poly: &[Pt]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.0 * b.1 - b.0 * a.1;
    }
    acc.abs() / 2.0
}

/// Intersection of two convex polygons (Sutherland–Hodgman against each
/// clip edge). Vertices may be in either winding.
pub fn convex_intersection(subject: &[Pt], clip: &[Pt]) -> Vec<Pt> {
    if subject.len() < 3 || clip.len() < 3 {
        return Vec::new();
    }
    // Ensure the clip polygon is counter-clockwise so "inside" is a
    // consistent half-plane test.
    let mut clip_ccw: Vec<Pt> = clip.to_vec();
    let signed: f64 = (0..clip.len())
        .map(|i| {
            let a = clip[i];
            let b = clip[(i + 1) % clip.len()];
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    if signed < 0.0 {
        clip_ccw.reverse();
    }
    let mut output: Vec<Pt> = subject.to_vec();
    for i in 0..clip_ccw.len() {
        if output.is_empty() {
            break;
        }
        let e0 = clip_ccw[i];
        let e1 = clip_ccw[(i + 1) % clip_ccw.len()];
        let input = std::mem::take(&mut output);
        let inside = |p: Pt| cross(e0, e1, p) >= -1e-12;
        let mut prev = *input.last().unwrap();
        for p in input {
            let p_in = inside(p);
            let prev_in = inside(prev);
            if p_in != prev_in {
                // edge crossing: intersect segment prev->p with line e0->e1
                let d1 = cross(e0, e1, prev);
                let d2 = cross(e0, e1, p);
                let t = d1 / (d1 - d2);
                output.push((prev.0 + t * (p.0 - prev.0), prev.1 + t * (p.1 - prev.1)));
            }
            if p_in {
                output.push(p);
            }
            prev = p;
        }
    }
    output
}

/// Largest circular gap of a set of values on a circle of circumference
/// `period`: returns `(gap, start_of_covering_arc)` where the arc of length
/// `period - gap` starting at `start` covers every value. Single-point sets
/// report a full-period gap.
pub fn largest_circular_gap(values: &[f64], period: f64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Domain("circular gap of empty set".into()));
    }
    let mut vs: Vec<f64> = values.iter().map(|v| v.rem_euclid(period)).collect();
    vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best_gap = period - (vs[vs.len() - 1] - vs[0]);
    let mut best_start = vs[0];
    for i in 1..vs.len() {
        let gap = vs[i] - vs[i - 1];
        if gap > best_gap {
            best_gap = gap;
            best_start = vs[i];
        }
    }
    Ok((best_gap, best_start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    /// Exhaustive rotation scan in small angle steps: the independent
    /// oracle for the minimum-area rectangle.
    fn rotation_scan_min_area(points: &[Pt], step_deg: f64) -> f64 {
        let mut best = f64::INFINITY;
        let mut angle: f64 = 0.0;
        while angle < 90.0 {
            let (s, c) = angle.to_radians().sin_cos();
            let mut min_x = f64::INFINITY;
            let mut max_x = f64::NEG_INFINITY;
            let mut min_y = f64::INFINITY;
            let mut max_y = f64::NEG_INFINITY;
            for &(x, y) in points {
                let rx = c * x + s * y;
                let ry = -s * x + c * y;
                min_x = min_x.min(rx);
                max_x = max_x.max(rx);
                min_y = min_y.min(ry);
                max_y = max_y.max(ry);
            }
            best = best.min((max_x - min_x) * (max_y - min_y));
            angle += step_deg;
        }
        best
    }

    #[test]
    fn hull_of_square_with_interior_points() {
        let pts = vec![
            (0.0, 0.0),
            (4.0, 0.0),
            (4.0, 4.0),
            (0.0, 4.0),
            (2.0, 2.0),
            (1.0, 3.0),
        ];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
    }

    #[test]
    fn min_rect_axis_aligned_rectangle() {
        let pts = vec![(10.0, 5.0), (30.0, 5.0), (30.0, 11.0), (10.0, 11.0)];
        let r = min_area_rect(&pts).unwrap();
        assert_abs_diff_eq!(r.area(), 120.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.cx, 20.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.cy, 8.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.gamma, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn min_rect_rotated_unit_square() {
        // unit square rotated 30 degrees: area stays 1, gamma recovers 30
        let g = 30.0_f64.to_radians();
        let (s, c) = g.sin_cos();
        let pts: Vec<Pt> = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
            .iter()
            .map(|&(x, y)| (c * x - s * y, s * x + c * y))
            .collect();
        let r = min_area_rect(&pts).unwrap();
        assert_abs_diff_eq!(r.area(), 1.0, epsilon = 1e-9);
        // a square's fit angle is defined modulo 90 degrees
        let folded = (r.gamma.to_degrees() + 180.0) % 90.0;
        assert_abs_diff_eq!(folded, 30.0, epsilon = 1e-6);
    }

    #[test]
    fn min_rect_matches_rotation_scan_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let pts: Vec<Pt> = (0..50)
                .map(|_| (rng.gen_range(-40.0..40.0), rng.gen_range(-15.0..55.0)))
                .collect();
            let fit = min_area_rect(&pts).unwrap().area();
            let scan = rotation_scan_min_area(&pts, 0.5);
            assert!(fit <= scan + 1e-9, "fit {fit} worse than scan {scan}");
            assert!(
                (scan - fit) <= 0.01 * scan,
                "fit {fit} vs scan {scan} differ by more than 1%"
            );
        }
    }

    #[test]
    fn min_rect_degenerate_inputs() {
        assert!(min_area_rect(&[]).is_err());
        let r = min_area_rect(&[(2.0, 3.0)]).unwrap();
        assert_eq!((r.w, r.h), (0.0, 0.0));
        let r = min_area_rect(&[(0.0, 0.0), (2.0, 2.0), (4.0, 4.0)]).unwrap();
        assert_abs_diff_eq!(r.area(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.w, (32.0_f64).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn intersection_of_half_overlapping_unit_squares() {
        let a = vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let b = vec![(0.5, 0.0), (1.5, 0.0), (1.5, 1.0), (0.5, 1.0)];
        let inter = convex_intersection(&a, &b);
        assert_abs_diff_eq!(polygon_area(&inter), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn intersection_disjoint_and_nested() {
        let a = vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let b = vec![(5.0, 5.0), (6.0, 5.0), (6.0, 6.0), (5.0, 6.0)];
        assert!(polygon_area(&convex_intersection(&a, &b)) < 1e-12);
        let inner = vec![(0.25, 0.25), (0.75, 0.25), (0.75, 0.75), (0.25, 0.75)];
        assert_abs_diff_eq!(
            polygon_area(&convex_intersection(&a, &inner)),
            0.25,
            epsilon = 1e-9
        );
    }

    #[test]
    fn intersection_winding_independent() {
        let a = vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let mut a_cw = a.clone();
        a_cw.reverse();
        let b = vec![(0.5, 0.5), (1.5, 0.5), (1.5, 1.5), (0.5, 1.5)];
        let i1 = polygon_area(&convex_intersection(&a, &b));
        let i2 = polygon_area(&convex_intersection(&a_cw, &b));
        assert_abs_diff_eq!(i1, 0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(i1, i2, epsilon = 1e-12);
    }

    #[test]
    fn circular_gap_basics() {
        let (gap, start) = largest_circular_gap(&[10.0, 20.0, 30.0], 360.0).unwrap();
        assert_abs_diff_eq!(gap, 340.0, epsilon = 1e-12);
        assert_abs_diff_eq!(start, 10.0, epsilon = 1e-12);

        // two clusters straddling the wrap point
        let vals = [350.0, 355.0, 2.0, 5.0];
        let (gap, start) = largest_circular_gap(&vals, 360.0).unwrap();
        assert_abs_diff_eq!(gap, 345.0, epsilon = 1e-12);
        assert_abs_diff_eq!(start, 350.0, epsilon = 1e-12);

        let (gap, _) = largest_circular_gap(&[42.0], 360.0).unwrap();
        assert_abs_diff_eq!(gap, 360.0, epsilon = 1e-12);
    }
}
