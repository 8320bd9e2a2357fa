//! Synthetic charge-stability maps and symmetric-axis calibration from them.

use rayon::prelude::*;
use serde_json::json;

use super::{ControlFrame, DeviceModel};
use crate::data::{Axis, ScanGrid};
use crate::error::{Error, Result};

/// Readout contrast of a Rabi oscillation about an axis tipped 120° from the
/// pole.
const CONTRAST: f64 = 0.75;
/// Pixels this close to 1 count as outside the cell.
const SATURATION_TOL: f64 = 1e-12;

pub const P1_AXIS: &str = "V_P1";
pub const P2_AXIS: &str = "V_P2";

/// Singlet probability over the (P1, P2) plane after `evolve_time` ns of
/// exchange at fixed V_X1; other gates stay at V₀. Outside the (1,1) cell the
/// probability saturates at 1.
pub fn synth_stability_map(d: &DeviceModel, p1: &[f64], p2: &[f64], v_x1: f64, evolve_time: f64) -> Result<ScanGrid> {
    if p1.is_empty() || p2.is_empty() {
        return Err(Error::invalid("map axes must be nonempty"));
    }
    if !(evolve_time >= 0.0) {
        return Err(Error::invalid("evolve time must be nonnegative"));
    }
    let (i1, i2, ix) = d.key_gates();
    let rows: Vec<Result<Vec<f64>>> = p2
        .par_iter()
        .map(|&y| {
            let mut v = d.v0().to_vec();
            v[i2] = y;
            v[ix] = v_x1;
            p1.iter()
                .map(|&x| {
                    v[i1] = x;
                    if !d.in_cell(&v)? {
                        return Ok(1.0);
                    }
                    let j = d.exchange_of_voltages(&v)?;
                    Ok(1.0 - 0.5 * CONTRAST * (1.0 - (std::f64::consts::TAU * j * evolve_time).cos()))
                })
                .collect()
        })
        .collect();
    let mut data = Vec::with_capacity(p1.len() * p2.len());
    for r in rows {
        data.extend(r?);
    }
    let mut g = ScanGrid::new(
        Axis::new(P1_AXIS, "mV", p1.to_vec()),
        Axis::new(P2_AXIS, "mV", p2.to_vec()),
        "p_singlet",
        "",
        data,
    )?;
    g.metadata.insert("v_x1".into(), json!(v_x1));
    g.metadata.insert("evolve_time_ns".into(), json!(evolve_time));
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub frame: ControlFrame,
    /// Detected cell centers (V_P1, V_P2) in each map, mV.
    pub centers: [[f64; 2]; 2],
    pub v_x1: [f64; 2],
}

/// Detected (1,1) cell in one map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub center: [f64; 2],
    /// Unit normal of the (2,0)/(0,2) boundaries, P1 component positive.
    pub detuning_normal: [f64; 2],
}

/// Symmetric axes from two stability maps taken at different V_X1.
///
/// In each map the cell is every pixel not reached by filling the saturated
/// exterior from the map border. Its convex hull is reduced to a
/// quadrilateral, and each pair of opposite edges is refined by a
/// shared-normal total-least-squares fit to the midpoints between boundary
/// pixels and their exterior neighbours. The pair whose normal lies closer to
/// (1, −1) is taken as the detuning boundaries.
pub fn calibrate_axes(d: &DeviceModel, map_lo: &ScanGrid, map_hi: &ScanGrid) -> Result<CalibrationReport> {
    let x_lo = map_lo.meta_f64("v_x1").ok_or_else(|| Error::Calibration("map lacks v_x1 metadata".into()))?;
    let x_hi = map_hi.meta_f64("v_x1").ok_or_else(|| Error::Calibration("map lacks v_x1 metadata".into()))?;
    if x_lo == x_hi {
        return Err(Error::Calibration("maps must be taken at different V_X1".into()));
    }
    let a = locate_cell(map_lo)?;
    let b = locate_cell(map_hi)?;
    let (i1, i2, ix) = d.key_gates();
    let n = d.n_gates();

    let mut u_det = vec![0.0; n];
    // Average the two orientation estimates.
    let s = if a.detuning_normal[0] * b.detuning_normal[0] + a.detuning_normal[1] * b.detuning_normal[1] < 0.0 {
        -1.0
    } else {
        1.0
    };
    u_det[i1] = a.detuning_normal[0] + s * b.detuning_normal[0];
    u_det[i2] = a.detuning_normal[1] + s * b.detuning_normal[1];

    let mut u_exch = vec![0.0; n];
    let sign = (x_hi - x_lo).signum();
    u_exch[i1] = sign * (b.center[0] - a.center[0]);
    u_exch[i2] = sign * (b.center[1] - a.center[1]);
    u_exch[ix] = sign * (x_hi - x_lo);

    let mut v0 = d.v0().to_vec();
    v0[i1] = a.center[0];
    v0[i2] = a.center[1];
    v0[ix] = x_lo;
    Ok(CalibrationReport {
        frame: ControlFrame::new(u_det, u_exch, v0)?,
        centers: [a.center, b.center],
        v_x1: [x_lo, x_hi],
    })
}

pub fn locate_cell(g: &ScanGrid) -> Result<Cell> {
    if g.x.name != P1_AXIS || g.y.name != P2_AXIS {
        return Err(Error::Calibration(format!("map axes must be {P1_AXIS} and {P2_AXIS}")));
    }
    let (nx, ny) = (g.nx(), g.ny());
    if nx < 3 || ny < 3 {
        return Err(Error::Calibration("map too small".into()));
    }
    // The cell is whatever the saturated exterior does not reach. Filling
    // from the border keeps bright fringes inside the cell, which a level
    // threshold would cut out near the edges.
    let saturated = |i: usize| g.data[i] >= 1.0 - SATURATION_TOL;
    let mut outside = vec![false; nx * ny];
    let mut stack = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            if ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1 {
                let i = iy * nx + ix;
                if !saturated(i) {
                    return Err(Error::Calibration("cell boundary is not closed within the map".into()));
                }
                outside[i] = true;
                stack.push(i);
            }
        }
    }
    while let Some(i) = stack.pop() {
        let (ix, iy) = (i % nx, i / nx);
        let mut visit = |j: usize| {
            if !outside[j] && saturated(j) {
                outside[j] = true;
                stack.push(j);
            }
        };
        if ix > 0 {
            visit(i - 1);
        }
        if ix + 1 < nx {
            visit(i + 1);
        }
        if iy > 0 {
            visit(i - nx);
        }
        if iy + 1 < ny {
            visit(i + nx);
        }
    }
    let pos = |i: usize| [g.x.values[i % nx], g.y.values[i / nx]];
    let dark: Vec<[f64; 2]> = (0..nx * ny).filter(|&i| !outside[i]).map(pos).collect();
    if dark.is_empty() {
        return Err(Error::Calibration("no (1,1) cell in map: every pixel is saturated".into()));
    }
    // Edge samples: midpoints of each inside/outside neighbour pair, which
    // straddle the true boundary.
    let mut edge = Vec::new();
    for i in (0..nx * ny).filter(|&i| !outside[i]) {
        // Border pixels are all outside, so the neighbours exist.
        let p = pos(i);
        for j in [i - 1, i + 1, i - nx, i + nx] {
            if outside[j] {
                let q = pos(j);
                edge.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            }
        }
    }
    let hull = convex_hull(&dark);
    if hull.len() < 4 {
        return Err(Error::Calibration("too few cell pixels to outline a boundary".into()));
    }
    let quad = simplify(hull, 4);
    let pitch = pitch(&g.x.values).max(pitch(&g.y.values));

    // Edge k joins quad[k] and quad[k+1]; pair (0, 2) and pair (1, 3).
    let mut lines = Vec::with_capacity(2);
    for (e0, e1) in [(0, 2), (1, 3)] {
        // Simplification can blunt corners and tilt the seed, so start wide;
        // the edge samples form a thin curve and a wide band stays clean.
        let (mut l0, mut l1) = (seed_line(&quad, e0), seed_line(&quad, e1));
        let mut fit = None;
        for width in [6.0, 1.5, 1.0] {
            let f =
                fit_parallel(&band(&edge, &l0, &quad, e0, width * pitch), &band(&edge, &l1, &quad, e1, width * pitch))?;
            l0 = Line { n: f.n, c: f.c0 };
            l1 = Line { n: f.n, c: f.c1 };
            fit = Some(f);
        }
        let fit = fit.expect("at least one pass");
        lines.push(fit);
    }
    let diag = [std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2];
    let align = |n: [f64; 2]| (n[0] * diag[0] + n[1] * diag[1]).abs();
    let (det, com) = if align(lines[0].n) >= align(lines[1].n) { (lines[0], lines[1]) } else { (lines[1], lines[0]) };

    // Midlines n·x = (c0 + c1)/2 intersect at the parallelogram centroid.
    let (a, b) = (det.n, com.n);
    let (ca, cb) = (0.5 * (det.c0 + det.c1), 0.5 * (com.c0 + com.c1));
    let detm = a[0] * b[1] - a[1] * b[0];
    if detm.abs() < 1e-6 {
        return Err(Error::Calibration("cell boundaries are parallel".into()));
    }
    let center = [(ca * b[1] - cb * a[1]) / detm, (a[0] * cb - b[0] * ca) / detm];
    let s = if det.n[0] < 0.0 { -1.0 } else { 1.0 };
    Ok(Cell { center, detuning_normal: [s * det.n[0], s * det.n[1]] })
}

fn pitch(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    ((v[v.len() - 1] - v[0]) / (v.len() - 1) as f64).abs()
}

/// Line n·x = c with unit normal n.
#[derive(Debug, Clone, Copy)]
struct Line {
    n: [f64; 2],
    c: f64,
}

fn seed_line(quad: &[[f64; 2]], k: usize) -> Line {
    let (p, q) = (quad[k], quad[(k + 1) % quad.len()]);
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    let len = dx.hypot(dy);
    let n = [-dy / len, dx / len];
    Line { n, c: n[0] * p[0] + n[1] * p[1] }
}

/// Points within `width` of the line whose projection falls in the middle
/// 80% of quad edge `k`, away from the corners.
fn band(points: &[[f64; 2]], line: &Line, quad: &[[f64; 2]], k: usize, width: f64) -> Vec<[f64; 2]> {
    let (p, q) = (quad[k], quad[(k + 1) % quad.len()]);
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    let len2 = dx * dx + dy * dy;
    points
        .iter()
        .copied()
        .filter(|x| {
            let dist = (line.n[0] * x[0] + line.n[1] * x[1] - line.c).abs();
            let t = ((x[0] - p[0]) * dx + (x[1] - p[1]) * dy) / len2;
            dist <= width && (0.1..=0.9).contains(&t)
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct ParallelFit {
    n: [f64; 2],
    c0: f64,
    c1: f64,
}

/// Two parallel lines sharing one normal, by total least squares on the
/// pooled within-set scatter.
fn fit_parallel(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<ParallelFit> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Calibration("too few boundary pixels on a cell edge".into()));
    }
    let mean = |s: &[[f64; 2]]| {
        let k = s.len() as f64;
        [s.iter().map(|p| p[0]).sum::<f64>() / k, s.iter().map(|p| p[1]).sum::<f64>() / k]
    };
    let (ma, mb) = (mean(a), mean(b));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (set, m) in [(a, ma), (b, mb)] {
        for p in set {
            let (x, y) = (p[0] - m[0], p[1] - m[1]);
            sxx += x * x;
            sxy += x * y;
            syy += y * y;
        }
    }
    // Eigenvector of the smaller eigenvalue of [[sxx, sxy], [sxy, syy]].
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let n = [-theta.sin(), theta.cos()];
    Ok(ParallelFit { n, c0: n[0] * ma[0] + n[1] * ma[1], c1: n[0] * mb[0] + n[1] * mb[1] })
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (Andrew's monotone chain), collinear points
/// dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for &q in &p {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
            hull.pop();
        }
        hull.push(q);
    }
    let lower = hull.len() + 1;
    for &q in p.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
            hull.pop();
        }
        hull.push(q);
    }
    hull.pop();
    hull
}

/// Visvalingam–Whyatt reduction of a closed polygon to `keep` vertices.
fn simplify(mut poly: Vec<[f64; 2]>, keep: usize) -> Vec<[f64; 2]> {
    while poly.len() > keep {
        let n = poly.len();
        let (k, _) = (0..n)
            .map(|k| (k, cross(poly[(k + n - 1) % n], poly[k], poly[(k + 1) % n]).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("polygon is nonempty");
        poly.remove(k);
    }
    poly
}
