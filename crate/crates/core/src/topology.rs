//! Line degrees, vortex detection and axisymmetry of 3D fields.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::ComplexField;
use crate::grid::TorusGrid;
use crate::hydro::{increment, neighbour};

/// Cells whose corners all exceed this modulus are not scanned for zeros.
pub const VORTEX_THRESHOLD: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("operation needs a {expected}D field, got {got}D")]
    Dimension { expected: usize, got: usize },
    #[error("every grid line crosses a near-zero of the field")]
    NoValidLines,
}

/// Degrees along the two families of coordinate circles of a planar field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineDegrees {
    /// Majority degree of the circles running along `x_1`.
    pub d1: i64,
    /// Majority degree of the circles running along `x_2`.
    pub d2: i64,
    /// Smaller of the two per-family fractions of usable circles.
    pub fraction_valid: f64,
}

impl LineDegrees {
    /// Discrete sector test: zero degrees on a large enough share of circles.
    pub fn in_zero_sector(&self, grid: &TorusGrid) -> bool {
        let smallest = *grid.sizes().iter().min().unwrap() as f64;
        self.d1 == 0 && self.d2 == 0 && self.fraction_valid >= 1.0 - smallest.powf(-0.25)
    }
}

fn winding_of(points: impl Iterator<Item = Complex64> + Clone) -> i64 {
    let first = points.clone().next();
    let mut total = 0.0;
    let mut prev = None;
    for z in points {
        if let Some(p) = prev {
            total += increment(p, z);
        }
        prev = Some(z);
    }
    if let (Some(p), Some(f)) = (prev, first) {
        total += increment(p, f);
    }
    (total / (2.0 * PI)).round() as i64
}

fn majority(counts: &HashMap<i64, usize>) -> Option<i64> {
    counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.abs().cmp(&a.0.abs())).then(b.0.cmp(a.0)))
        .map(|(&d, _)| d)
}

/// Winding of `v/|v|` along every coordinate circle, reduced to a majority
/// degree per family over circles where `|v| > VORTEX_THRESHOLD`.
pub fn line_degrees(v: &ComplexField) -> Result<LineDegrees, TopologyError> {
    let grid = v.grid();
    if grid.dim() != 2 {
        return Err(TopologyError::Dimension {
            expected: 2,
            got: grid.dim(),
        });
    }
    let (n1, n2) = (grid.sizes()[0], grid.sizes()[1]);
    let vals = v.values();
    let mut fractions = [0.0; 2];
    let mut degrees = [0i64; 2];
    for axis in 0..2 {
        let (len, lines) = if axis == 0 { (n1, n2) } else { (n2, n1) };
        let at = |line: usize, k: usize| {
            if axis == 0 {
                vals[k * n2 + line]
            } else {
                vals[line * n2 + k]
            }
        };
        let mut counts = HashMap::new();
        let mut valid = 0;
        for line in 0..lines {
            let ok = (0..len).all(|k| at(line, k).norm() > VORTEX_THRESHOLD);
            if !ok {
                continue;
            }
            valid += 1;
            *counts.entry(winding_of((0..len).map(|k| at(line, k)))).or_insert(0) += 1;
        }
        fractions[axis] = valid as f64 / lines as f64;
        degrees[axis] = majority(&counts).unwrap_or(0);
        if valid == 0 {
            return Err(TopologyError::NoValidLines);
        }
    }
    Ok(LineDegrees {
        d1: degrees[0],
        d2: degrees[1],
        fraction_valid: fractions[0].min(fractions[1]),
    })
}

/// One detected zero. In 3D `tangent` is the oriented unit normal of the
/// pierced face, i.e. the local line direction up to the grid resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub position: Vec<f64>,
    pub winding: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tangent: Option<[f64; 3]>,
    /// Index of the connected vortex line (3D) the point belongs to.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexLine {
    pub points: usize,
    pub closed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VortexSet {
    pub vortices: Vec<Vortex>,
    /// 3D only: connected vortex lines assembled from pierced faces.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lines: Vec<VortexLine>,
    /// 3D only: cells whose faces carry a nonzero net flux of windings.
    #[serde(default)]
    pub open_cells: usize,
}

impl VortexSet {
    /// Point vortices in 2D, vortex lines in 3D.
    pub fn count(&self) -> usize {
        if self.vortices.iter().any(|v| v.tangent.is_some()) {
            self.lines.len()
        } else {
            self.vortices.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.vortices.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("vortex set serializes")
    }
}

/// Bilinear zero of the cell with corners `c[0]=(0,0), c[1]=(1,0), c[2]=(1,1), c[3]=(0,1)`,
/// in local coordinates clamped to the unit square.
fn bilinear_zero(c: [Complex64; 4]) -> (f64, f64) {
    let f = |s: f64, t: f64| {
        c[0] * ((1.0 - s) * (1.0 - t)) + c[1] * (s * (1.0 - t)) + c[2] * (s * t) + c[3] * ((1.0 - s) * t)
    };
    let (mut s, mut t) = (0.5, 0.5);
    for _ in 0..30 {
        let val = f(s, t);
        let ds = (c[1] - c[0]) * (1.0 - t) + (c[2] - c[3]) * t;
        let dt = (c[3] - c[0]) * (1.0 - s) + (c[2] - c[1]) * s;
        let det = ds.re * dt.im - ds.im * dt.re;
        if det.abs() < 1e-300 {
            break;
        }
        let step_s = (val.re * dt.im - val.im * dt.re) / det;
        let step_t = (ds.re * val.im - ds.im * val.re) / det;
        s = (s - step_s).clamp(0.0, 1.0);
        t = (t - step_t).clamp(0.0, 1.0);
        if step_s.abs() + step_t.abs() < 1e-14 {
            break;
        }
    }
    (s, t)
}

fn wrap(x: f64, half: f64) -> f64 {
    let l = 2.0 * half;
    (x + half).rem_euclid(l) - half
}

/// Residue of the face at sample `i` spanned by axes `(a, b)`, with the
/// bilinear zero position when nonzero.
fn face_residue(grid: &TorusGrid, vals: &[Complex64], i: usize, a: usize, b: usize) -> Option<(i64, Vec<f64>)> {
    let i1 = neighbour(grid, i, a, 1);
    let i2 = neighbour(grid, i1, b, 1);
    let i3 = neighbour(grid, i, b, 1);
    let c = [vals[i], vals[i1], vals[i2], vals[i3]];
    if c.iter().all(|z| z.norm() >= VORTEX_THRESHOLD) {
        return None;
    }
    let total = increment(c[0], c[1]) + increment(c[1], c[2]) + increment(c[2], c[3]) + increment(c[3], c[0]);
    let w = (total / (2.0 * PI)).round() as i64;
    if w == 0 {
        return None;
    }
    let (s, t) = bilinear_zero(c);
    let mut pos = grid.position(i)[..grid.dim()].to_vec();
    pos[a] = wrap(pos[a] + s * grid.spacings()[a], grid.half_periods()[a]);
    pos[b] = wrap(pos[b] + t * grid.spacings()[b], grid.half_periods()[b]);
    Some((w, pos))
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Phase-residue scan: plaquettes in 2D, cell faces in 3D.
pub fn detect_vortices(v: &ComplexField) -> VortexSet {
    let grid = v.grid();
    let vals = v.values();
    if grid.dim() == 2 {
        let vortices = (0..vals.len())
            .filter_map(|i| face_residue(grid, vals, i, 0, 1))
            .map(|(w, position)| Vortex {
                position,
                winding: w,
                tangent: None,
                line: None,
            })
            .collect();
        return VortexSet {
            vortices,
            lines: Vec::new(),
            open_cells: 0,
        };
    }

    // face key = 3 * sample + normal axis
    let mut faces: HashMap<usize, usize> = HashMap::new();
    let mut vortices = Vec::new();
    for i in 0..vals.len() {
        for normal in 0..3 {
            let (a, b) = ((normal + 1) % 3, (normal + 2) % 3);
            if let Some((w, position)) = face_residue(grid, vals, i, a, b) {
                let mut tangent = [0.0; 3];
                tangent[normal] = w.signum() as f64;
                faces.insert(3 * i + normal, vortices.len());
                vortices.push(Vortex {
                    position,
                    winding: w,
                    tangent: Some(tangent),
                    line: None,
                });
            }
        }
    }
    let mut uf = UnionFind {
        parent: (0..vortices.len()).collect(),
    };
    let mut open_cube = vec![false; vortices.len()];
    let mut cubes: Vec<usize> = faces.keys().flat_map(|&k| {
        let (i, normal) = (k / 3, k % 3);
        [i, neighbour(grid, i, normal, -1)]
    }).collect();
    cubes.sort_unstable();
    cubes.dedup();
    let mut open_cells = 0;
    for &cube in &cubes {
        let mut members = Vec::new();
        let mut flux = 0;
        for normal in 0..3 {
            let upper = neighbour(grid, cube, normal, 1);
            if let Some(&f) = faces.get(&(3 * upper + normal)) {
                members.push(f);
                flux += vortices[f].winding;
            }
            if let Some(&f) = faces.get(&(3 * cube + normal)) {
                members.push(f);
                flux -= vortices[f].winding;
            }
        }
        for pair in members.windows(2) {
            uf.union(pair[0], pair[1]);
        }
        if flux != 0 {
            open_cells += 1;
            for &f in &members {
                open_cube[f] = true;
            }
        }
    }
    let mut roots: Vec<usize> = (0..vortices.len()).map(|f| uf.find(f)).collect();
    let mut label: HashMap<usize, usize> = HashMap::new();
    let mut order: Vec<usize> = (0..vortices.len()).collect();
    order.sort_by_key(|&f| roots[f]);
    for &f in &order {
        let next = label.len();
        label.entry(roots[f]).or_insert(next);
    }
    let mut lines = vec![
        VortexLine {
            points: 0,
            closed: true
        };
        label.len()
    ];
    for f in 0..vortices.len() {
        roots[f] = label[&roots[f]];
        vortices[f].line = Some(roots[f]);
        lines[roots[f]].points += 1;
        if open_cube[f] {
            lines[roots[f]].closed = false;
        }
    }
    VortexSet {
        vortices,
        lines,
        open_cells,
    }
}

/// Periodic bilinear interpolation of `v` in the `(x_2, x_3)` plane of a 3D
/// field, at fixed first index `i0`.
fn sample_plane(grid: &TorusGrid, vals: &[Complex64], i0: usize, y: f64, z: f64) -> Complex64 {
    let (n2, n3) = (grid.sizes()[1], grid.sizes()[2]);
    let (h2, h3) = (grid.spacings()[1], grid.spacings()[2]);
    let (a2, a3) = (grid.half_periods()[1], grid.half_periods()[2]);
    let fy = (y + a2) / h2;
    let fz = (z + a3) / h3;
    let jy = fy.floor();
    let jz = fz.floor();
    let (ty, tz) = (fy - jy, fz - jz);
    let iy = (jy as i64).rem_euclid(n2 as i64) as usize;
    let iz = (jz as i64).rem_euclid(n3 as i64) as usize;
    let iy1 = (iy + 1) % n2;
    let iz1 = (iz + 1) % n3;
    let at = |j: usize, k: usize| vals[(i0 * n2 + j) * n3 + k];
    at(iy, iz) * ((1.0 - ty) * (1.0 - tz))
        + at(iy1, iz) * (ty * (1.0 - tz))
        + at(iy1, iz1) * (ty * tz)
        + at(iy, iz1) * ((1.0 - ty) * tz)
}

/// Number of discrete rotations averaged by [`axisymmetry_deviation`].
pub const ROTATIONS: usize = 16;

/// `|v - Av| / |v - mean(v)|`, where `A` averages `v` over `ROTATIONS`
/// rotations about the line parallel to `x_1` through `axis_point`
/// (only its `x_2, x_3` entries matter), with bilinear in-plane interpolation.
pub fn axisymmetry_deviation(v: &ComplexField, axis_point: &[f64]) -> Result<f64, TopologyError> {
    let grid = v.grid();
    if grid.dim() != 3 {
        return Err(TopologyError::Dimension {
            expected: 3,
            got: grid.dim(),
        });
    }
    let vals = v.values();
    let (y0, z0) = (axis_point[1], axis_point[2]);
    let mean = vals.iter().sum::<Complex64>() / vals.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &z) in vals.iter().enumerate() {
        let idx = grid.unravel(i);
        let x = grid.position(i);
        let (dy, dz) = (wrap(x[1] - y0, grid.half_periods()[1]), wrap(x[2] - z0, grid.half_periods()[2]));
        let mut avg = Complex64::default();
        for k in 0..ROTATIONS {
            let th = 2.0 * PI * k as f64 / ROTATIONS as f64;
            let (s, c) = th.sin_cos();
            avg += sample_plane(grid, vals, idx[0], y0 + c * dy - s * dz, z0 + s * dy + c * dz);
        }
        avg /= ROTATIONS as f64;
        num += (z - avg).norm_sqr();
        den += (z - mean).norm_sqr();
    }
    Ok((num / den.max(f64::MIN_POSITIVE)).sqrt())
}

/// Centre of a localized disturbance: circular mean per axis weighted by `|1 - |v|^2|`.
pub fn disturbance_centre(v: &ComplexField) -> Vec<f64> {
    let grid = v.grid();
    let eta = v.eta();
    (0..grid.dim())
        .map(|axis| {
            let a = grid.half_periods()[axis];
            let mut acc = Complex64::default();
            for (i, e) in eta.iter().enumerate() {
                let x = grid.position(i)[axis];
                acc += Complex64::from_polar(e.abs(), PI * x / a);
            }
            if acc.norm() < 1e-300 {
                0.0
            } else {
                acc.arg() * a / PI
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_band_limited;

    fn vortex_at(grid: &TorusGrid, cx: f64, cy: f64) -> ComplexField {
        ComplexField::from_fn(grid, |x| {
            let z = Complex64::new(x[0] - cx, x[1] - cy);
            z / (z.norm_sqr() + 2.0).sqrt()
        })
        .unwrap()
    }

    #[test]
    fn uniform_field_has_zero_degrees() {
        let g = TorusGrid::torus(2, &[16, 16], 1.0).unwrap();
        let v = ComplexField::constant(&g, Complex64::new(1.0, 0.0));
        let d = line_degrees(&v).unwrap();
        assert_eq!((d.d1, d.d2, d.fraction_valid), (0, 0, 1.0));
        assert!(detect_vortices(&v).is_empty());
    }

    #[test]
    fn plane_winding() {
        let n = 3.0;
        let g = TorusGrid::torus(2, &[32, 16], n).unwrap();
        let v = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, x[0] / n)).unwrap();
        let d = line_degrees(&v).unwrap();
        assert_eq!((d.d1, d.d2, d.fraction_valid), (1, 0, 1.0));
        let w = v.scale(Complex64::from_polar(1.0, 2.0));
        assert_eq!(line_degrees(&w).unwrap(), d);
    }

    #[test]
    fn pair_field_degrees() {
        let g = TorusGrid::torus(2, &[64, 64], 4.0).unwrap();
        let d = 6.0;
        let v = ComplexField::from_fn(&g, |x| {
            let a = Complex64::new(x[0], x[1] - d / 2.0);
            let b = Complex64::new(x[0], x[1] + d / 2.0).conj();
            a * b / ((a.norm_sqr() + 2.0) * (b.norm_sqr() + 2.0)).sqrt()
        })
        .unwrap();
        let deg = line_degrees(&v).unwrap();
        assert_eq!((deg.d1, deg.d2), (0, 0));
        assert!(deg.fraction_valid < 1.0);
        let set = detect_vortices(&v);
        assert_eq!(set.count(), 2);
        let mut w: Vec<i64> = set.vortices.iter().map(|v| v.winding).collect();
        w.sort();
        assert_eq!(w, vec![-1, 1]);
    }

    #[test]
    fn single_vortex_location_and_sign() {
        let g = TorusGrid::torus(2, &[64, 64], 2.0).unwrap();
        let (cx, cy) = (0.37, -0.81);
        let v = vortex_at(&g, cx, cy);
        let set = detect_vortices(&v);
        let near: Vec<_> = set
            .vortices
            .iter()
            .filter(|v| (v.position[0] - cx).hypot(v.position[1] - cy) < 2.0)
            .collect();
        assert_eq!(near.len(), 1);
        assert_eq!(near[0].winding, 1);
        let h = g.spacings()[0];
        assert!((near[0].position[0] - cx).abs() < h && (near[0].position[1] - cy).abs() < h);
        assert!((near[0].position[0] - cx).hypot(near[0].position[1] - cy) < 0.05);
    }

    #[test]
    fn degrees_reject_3d() {
        let g = TorusGrid::torus(3, &[8, 8, 8], 1.0).unwrap();
        let v = ComplexField::constant(&g, Complex64::new(1.0, 0.0));
        assert!(line_degrees(&v).is_err());
        assert_eq!(detect_vortices(&v).count(), 0);
    }

    #[test]
    fn all_lines_blocked() {
        let g = TorusGrid::torus(2, &[16, 16], 1.0).unwrap();
        let v = ComplexField::constant(&g, Complex64::new(0.1, 0.0));
        assert_eq!(line_degrees(&v), Err(TopologyError::NoValidLines));
    }

    fn ring(grid: &TorusGrid, r0: f64) -> ComplexField {
        ComplexField::from_fn(grid, |x| {
            let r = x[1].hypot(x[2]);
            let a = Complex64::new(x[0], r - r0);
            let b = Complex64::new(x[0], r + r0).conj();
            a * b / ((a.norm_sqr() + 2.0) * (b.norm_sqr() + 2.0)).sqrt()
        })
        .unwrap()
    }

    #[test]
    fn ring_is_one_closed_line() {
        let g = TorusGrid::torus(3, &[48, 48, 48], 4.0).unwrap();
        let v = ring(&g, 6.0);
        let set = detect_vortices(&v);
        assert_eq!(set.count(), 1);
        assert!(set.lines[0].closed);
        assert_eq!(set.open_cells, 0);
        let h = g.spacings()[1];
        for p in &set.vortices {
            assert!(p.position[0].abs() < h);
            assert!((p.position[1].hypot(p.position[2]) - 6.0).abs() < h);
        }
    }

    #[test]
    fn axisymmetric_field_has_small_deviation() {
        let g = TorusGrid::torus(3, &[64, 64, 64], 3.0).unwrap();
        let v = ComplexField::from_fn(&g, |x| {
            let r2 = x[1] * x[1] + x[2] * x[2];
            Complex64::new(1.0 - 0.5 * (-(x[0] * x[0] + r2) / 8.0).exp(), 0.3 * x[0] * (-r2 / 6.0).exp())
        })
        .unwrap();
        let dev = axisymmetry_deviation(&v, &[0.0, 0.0, 0.0]).unwrap();
        assert!(dev <= 1e-2, "{dev}");
        let noise = random_band_limited(&g, 4, 12, 0.5);
        assert!(axisymmetry_deviation(&noise, &[0.0, 0.0, 0.0]).unwrap() > 0.3);
    }

    #[test]
    fn centre_of_shifted_bump() {
        let g = TorusGrid::torus(2, &[64, 64], 3.0).unwrap();
        let v = ComplexField::from_fn(&g, |x| {
            let d2 = (x[0] - 2.0).powi(2) + (x[1] + 1.0).powi(2);
            Complex64::new(1.0 - 0.5 * (-d2).exp(), 0.0)
        })
        .unwrap();
        let c = disturbance_centre(&v);
        assert!((c[0] - 2.0).abs() < 0.05 && (c[1] + 1.0).abs() < 0.05, "{c:?}");
    }
}
