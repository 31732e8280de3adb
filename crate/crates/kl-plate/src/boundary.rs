//! Clamped, supported and free boundary conditions on the physical sides of
//! component grids.
//!
//! Each physical boundary point carries two closure equations beyond the
//! interior scheme: a Dirichlet value plus a normal-slope condition
//! (clamped), a Dirichlet value plus a bending-moment condition (supported),
//! or moment plus shear conditions (free, where the boundary point itself
//! evolves under the plate equation). The remaining ghost points - second
//! layers, corner quadrants, and the ghost cells under interpolation columns
//! - are closed by fifth-order one-sided extrapolation, and free-free grid
//! corners by a vanishing cross derivative.
//!
//! Boundary-normal derivatives are taken along grid lines: every in-scope
//! map is boundary-fitted and orthogonal at its physical sides, so the
//! normal reduces to a scaled reference derivative. Tangential terms follow
//! the surface-splitting convention w_tt = lap(w) - w_nn, which on circular
//! sides produces the usual curvature terms (w_r / rho etc.).
//!
//! All closure equations of one grid are solved simultaneously through a
//! prefactored dense LU: moment and shear rows read tangential neighbors,
//! which near corners are ghost unknowns of the adjacent side, so a staged
//! sweep cannot reach round-off-level condition residuals. The caller
//! contract per step is: update evolution points, set Dirichlet values,
//! apply grid-to-grid interpolation, then solve the ghost system.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};

use crate::compgrid::{ComponentGrid, PointClass, SideKind};
use crate::discretization::{w_d1, w_d2, w_d3};
use crate::error::{Error, Result};
use crate::mapping::Mapping;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcKind {
    Clamped,
    Supported,
    Free,
}

impl std::str::FromStr for BcKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clamped" => Ok(BcKind::Clamped),
            "supported" => Ok(BcKind::Supported),
            "free" => Ok(BcKind::Free),
            other => Err(Error::Config(format!("unknown boundary condition '{other}'"))),
        }
    }
}

impl std::fmt::Display for BcKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BcKind::Clamped => "clamped",
            BcKind::Supported => "supported",
            BcKind::Free => "free",
        })
    }
}

impl serde::Serialize for BcKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for BcKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = <String as serde::Deserialize>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-side assignment on one component grid; `None` on interpolation and
/// periodic sides.
#[derive(Clone, Copy, Debug)]
pub struct GridBc {
    pub sides: [[Option<BcKind>; 2]; 2],
}

impl GridBc {
    /// The same kind on every physical side.
    pub fn uniform(kind: BcKind, g: &ComponentGrid) -> Self {
        let mut sides = [[None; 2]; 2];
        for d in 0..2 {
            for e in 0..2 {
                if g.sides[d][e] == SideKind::Physical {
                    sides[d][e] = Some(kind);
                }
            }
        }
        GridBc { sides }
    }

    pub fn validate(&self, g: &ComponentGrid) -> Result<()> {
        for d in 0..2 {
            for e in 0..2 {
                match (g.sides[d][e], self.sides[d][e]) {
                    (SideKind::Physical, None) => {
                        return Err(Error::Config(format!(
                            "physical side ({d},{e}) has no boundary condition"
                        )))
                    }
                    (SideKind::Interp | SideKind::Periodic, Some(_)) => {
                        return Err(Error::Config(format!(
                            "side ({d},{e}) is not a physical boundary but carries a condition"
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    /// Outward normal derivative (clamped).
    Slope,
    /// w_nn + nu w_tt (supported and free).
    Moment,
    /// d/dn [ w_nn + (2 - nu) w_tt ] (free).
    Shear,
    /// w_xy at a free-free grid corner.
    CrossDeriv,
}

/// Geometry of a physical side at one boundary point, enough to evaluate the
/// continuous boundary operators on a reference solution.
#[derive(Clone, Copy, Debug)]
pub enum SideGeom {
    /// Axis-aligned side: `axis` is the normal direction (0 = x, 1 = y).
    Cartesian { axis: usize, sigma: f64 },
    /// Circular side of radius `rho`; the outward normal is `sigma` times
    /// the radial direction at angle `theta`.
    Circular { rho: f64, theta: f64, sigma: f64 },
}

/// A continuous boundary operator instance at one boundary point.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryOp {
    pub kind: OpKind,
    pub x: [f64; 2],
    pub geom: SideGeom,
    pub nu: f64,
}

/// Right-hand-side driver of one closure row.
#[derive(Clone, Debug)]
pub enum RowData {
    /// A physical condition: the data is the continuous operator applied to
    /// the reference solution (zero for homogeneous problems).
    Condition(BoundaryOp),
    /// A numerical closure (extrapolation): the data is the row's own
    /// stencil applied to reference point values, so reference solutions
    /// satisfy the discrete row exactly.
    Residual,
}

/// Boundary data source. `Homogeneous` serves plain initial-value runs;
/// reference-solution adapters provide manufactured or modal data.
pub trait BcData {
    /// Reference solution value at a physical point (ghost coordinates
    /// included, so the reference must extend smoothly off the domain).
    fn point(&self, x: [f64; 2]) -> f64;
    /// Continuous boundary operator applied to the reference solution.
    fn condition(&self, op: &BoundaryOp) -> f64;
}

pub struct Homogeneous;

impl BcData for Homogeneous {
    fn point(&self, _x: [f64; 2]) -> f64 {
        0.0
    }
    fn condition(&self, _op: &BoundaryOp) -> f64 {
        0.0
    }
}

/// Another data source scaled by a constant; the steppers use this to apply
/// the time factor of separable reference data (and its derivatives for
/// velocity and acceleration conditions).
pub struct Scaled<'a> {
    pub base: &'a dyn BcData,
    pub factor: f64,
}

impl BcData for Scaled<'_> {
    fn point(&self, x: [f64; 2]) -> f64 {
        self.factor * self.base.point(x)
    }
    fn condition(&self, op: &BoundaryOp) -> f64 {
        self.factor * self.base.condition(op)
    }
}

/// One linear closure equation, max-normalized: sum of coef * u = data.
#[derive(Clone, Debug)]
pub struct ClosureRow {
    /// (flat storage index, physical coordinates, coefficient)
    pub pts: Vec<(usize, [f64; 2], f64)>,
    pub data: RowData,
    /// Multiplies evaluated Condition data (the row normalization factor).
    pub scale: f64,
}

/// Prefactored boundary/ghost closure for one component grid.
pub struct GhostClosure {
    /// Boundary points with prescribed displacement, set directly from data.
    pub dirichlet: Vec<(usize, [f64; 2])>,
    /// Ghost unknowns (flat indices) in system order.
    pub unknowns: Vec<usize>,
    /// Closure rows, one per unknown.
    pub rows: Vec<ClosureRow>,
    col: HashMap<usize, usize>,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

const EXTRAP: [f64; 6] = [1.0, -5.0, 10.0, -10.0, 5.0, -1.0];

fn extrap_pts(start: [i64; 2], step: [i64; 2]) -> Vec<([i64; 2], f64)> {
    EXTRAP
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            ([start[0] + k as i64 * step[0], start[1] + k as i64 * step[1]], c)
        })
        .collect()
}

/// Tensor expansion of condition terms: each term is
/// (coefficient, normal stencil, tangential stencil) centered on `bpt`.
fn stencil_pts(
    d: usize,
    bpt: [i64; 2],
    terms: &[(f64, [f64; 5], [f64; 5])],
) -> Vec<([i64; 2], f64)> {
    let td = 1 - d;
    let mut pts = Vec::new();
    for &(coef, ns, ts) in terms {
        if coef == 0.0 {
            continue;
        }
        for (a, &na) in ns.iter().enumerate() {
            if na == 0.0 {
                continue;
            }
            for (b, &tb) in ts.iter().enumerate() {
                if tb == 0.0 {
                    continue;
                }
                let mut p = [0i64; 2];
                p[d] = bpt[d] + a as i64 - 2;
                p[td] = bpt[td] + b as i64 - 2;
                pts.push((p, coef * na * tb));
            }
        }
    }
    pts
}

/// Discretization of one physical condition at a boundary point of a side
/// with normal direction `d`, as (terms, side geometry).
#[allow(clippy::type_complexity)]
fn condition_terms(
    g: &ComponentGrid,
    d: usize,
    bpt: [i64; 2],
    sigma: f64,
    nu: f64,
    delta: f64,
    kind: OpKind,
) -> Result<(Vec<(f64, [f64; 5], [f64; 5])>, SideGeom)> {
    let td = 1 - d;
    let e0 = [0.0, 0.0, 1.0, 0.0, 0.0];
    let d1n = w_d1(g.h[d], delta);
    let d2n = w_d2(g.h[d], delta);
    let d3n = w_d3(g.h[d]);
    let d2t = w_d2(g.h[td], delta);
    match g.mapping {
        Mapping::Rectangle { x0, y0, x1, y1 } => {
            let l = [x1 - x0, y1 - y0];
            let (ln, lt) = (l[d], l[td]);
            let geom = SideGeom::Cartesian { axis: d, sigma };
            let terms = match kind {
                OpKind::Slope => vec![(sigma / ln, d1n, e0)],
                OpKind::Moment => {
                    vec![(1.0 / (ln * ln), d2n, e0), (nu / (lt * lt), e0, d2t)]
                }
                OpKind::Shear => vec![
                    (sigma / (ln * ln * ln), d3n, e0),
                    (sigma * (2.0 - nu) / (ln * lt * lt), d1n, d2t),
                ],
                OpKind::CrossDeriv => unreachable!("corner rows are assembled separately"),
            };
            Ok((terms, geom))
        }
        Mapping::Annulus { r0, r1, theta0, theta1 } => {
            if d != 0 {
                return Err(Error::Config(
                    "conditions on angular sides of ring grids are not supported".into(),
                ));
            }
            let dr = r1 - r0;
            let tau = theta1 - theta0;
            let rc = g.ref_coords(bpt);
            let rho = r0 + rc[0] * dr;
            let theta = theta0 + rc[1] * tau;
            let geom = SideGeom::Circular { rho, theta, sigma };
            let terms = match kind {
                OpKind::Slope => vec![(sigma / dr, d1n, e0)],
                // w_rr + nu (w_r / rho + w_tt / rho^2), theta in arc scale
                OpKind::Moment => vec![
                    (1.0 / (dr * dr), d2n, e0),
                    (nu / (dr * rho), d1n, e0),
                    (nu / (tau * tau * rho * rho), e0, d2t),
                ],
                // d/dn(lap w) + (1-nu) d/ds(d^2 w/dn ds):
                // w_rrr + w_rr/rho - w_r/rho^2 + (2-nu) w_rtt/rho^2
                // - (3-nu) w_tt/rho^3; only the twisting part carries the
                // (1-nu) factor, the rest is the radial Laplacian derivative
                // (check: for axisymmetric w this must reduce to d/dr(lap w))
                OpKind::Shear => {
                    vec![
                        (sigma / (dr * dr * dr), d3n, e0),
                        (sigma / (rho * dr * dr), d2n, e0),
                        (-sigma / (rho * rho * dr), d1n, e0),
                        (sigma * (2.0 - nu) / (rho * rho * dr * tau * tau), d1n, d2t),
                        (-sigma * (3.0 - nu) / (rho * rho * rho * tau * tau), e0, d2t),
                    ]
                }
                OpKind::CrossDeriv => unreachable!(),
            };
            Ok((terms, geom))
        }
    }
}

fn stored_range(g: &ComponentGrid, d: usize) -> std::ops::RangeInclusive<i64> {
    g.lo[d]..=g.lo[d] + g.ext[d] as i64 - 1
}

/// Build the closure system for one grid. `nu` enters the moment and shear
/// rows; `delta` selects the stencil family, matching the interior operator.
pub fn build_closure(
    g: &ComponentGrid,
    bc: &GridBc,
    nu: f64,
    delta: f64,
) -> Result<GhostClosure> {
    bc.validate(g)?;

    let mut unknowns = Vec::new();
    let mut col = HashMap::new();
    for p in g.points() {
        if g.class_at(p) == PointClass::Ghost {
            col.insert(g.index(p), unknowns.len());
            unknowns.push(g.index(p));
        }
    }

    let mut rows: Vec<ClosureRow> = Vec::new();
    let mut dirichlet = Vec::new();
    let mut dir_seen = vec![false; g.ext[0] * g.ext[1]];

    let push_row = |rows: &mut Vec<ClosureRow>, pts: Vec<([i64; 2], f64)>, data: RowData| {
        let mut map: BTreeMap<[i64; 2], f64> = BTreeMap::new();
        for (p, c) in pts {
            if c != 0.0 {
                *map.entry(p).or_insert(0.0) += c;
            }
        }
        let m = map.values().fold(0.0f64, |acc, &c| acc.max(c.abs()));
        let scale = 1.0 / m;
        let pts = map
            .into_iter()
            .filter(|&(_, c)| c != 0.0)
            .map(|(p, c)| (g.index(p), g.phys_coords(p), c * scale))
            .collect();
        rows.push(ClosureRow { pts, data, scale });
    };

    // side rows: one condition pair per boundary point
    for d in 0..2 {
        let td = 1 - d;
        for e in 0..2 {
            if g.sides[d][e] != SideKind::Physical {
                continue;
            }
            let kind = bc.sides[d][e].expect("validated");
            let ib = if e == 0 { 0 } else { g.n[d] as i64 };
            let sigma = if e == 0 { -1.0 } else { 1.0 };
            let inward: i64 = if e == 0 { 1 } else { -1 };
            for t in stored_range(g, td) {
                let mut bpt = [0i64; 2];
                bpt[d] = ib;
                bpt[td] = t;
                if g.class_at(bpt) != PointClass::Boundary {
                    continue;
                }
                let x = g.phys_coords(bpt);

                if kind != BcKind::Free {
                    let flat = g.index(bpt);
                    if !dir_seen[flat] {
                        dir_seen[flat] = true;
                        dirichlet.push((flat, x));
                    }
                }

                let first = match kind {
                    BcKind::Clamped => OpKind::Slope,
                    BcKind::Supported | BcKind::Free => OpKind::Moment,
                };
                let (terms, geom) = condition_terms(g, d, bpt, sigma, nu, delta, first)?;
                push_row(
                    &mut rows,
                    stencil_pts(d, bpt, &terms),
                    RowData::Condition(BoundaryOp { kind: first, x, geom, nu }),
                );

                if kind == BcKind::Free {
                    let (terms, geom) =
                        condition_terms(g, d, bpt, sigma, nu, delta, OpKind::Shear)?;
                    push_row(
                        &mut rows,
                        stencil_pts(d, bpt, &terms),
                        RowData::Condition(BoundaryOp { kind: OpKind::Shear, x, geom, nu }),
                    );
                } else {
                    // second ghost layer: fifth-order one-sided extrapolation
                    let mut start = bpt;
                    start[d] = ib - 2 * inward;
                    let mut step = [0i64; 2];
                    step[d] = inward;
                    push_row(&mut rows, extrap_pts(start, step), RowData::Residual);
                }
            }
        }
    }

    // corner quadrants between two physical sides
    if !g.periodic(0) && !g.periodic(1) {
        for e0 in 0..2usize {
            for e1 in 0..2usize {
                if g.sides[0][e0] != SideKind::Physical || g.sides[1][e1] != SideKind::Physical {
                    continue;
                }
                let cb = [
                    if e0 == 0 { 0 } else { g.n[0] as i64 },
                    if e1 == 0 { 0 } else { g.n[1] as i64 },
                ];
                if g.class_at(cb) != PointClass::Boundary {
                    continue; // cut away (the whole side is inactive)
                }
                let out = [if e0 == 0 { -1i64 } else { 1 }, if e1 == 0 { -1i64 } else { 1 }];
                let free_free = bc.sides[0][e0] == Some(BcKind::Free)
                    && bc.sides[1][e1] == Some(BcKind::Free)
                    && matches!(g.mapping, Mapping::Rectangle { .. });

                if free_free {
                    // vanishing cross derivative closes the inner corner ghost
                    let (lx, ly) = match g.mapping {
                        Mapping::Rectangle { x0, y0, x1, y1 } => (x1 - x0, y1 - y0),
                        _ => unreachable!(),
                    };
                    let d1r = w_d1(g.h[0], delta);
                    let d1s = w_d1(g.h[1], delta);
                    let mut pts = Vec::new();
                    for (a, &ca) in d1r.iter().enumerate() {
                        for (b, &cb2) in d1s.iter().enumerate() {
                            let c = ca * cb2 / (lx * ly);
                            if c != 0.0 {
                                pts.push(([cb[0] + a as i64 - 2, cb[1] + b as i64 - 2], c));
                            }
                        }
                    }
                    push_row(
                        &mut rows,
                        pts,
                        RowData::Condition(BoundaryOp {
                            kind: OpKind::CrossDeriv,
                            x: g.phys_coords(cb),
                            geom: SideGeom::Cartesian { axis: 0, sigma: 1.0 },
                            nu,
                        }),
                    );
                }

                let ghosts: &[[i64; 2]] = if free_free {
                    &[[2, 1], [1, 2], [2, 2]]
                } else {
                    &[[1, 1], [2, 1], [1, 2], [2, 2]]
                };
                for q in ghosts {
                    let start = [cb[0] + q[0] * out[0], cb[1] + q[1] * out[1]];
                    push_row(
                        &mut rows,
                        extrap_pts(start, [-out[0], -out[1]]),
                        RowData::Residual,
                    );
                }
            }
        }
    }

    // ghost cells under interpolation columns: extrapolate along the
    // physical direction through the interpolation points
    for d in 0..2 {
        let td = 1 - d;
        if g.periodic(td) {
            continue;
        }
        for e in 0..2 {
            if g.sides[d][e] != SideKind::Interp {
                continue;
            }
            let cols: [i64; 2] = if e == 0 {
                [-1, -2]
            } else {
                [g.n[d] as i64 + 1, g.n[d] as i64 + 2]
            };
            for e2 in 0..2 {
                if g.sides[td][e2] != SideKind::Physical {
                    continue;
                }
                let gts: [i64; 2] =
                    if e2 == 0 { [-1, -2] } else { [g.n[td] as i64 + 1, g.n[td] as i64 + 2] };
                let inward: i64 = if e2 == 0 { 1 } else { -1 };
                for &c in &cols {
                    for &gt in &gts {
                        let mut start = [0i64; 2];
                        start[d] = c;
                        start[td] = gt;
                        if g.class_at(start) != PointClass::Ghost {
                            continue;
                        }
                        let mut step = [0i64; 2];
                        step[td] = inward;
                        push_row(&mut rows, extrap_pts(start, step), RowData::Residual);
                    }
                }
            }
        }
    }

    if rows.len() != unknowns.len() {
        return Err(Error::GridConstruction(format!(
            "ghost closure has {} equations for {} unknowns",
            rows.len(),
            unknowns.len()
        )));
    }

    let lu = if unknowns.is_empty() {
        None
    } else {
        let n = unknowns.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (k, row) in rows.iter().enumerate() {
            for &(flat, _, c) in &row.pts {
                if let Some(&j) = col.get(&flat) {
                    a[(k, j)] += c;
                }
            }
        }
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(Error::SingularSystem("boundary ghost closure".into()));
        }
        Some(lu)
    };

    Ok(GhostClosure { dirichlet, unknowns, rows, col, lu })
}

impl GhostClosure {
    /// Write prescribed boundary values. Runs before interpolation so donor
    /// stencils read current boundary data.
    pub fn set_dirichlet(&self, u: &mut [f64], data: &dyn BcData) {
        for &(flat, x) in &self.dirichlet {
            u[flat] = data.point(x);
        }
    }

    /// Solve for every ghost unknown. Interior, boundary and interpolation
    /// values must be current.
    pub fn solve_ghosts(&self, u: &mut [f64], data: &dyn BcData) -> Result<()> {
        let Some(lu) = &self.lu else { return Ok(()) };
        let mut rhs = DVector::zeros(self.unknowns.len());
        for (k, row) in self.rows.iter().enumerate() {
            let d = match &row.data {
                RowData::Condition(op) => data.condition(op) * row.scale,
                RowData::Residual => {
                    row.pts.iter().map(|&(_, x, c)| c * data.point(x)).sum()
                }
            };
            let known: f64 = row
                .pts
                .iter()
                .filter(|(flat, _, _)| !self.col.contains_key(flat))
                .map(|&(flat, _, c)| c * u[flat])
                .sum();
            rhs[k] = d - known;
        }
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::SingularSystem("boundary ghost closure".into()))?;
        for (j, &flat) in self.unknowns.iter().enumerate() {
            u[flat] = sol[j];
        }
        Ok(())
    }

    /// Dirichlet assignment followed by the ghost solve (single-grid use;
    /// composite runs interleave interpolation between the two).
    pub fn apply(&self, u: &mut [f64], data: &dyn BcData) -> Result<()> {
        self.set_dirichlet(u, data);
        self.solve_ghosts(u, data)
    }

    /// Maximum residual of every discrete condition on `u`.
    pub fn residual(&self, u: &[f64], data: &dyn BcData) -> f64 {
        let mut r = 0.0f64;
        for &(flat, x) in &self.dirichlet {
            r = r.max((u[flat] - data.point(x)).abs());
        }
        for row in &self.rows {
            let d = match &row.data {
                RowData::Condition(op) => data.condition(op) * row.scale,
                RowData::Residual => {
                    row.pts.iter().map(|&(_, x, c)| c * data.point(x)).sum()
                }
            };
            let lhs: f64 = row.pts.iter().map(|&(flat, _, c)| c * u[flat]).sum();
            r = r.max((lhs - d).abs());
        }
        r
    }
}
