//! Component grids and composite overlapping grids.
//!
//! Each component is a logically rectangular grid with two ghost layers,
//! mapped from the unit square. Points are classified as
//! discretization (interior), boundary, ghost, interpolation, or unused.
//! Interpolation points take their values from a 5x5 (5 in 1D) tensor
//! Lagrange window on a donor component; donor windows contain only
//! discretization/boundary points, so interpolation is explicit.

use crate::error::{Error, Result};
use crate::mapping::Mapping;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PointClass {
    /// Never read, never written (cut-away regions).
    Unused,
    /// Updated by the PDE stencil.
    Interior,
    /// On a physical boundary side; Dirichlet-set or PDE-updated per BC kind.
    Boundary,
    /// Outside a physical side; closed by BC/extrapolation equations.
    Ghost,
    /// Value supplied by interpolation from a donor component.
    Interp,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SideKind {
    Physical,
    /// Overlap-interior edge: two layers of interpolation points sit at the
    /// ghost-position indices of this side and the edge index itself stays a
    /// regular discretization point.
    Interp,
    Periodic,
}

/// One logically rectangular component. Index space in direction d runs over
/// `lo[d] .. lo[d]+ext[d]` (i64), which is `-2 ..= n+2` for non-periodic
/// directions and `0 .. n` for periodic ones (the wrap identifies n with 0).
pub struct ComponentGrid {
    pub mapping: Mapping,
    pub n: [usize; 2],
    /// Reference spacing 1/n per direction.
    pub h: [f64; 2],
    /// [direction][end]; both ends of a periodic direction are Periodic.
    pub sides: [[SideKind; 2]; 2],
    pub lo: [i64; 2],
    pub ext: [usize; 2],
    pub class: Vec<PointClass>,
}

impl ComponentGrid {
    pub fn new(mapping: Mapping, n: [usize; 2], sides: [[SideKind; 2]; 2]) -> Self {
        let mut lo = [0i64; 2];
        let mut ext = [0usize; 2];
        for d in 0..2 {
            if sides[d][0] == SideKind::Periodic {
                assert_eq!(sides[d][1], SideKind::Periodic);
                lo[d] = 0;
                ext[d] = n[d];
            } else {
                lo[d] = -2;
                ext[d] = n[d] + 5;
            }
        }
        let mut g = ComponentGrid {
            mapping,
            n,
            h: [1.0 / n[0] as f64, 1.0 / n[1] as f64],
            sides,
            lo,
            ext,
            class: vec![PointClass::Unused; ext[0] * ext[1]],
        };
        for p in g.points().collect::<Vec<_>>() {
            let c = g.base_class(p);
            let idx = g.index(p);
            g.class[idx] = c;
        }
        g
    }

    /// Per-direction status before combining: how index k relates to the
    /// sides of direction d.
    fn dir_status(&self, d: usize, k: i64) -> DirStatus {
        let n = self.n[d] as i64;
        if self.sides[d][0] == SideKind::Periodic {
            return DirStatus::Inside;
        }
        if k < 0 {
            match self.sides[d][0] {
                SideKind::Physical => DirStatus::OutPhysical,
                _ => DirStatus::OutInterp,
            }
        } else if k == 0 {
            match self.sides[d][0] {
                SideKind::Physical => DirStatus::Edge,
                _ => DirStatus::Inside,
            }
        } else if k < n {
            DirStatus::Inside
        } else if k == n {
            match self.sides[d][1] {
                SideKind::Physical => DirStatus::Edge,
                _ => DirStatus::Inside,
            }
        } else {
            match self.sides[d][1] {
                SideKind::Physical => DirStatus::OutPhysical,
                _ => DirStatus::OutInterp,
            }
        }
    }

    fn base_class(&self, p: [i64; 2]) -> PointClass {
        use DirStatus::*;
        let a = self.dir_status(0, p[0]);
        let b = self.dir_status(1, p[1]);
        match (a, b) {
            (Inside, Inside) => PointClass::Interior,
            (Edge, Inside) | (Inside, Edge) | (Edge, Edge) => PointClass::Boundary,
            (OutInterp, Inside) | (Inside, OutInterp) | (OutInterp, Edge) | (Edge, OutInterp) => {
                PointClass::Interp
            }
            // Physical-side ghosts, physical corners, and the ghost cells of
            // interpolation columns (no donor coverage outside the domain;
            // closed by extrapolation along the grid line).
            _ => PointClass::Ghost,
        }
    }

    #[inline]
    pub fn periodic(&self, d: usize) -> bool {
        self.sides[d][0] == SideKind::Periodic
    }

    /// Flat storage index of point p, wrapping periodic directions.
    #[inline]
    pub fn index(&self, p: [i64; 2]) -> usize {
        let i = if self.periodic(0) { p[0].rem_euclid(self.n[0] as i64) } else { p[0] - self.lo[0] };
        let j = if self.periodic(1) { p[1].rem_euclid(self.n[1] as i64) } else { p[1] - self.lo[1] };
        debug_assert!(i >= 0 && (i as usize) < self.ext[0], "i out of range: {p:?}");
        debug_assert!(j >= 0 && (j as usize) < self.ext[1], "j out of range: {p:?}");
        i as usize * self.ext[1] + j as usize
    }

    #[inline]
    pub fn class_at(&self, p: [i64; 2]) -> PointClass {
        self.class[self.index(p)]
    }

    /// All stored points in deterministic row-major order.
    pub fn points(&self) -> impl Iterator<Item = [i64; 2]> + '_ {
        let (lo, ext) = (self.lo, self.ext);
        (lo[0]..lo[0] + ext[0] as i64)
            .flat_map(move |i| (lo[1]..lo[1] + ext[1] as i64).map(move |j| [i, j]))
    }

    #[inline]
    pub fn ref_coords(&self, p: [i64; 2]) -> [f64; 2] {
        [p[0] as f64 * self.h[0], p[1] as f64 * self.h[1]]
    }

    #[inline]
    pub fn phys_coords(&self, p: [i64; 2]) -> [f64; 2] {
        let [r, s] = self.ref_coords(p);
        self.mapping.eval(r, s)
    }

    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.ext[0] * self.ext[1]]
    }

    /// Mark points satisfying `pred` on physical coordinates as Unused.
    pub fn cut_unused(&mut self, pred: impl Fn(f64, f64) -> bool) {
        for p in self.points().collect::<Vec<_>>() {
            let [x, y] = self.phys_coords(p);
            if pred(x, y) {
                let idx = self.index(p);
                self.class[idx] = PointClass::Unused;
            }
        }
    }

    /// Reclassify active points with an Unused point in their 5x5 box as
    /// interpolation points (the fringe ring along a cut).
    pub fn mark_interp_ring(&mut self) -> Result<()> {
        let mut ring = Vec::new();
        for p in self.points() {
            match self.class_at(p) {
                PointClass::Interior | PointClass::Interp => {}
                PointClass::Boundary => {
                    if self.box_touches_unused(p) {
                        return Err(Error::GridConstruction(format!(
                            "physical boundary point {p:?} adjacent to cut region"
                        )));
                    }
                    continue;
                }
                _ => continue,
            }
            if self.box_touches_unused(p) {
                ring.push(p);
            }
        }
        for p in ring {
            let idx = self.index(p);
            self.class[idx] = PointClass::Interp;
        }
        Ok(())
    }

    fn box_touches_unused(&self, p: [i64; 2]) -> bool {
        for di in -2..=2i64 {
            for dj in -2..=2i64 {
                let q = [p[0] + di, p[1] + dj];
                if !self.contains(q) {
                    continue;
                }
                if self.class_at(q) == PointClass::Unused {
                    return true;
                }
            }
        }
        false
    }

    #[inline]
    pub fn contains(&self, p: [i64; 2]) -> bool {
        (0..2).all(|d| {
            self.periodic(d) || (p[d] >= self.lo[d] && p[d] < self.lo[d] + self.ext[d] as i64)
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum DirStatus {
    Inside,
    Edge,
    OutPhysical,
    OutInterp,
}

/// Degree-4 Lagrange basis weights on nodes {0,1,2,3,4} evaluated at t.
pub fn lagrange5(t: f64) -> [f64; 5] {
    let mut w = [0.0; 5];
    for (a, wa) in w.iter_mut().enumerate() {
        let mut p = 1.0;
        for b in 0..5 {
            if b != a {
                p *= (t - b as f64) / (a as f64 - b as f64);
            }
        }
        *wa = p;
    }
    w
}

/// One interpolation equation: target point takes the tensor 5x5 Lagrange
/// combination of donor values starting at `base`.
#[derive(Clone, Debug)]
pub struct InterpPoint {
    pub grid: usize,
    pub pt: [i64; 2],
    pub donor: usize,
    pub base: [i64; 2],
    pub w: [[f64; 5]; 2],
}

pub struct CompositeGrid {
    pub grids: Vec<ComponentGrid>,
    pub interp: Vec<InterpPoint>,
}

impl CompositeGrid {
    /// Resolve donors for every interpolation point and validate stencil
    /// safety. Fails if any donor window would need interpolation/unused
    /// points (interpolation must stay explicit) or any PDE stencil would
    /// read an unused point.
    pub fn build(grids: Vec<ComponentGrid>) -> Result<Self> {
        let mut interp = Vec::new();
        for (gi, g) in grids.iter().enumerate() {
            for p in g.points() {
                if g.class_at(p) != PointClass::Interp {
                    continue;
                }
                let [x, y] = g.phys_coords(p);
                let ip = find_donor(&grids, gi, p, x, y)?;
                interp.push(ip);
            }
        }
        let cg = CompositeGrid { grids, interp };
        cg.validate_stencils()?;
        Ok(cg)
    }

    fn validate_stencils(&self) -> Result<()> {
        for (gi, g) in self.grids.iter().enumerate() {
            for p in g.points() {
                let c = g.class_at(p);
                if c != PointClass::Interior && c != PointClass::Boundary {
                    continue;
                }
                for di in -2..=2i64 {
                    for dj in -2..=2i64 {
                        let q = [p[0] + di, p[1] + dj];
                        if !g.contains(q) {
                            return Err(Error::GridConstruction(format!(
                                "grid {gi}: stencil of {p:?} leaves the stored index range"
                            )));
                        }
                        if g.class_at(q) == PointClass::Unused {
                            return Err(Error::GridConstruction(format!(
                                "grid {gi}: stencil of {p:?} reads unused point {q:?}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn zeros(&self) -> Vec<Vec<f64>> {
        self.grids.iter().map(|g| g.zeros()).collect()
    }

    /// Fill every interpolation point from its donor window. Donors are
    /// never interpolation points, so this is a single explicit pass.
    pub fn apply_interpolation(&self, u: &mut [Vec<f64>]) {
        for ip in &self.interp {
            let d = &self.grids[ip.donor];
            let mut val = 0.0;
            for (a, wa) in ip.w[0].iter().enumerate() {
                for (b, wb) in ip.w[1].iter().enumerate() {
                    val += wa * wb * u[ip.donor][d.index([ip.base[0] + a as i64, ip.base[1] + b as i64])];
                }
            }
            u[ip.grid][self.grids[ip.grid].index(ip.pt)] = val;
        }
    }

    /// Max interpolation-equation residual of the current fields.
    pub fn interpolation_residual(&self, u: &[Vec<f64>]) -> f64 {
        let mut res: f64 = 0.0;
        for ip in &self.interp {
            let d = &self.grids[ip.donor];
            let mut val = 0.0;
            for (a, wa) in ip.w[0].iter().enumerate() {
                for (b, wb) in ip.w[1].iter().enumerate() {
                    val += wa * wb * u[ip.donor][d.index([ip.base[0] + a as i64, ip.base[1] + b as i64])];
                }
            }
            res = res.max((u[ip.grid][self.grids[ip.grid].index(ip.pt)] - val).abs());
        }
        res
    }
}

/// Locate a 5x5 donor window for target point `p` of grid `gi` at (x,y).
/// The ideal window centers the target; clamping keeps it inside the donor's
/// discretization range and a shift search (up to +-3) steps it off
/// interpolation/unused points. Donor windows may include physical boundary
/// points but nothing whose value is itself interpolated.
fn find_donor(grids: &[ComponentGrid], gi: usize, p: [i64; 2], x: f64, y: f64) -> Result<InterpPoint> {
    for (di, d) in grids.iter().enumerate() {
        if di == gi {
            continue;
        }
        let [r, s] = d.mapping.inverse(x, y);
        let eta = [r * d.n[0] as f64, s * d.n[1] as f64];
        // quick coverage test
        let covered = (0..2).all(|k| {
            d.periodic(k) || (eta[k] > -0.01 && eta[k] < d.n[k] as f64 + 0.01)
        });
        if !covered {
            continue;
        }
        let ideal = [ideal_base(d, 0, eta[0]), ideal_base(d, 1, eta[1])];
        // search shifts ordered by total displacement, deterministically
        let mut shifts: Vec<[i64; 2]> = Vec::new();
        for sx in -3..=3i64 {
            for sy in -3..=3i64 {
                shifts.push([sx, sy]);
            }
        }
        shifts.sort_by_key(|s| (s[0].abs() + s[1].abs(), s[0], s[1]));
        'shift: for sh in shifts {
            let base = [ideal[0] + sh[0], ideal[1] + sh[1]];
            let mut t = [0.0f64; 2];
            for k in 0..2 {
                if !d.periodic(k) && (base[k] < 0 || base[k] > d.n[k] as i64 - 4) {
                    continue 'shift;
                }
                t[k] = eta[k] - base[k] as f64;
                // stay interpolatory (target inside the window)
                if !(-0.001..=4.001).contains(&t[k]) {
                    continue 'shift;
                }
            }
            for a in 0..5i64 {
                for b in 0..5i64 {
                    let q = [base[0] + a, base[1] + b];
                    match d.class_at(q) {
                        PointClass::Interior | PointClass::Boundary => {}
                        _ => continue 'shift,
                    }
                }
            }
            return Ok(InterpPoint {
                grid: gi,
                pt: p,
                donor: di,
                base,
                w: [lagrange5(t[0]), lagrange5(t[1])],
            });
        }
    }
    Err(Error::ImplicitInterpolation(format!(
        "no explicit donor window for grid {gi} point {p:?} at ({x:.4},{y:.4})"
    )))
}

fn ideal_base(d: &ComponentGrid, k: usize, eta: f64) -> i64 {
    let b = eta.round() as i64 - 2;
    if d.periodic(k) {
        b
    } else {
        b.clamp(0, d.n[k] as i64 - 4)
    }
}

// ---------------------------------------------------------------------------
// Grid builders for the in-scope geometries. Level l targets spacing
// h = 1/(10 l) in every direction of every component.
// ---------------------------------------------------------------------------

fn cells(extent: f64, level: u32) -> usize {
    (extent * 10.0 * level as f64).round() as usize
}

/// Unit square, all sides physical.
pub fn single_square(level: u32) -> Result<CompositeGrid> {
    let n = cells(1.0, level);
    let g = ComponentGrid::new(
        Mapping::Rectangle { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 },
        [n, n],
        [[SideKind::Physical; 2]; 2],
    );
    CompositeGrid::build(vec![g])
}

/// Two overlapping rectangular patches covering the unit square:
/// [0,0.7]x[0,1] and [0.25,1]x[0,1]. The facing edges interpolate; the
/// overlap is wide enough (4.5 coarse cells) that donor windows stay nearly
/// centered even on the coarsest grid.
pub fn two_patch_square(level: u32) -> Result<CompositeGrid> {
    let ny = cells(1.0, level);
    let g1 = ComponentGrid::new(
        Mapping::Rectangle { x0: 0.0, y0: 0.0, x1: 0.7, y1: 1.0 },
        [cells(0.7, level), ny],
        [[SideKind::Physical, SideKind::Interp], [SideKind::Physical, SideKind::Physical]],
    );
    let g2 = ComponentGrid::new(
        Mapping::Rectangle { x0: 0.25, y0: 0.0, x1: 1.0, y1: 1.0 },
        [cells(0.75, level), ny],
        [[SideKind::Interp, SideKind::Physical], [SideKind::Physical, SideKind::Physical]],
    );
    CompositeGrid::build(vec![g1, g2])
}

/// Unit disc: a full annulus r in [0.4, 1] (outer side physical) overlapping
/// a Cartesian square cut at radius 0.9.
pub fn disc(level: u32) -> Result<CompositeGrid> {
    let tau = std::f64::consts::TAU;
    let ring = ComponentGrid::new(
        Mapping::Annulus { r0: 0.4, r1: 1.0, theta0: 0.0, theta1: tau },
        [cells(0.6, level), cells(tau, level)],
        [[SideKind::Interp, SideKind::Physical], [SideKind::Periodic, SideKind::Periodic]],
    );
    let mut square = ComponentGrid::new(
        Mapping::Rectangle { x0: -1.2, y0: -1.2, x1: 1.2, y1: 1.2 },
        [cells(2.4, level), cells(2.4, level)],
        [[SideKind::Physical; 2]; 2],
    );
    let r_cut = 0.9;
    square.cut_unused(|x, y| x.hypot(y) > r_cut);
    square.mark_interp_ring()?;
    CompositeGrid::build(vec![ring, square])
}

/// Square [-2,2]^2 with a circular hole of radius 0.5: a boundary-fitted
/// annulus [0.5, 0.95] around the hole (outer side interpolates) overlapping
/// the Cartesian square cut at radius 0.55.
pub fn square_with_hole(level: u32) -> Result<CompositeGrid> {
    let tau = std::f64::consts::TAU;
    let h = 0.1 / level as f64;
    let (r0, r1) = (0.5, 0.95);
    if r1 - r0 < 5.0 * h {
        return Err(Error::OverlapTooThin(format!(
            "annulus radial extent {:.2} < 5 Cartesian cells ({:.2})",
            r1 - r0,
            5.0 * h
        )));
    }
    let ring = ComponentGrid::new(
        Mapping::Annulus { r0, r1, theta0: 0.0, theta1: tau },
        [cells(r1 - r0, level), cells(tau * r1, level)],
        [[SideKind::Physical, SideKind::Interp], [SideKind::Periodic, SideKind::Periodic]],
    );
    let mut square = ComponentGrid::new(
        Mapping::Rectangle { x0: -2.0, y0: -2.0, x1: 2.0, y1: 2.0 },
        [cells(4.0, level), cells(4.0, level)],
        [[SideKind::Physical; 2]; 2],
    );
    square.cut_unused(|x, y| x.hypot(y) < 0.55);
    square.mark_interp_ring()?;
    CompositeGrid::build(vec![ring, square])
}

// ---------------------------------------------------------------------------
// 1D composite grids (for the beam diagnostic)
// ---------------------------------------------------------------------------

pub struct Grid1d {
    pub x0: f64,
    pub x1: f64,
    pub n: usize,
    /// Physical spacing.
    pub h: f64,
    pub sides: [SideKind; 2],
}

impl Grid1d {
    pub fn x(&self, i: i64) -> f64 {
        self.x0 + i as f64 * self.h
    }
}

#[derive(Clone, Debug)]
pub struct InterpPoint1d {
    pub grid: usize,
    pub i: i64,
    pub donor: usize,
    pub base: i64,
    pub w: [f64; 5],
}

pub struct Composite1d {
    pub grids: Vec<Grid1d>,
    pub interp: Vec<InterpPoint1d>,
}

/// Single interval [0,1] with physical ends.
pub fn build_single_1d(n: usize) -> Composite1d {
    Composite1d {
        grids: vec![Grid1d {
            x0: 0.0,
            x1: 1.0,
            n,
            h: 1.0 / n as f64,
            sides: [SideKind::Physical; 2],
        }],
        interp: Vec::new(),
    }
}

/// Two overlapping intervals covering [0,1]: [0, 0.75] with n1 cells and
/// [0.75-overlap, 1] with n2 cells. Each grid carries two interpolation
/// points at the ghost positions of its overlap-interior end.
pub fn build_overlapping_1d(n1: usize, n2: usize, overlap: f64) -> Result<Composite1d> {
    let b = 0.75;
    let a2 = b - overlap;
    if !(0.0..b).contains(&a2) {
        return Err(Error::Config(format!("overlap {overlap} out of range")));
    }
    let g1 = Grid1d { x0: 0.0, x1: b, n: n1, h: b / n1 as f64, sides: [SideKind::Physical, SideKind::Interp] };
    let g2 = Grid1d {
        x0: a2,
        x1: 1.0,
        n: n2,
        h: (1.0 - a2) / n2 as f64,
        sides: [SideKind::Interp, SideKind::Physical],
    };
    let grids = vec![g1, g2];
    let mut interp = Vec::new();
    for (gi, di) in [(0usize, 1usize), (1, 0)] {
        let g = &grids[gi];
        let d = &grids[di];
        let pts: [i64; 2] = if gi == 0 { [n1 as i64 + 1, n1 as i64 + 2] } else { [-1, -2] };
        for i in pts {
            let x = g.x(i);
            let eta = (x - d.x0) / d.h;
            let base = (eta.round() as i64 - 2).clamp(0, d.n as i64 - 4);
            let t = eta - base as f64;
            // the donor's own interpolation points sit outside [0, n], so a
            // clamped window is automatically explicit; it must still be
            // interpolatory (target inside the window).
            if !(-0.001..=4.001).contains(&t) {
                return Err(Error::ImplicitInterpolation(format!(
                    "1D donor window for x={x:.4} falls outside grid {di}"
                )));
            }
            interp.push(InterpPoint1d { grid: gi, i, donor: di, base, w: lagrange5(t) });
        }
    }
    Ok(Composite1d { grids, interp })
}
