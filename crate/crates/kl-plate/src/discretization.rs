//! Spatial discretization: coefficients of the mapped plate operator, the
//! 5x5 finite-difference stencils, and the hyper-dissipation operator.
//!
//! On each component the operator
//!     L w = -K w + T lap(w) - D lap^2(w)
//! is expanded by the chain rule into reference-space derivatives W_r ... W_ssss
//! with coefficients built from inverse-map derivatives. All difference
//! operators live on a 5-point stencil per direction. First and second
//! derivatives have a switchable correction `delta`: delta = 0 keeps the
//! plain 3-point formulas (2nd order), delta = 1 widens them to the full
//! stencil (4th order); third/fourth derivatives are the standard 2nd-order
//! 5-point formulas either way.

use crate::compgrid::ComponentGrid;
use crate::exactsol::MmsFamily;
use crate::mapping::{Deriv4, Metrics};
use crate::PlateParams;

/// Coefficients of the mapped operator at one point (the -K term is kept
/// separate; it always multiplies the center value).
#[derive(Clone, Copy, Debug, Default)]
pub struct OperatorCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub b11: f64,
    pub b12: f64,
    pub b22: f64,
    pub c111: f64,
    pub c112: f64,
    pub c122: f64,
    pub c222: f64,
    pub d1111: f64,
    pub d1112: f64,
    pub d1122: f64,
    pub d1222: f64,
    pub d2222: f64,
}

/// Chain-rule expansion of T lap - D lap^2 in reference coordinates.
pub fn coefficients(m: &Metrics, p: &PlateParams) -> OperatorCoeffs {
    let (t, d) = (p.tension, p.d_flex);
    let r = &m.r;
    let s = &m.s;
    let (rx, ry) = (r.d[1][0], r.d[0][1]);
    let (sx, sy) = (s.d[1][0], s.d[0][1]);
    let (rxx, rxy, ryy) = (r.d[2][0], r.d[1][1], r.d[0][2]);
    let (sxx, sxy, syy) = (s.d[2][0], s.d[1][1], s.d[0][2]);
    let (rxxx, rxxy, rxyy, ryyy) = (r.d[3][0], r.d[2][1], r.d[1][2], r.d[0][3]);
    let (sxxx, sxxy, sxyy, syyy) = (s.d[3][0], s.d[2][1], s.d[1][2], s.d[0][3]);

    let bilap = |f: &Deriv4| f.d[4][0] + 2.0 * f.d[2][2] + f.d[0][4];

    OperatorCoeffs {
        a1: t * (rxx + ryy) - d * bilap(r),
        a2: t * (sxx + syy) - d * bilap(s),
        b11: t * (rx * rx + ry * ry)
            - d * (3.0 * rxx * rxx
                + 2.0 * rxx * ryy
                + 4.0 * rxy * rxy
                + 3.0 * ryy * ryy
                + 4.0 * rx * rxxx
                + 4.0 * rx * rxyy
                + 4.0 * rxxy * ry
                + 4.0 * ry * ryyy),
        b12: t * (2.0 * rx * sx + 2.0 * ry * sy)
            - d * (4.0 * rx * sxxx
                + 4.0 * rxxx * sx
                + 4.0 * rx * sxyy
                + 4.0 * rxyy * sx
                + 6.0 * rxx * sxx
                + 8.0 * rxy * sxy
                + 4.0 * rxxy * sy
                + 4.0 * ry * sxxy
                + 2.0 * rxx * syy
                + 2.0 * ryy * sxx
                + 4.0 * ry * syyy
                + 4.0 * ryyy * sy
                + 6.0 * ryy * syy),
        b22: t * (sx * sx + sy * sy)
            - d * (3.0 * sxx * sxx
                + 2.0 * sxx * syy
                + 4.0 * sxy * sxy
                + 3.0 * syy * syy
                + 4.0 * sx * sxxx
                + 4.0 * sx * sxyy
                + 4.0 * sxxy * sy
                + 4.0 * sy * syyy),
        c111: -d * (6.0 * rx * rx * rxx
            + 2.0 * rxx * ry * ry
            + 6.0 * ry * ry * ryy
            + 2.0 * rx * (rx * ryy + 2.0 * rxy * ry)
            + 4.0 * rx * rxy * ry),
        c112: -d * (2.0 * rx * (rx * syy + 2.0 * rxy * sy + 2.0 * ry * sxy + ryy * sx)
            + 3.0 * rx * rx * sxx
            + 2.0 * ry * ry * sxx
            + 3.0 * ry * ry * syy
            + 2.0 * sx * (rx * ryy + 2.0 * rxy * ry)
            + rx * (3.0 * rx * sxx + 3.0 * rxx * sx)
            + 4.0 * rxy * (rx * sy + ry * sx)
            + ry * (3.0 * ry * syy + 3.0 * ryy * sy)
            + 9.0 * rx * rxx * sx
            + 4.0 * rx * ry * sxy
            + 4.0 * rxx * ry * sy
            + 9.0 * ry * ryy * sy),
        c122: -d * (2.0 * sx * (rx * syy + 2.0 * rxy * sy + 2.0 * ry * sxy + ryy * sx)
            + 3.0 * rxx * sx * sx
            + 2.0 * rxx * sy * sy
            + 3.0 * ryy * sy * sy
            + sx * (3.0 * rx * sxx + 3.0 * rxx * sx)
            + 4.0 * sxy * (rx * sy + ry * sx)
            + sy * (3.0 * ry * syy + 3.0 * ryy * sy)
            + 2.0 * rx * (sx * syy + 2.0 * sxy * sy)
            + 9.0 * rx * sx * sxx
            + 4.0 * rxy * sx * sy
            + 4.0 * ry * sxx * sy
            + 9.0 * ry * sy * syy),
        c222: -d * (6.0 * sx * sx * sxx
            + 2.0 * sxx * sy * sy
            + 6.0 * sy * sy * syy
            + 2.0 * sx * (sx * syy + 2.0 * sxy * sy)
            + 4.0 * sx * sxy * sy),
        d1111: -d * (rx * rx + ry * ry).powi(2),
        d1112: -d * (2.0 * rx * (sx * ry * ry + 2.0 * rx * sy * ry)
            + 4.0 * rx.powi(3) * sx
            + 4.0 * ry.powi(3) * sy
            + 2.0 * rx * ry * ry * sx),
        d1122: -d * (6.0 * rx * rx * sx * sx
            + 6.0 * ry * ry * sy * sy
            + 2.0 * rx * (rx * sy * sy + 2.0 * ry * sx * sy)
            + 2.0 * sx * (sx * ry * ry + 2.0 * rx * sy * ry)),
        d1222: -d * (2.0 * sx * (rx * sy * sy + 2.0 * ry * sx * sy)
            + 4.0 * rx * sx.powi(3)
            + 4.0 * ry * sy.powi(3)
            + 2.0 * rx * sx * sy * sy),
        d2222: -d * (sx * sx + sy * sy).powi(2),
    }
}

// 1D difference weights on offsets -2..=2.

/// First derivative with stencil-width correction:
/// D_0 - delta h^2/6 D_0 D+ D-.
pub fn w_d1(h: f64, delta: f64) -> [f64; 5] {
    let d = delta;
    [d / 12.0, -0.5 - d / 6.0, 0.0, 0.5 + d / 6.0, -d / 12.0].map(|w| w / h)
}

/// Second derivative: D+D- - delta h^2/12 (D+D-)^2.
pub fn w_d2(h: f64, delta: f64) -> [f64; 5] {
    let d = delta;
    [-d / 12.0, 1.0 + d / 3.0, -2.0 - d / 2.0, 1.0 + d / 3.0, -d / 12.0].map(|w| w / (h * h))
}

/// Plain centered first derivative D_0 (fixed 3-point; used inside the
/// third/fourth-order mixed operators regardless of delta).
pub fn w_d0(h: f64) -> [f64; 5] {
    [0.0, -0.5, 0.0, 0.5, 0.0].map(|w| w / h)
}

/// Plain second difference D+D-.
pub fn w_pm(h: f64) -> [f64; 5] {
    [0.0, 1.0, -2.0, 1.0, 0.0].map(|w| w / (h * h))
}

/// Third derivative D+D-D_0.
pub fn w_d3(h: f64) -> [f64; 5] {
    [-0.5, 1.0, 0.0, -1.0, 0.5].map(|w| w / (h * h * h))
}

/// Fourth derivative (D+D-)^2.
pub fn w_d4(h: f64) -> [f64; 5] {
    let h4 = h * h * h * h;
    [1.0, -4.0, 6.0, -4.0, 1.0].map(|w| w / h4)
}

const E0: [f64; 5] = [0.0, 0.0, 1.0, 0.0, 0.0];

/// Full 5x5 stencil of L_h at one point, center weight including -K.
pub fn lh_stencil(c: &OperatorCoeffs, k_spring: f64, h: [f64; 2], delta: f64) -> [[f64; 5]; 5] {
    let (hr, hs) = (h[0], h[1]);
    let mut st = [[0.0f64; 5]; 5];
    let mut add = |coef: f64, wr: [f64; 5], ws: [f64; 5]| {
        if coef == 0.0 {
            return;
        }
        for i in 0..5 {
            if wr[i] == 0.0 {
                continue;
            }
            for j in 0..5 {
                st[i][j] += coef * wr[i] * ws[j];
            }
        }
    };
    add(c.a1, w_d1(hr, delta), E0);
    add(c.a2, E0, w_d1(hs, delta));
    add(c.b11, w_d2(hr, delta), E0);
    add(c.b12, w_d1(hr, delta), w_d1(hs, delta));
    add(c.b22, E0, w_d2(hs, delta));
    add(c.c111, w_d3(hr), E0);
    add(c.c112, w_pm(hr), w_d0(hs));
    add(c.c122, w_d0(hr), w_pm(hs));
    add(c.c222, E0, w_d3(hs));
    add(c.d1111, w_d4(hr), E0);
    add(c.d1112, w_d3(hr), w_d0(hs));
    add(c.d1122, w_pm(hr), w_pm(hs));
    add(c.d1222, w_d0(hr), w_d3(hs));
    add(c.d2222, E0, w_d4(hs));
    st[2][2] += -k_spring;
    st
}

/// The assembled interior operator of one component grid: the PDE point
/// list and one stencil per point. The same stencils drive the matrix-free
/// apply and the implicit-scheme matrix assembly.
pub struct GridOperator {
    pub pde: Vec<[i64; 2]>,
    pub stencils: Vec<[[f64; 5]; 5]>,
    pub coeffs: Vec<OperatorCoeffs>,
}

impl GridOperator {
    pub fn new(g: &ComponentGrid, p: &PlateParams, delta: f64, pde: Vec<[i64; 2]>) -> Self {
        let mut stencils = Vec::with_capacity(pde.len());
        let mut coeffs = Vec::with_capacity(pde.len());
        for &pt in &pde {
            let [r, s] = g.ref_coords(pt);
            let c = coefficients(&g.mapping.metrics(r, s), p);
            stencils.push(lh_stencil(&c, p.k_spring, g.h, delta));
            coeffs.push(c);
        }
        GridOperator { pde, stencils, coeffs }
    }

    /// out[pde point] = (L_h u)(point); other entries of `out` untouched.
    pub fn apply(&self, g: &ComponentGrid, u: &[f64], out: &mut [f64]) {
        self.apply_range(g, u, out, 0, self.pde.len());
    }

    /// Apply on a contiguous sub-range of the PDE point list (for sharded
    /// multithreaded application).
    pub fn apply_range(&self, g: &ComponentGrid, u: &[f64], out: &mut [f64], lo: usize, hi: usize) {
        for k in lo..hi {
            let pt = self.pde[k];
            let st = &self.stencils[k];
            let mut acc = 0.0;
            for (di, row) in st.iter().enumerate() {
                for (dj, &w) in row.iter().enumerate() {
                    if w != 0.0 {
                        acc += w * u[g.index([pt[0] + di as i64 - 2, pt[1] + dj as i64 - 2])];
                    }
                }
            }
            out[g.index(pt)] = acc;
        }
    }
}

/// Hyper-dissipation D_ad u = -(h_r^4 D_rrrr + h_s^4 D_ssss) u: pure fourth
/// differences with no h division, written at the same PDE points.
pub fn apply_dissipation(g: &ComponentGrid, pde: &[[i64; 2]], u: &[f64], out: &mut [f64]) {
    apply_dissipation_range(g, pde, u, out, 0, pde.len());
}

pub fn apply_dissipation_range(
    g: &ComponentGrid,
    pde: &[[i64; 2]],
    u: &[f64],
    out: &mut [f64],
    lo: usize,
    hi: usize,
) {
    const W4: [f64; 5] = [1.0, -4.0, 6.0, -4.0, 1.0];
    for &pt in &pde[lo..hi] {
        let mut acc = 0.0;
        for (k, &w) in W4.iter().enumerate() {
            let o = k as i64 - 2;
            acc += w * u[g.index([pt[0] + o, pt[1]])];
            acc += w * u[g.index([pt[0], pt[1] + o])];
        }
        out[g.index(pt)] = -acc;
    }
}

/// Dissipation stencil contribution as weights (for implicit assembly):
/// returns the 9 nonzero (offset, weight) pairs of D_ad.
pub fn dissipation_weights() -> [([i64; 2], f64); 9] {
    [
        ([-2, 0], -1.0),
        ([-1, 0], 4.0),
        ([0, 0], -12.0),
        ([1, 0], 4.0),
        ([2, 0], -1.0),
        ([0, -2], -1.0),
        ([0, -1], 4.0),
        ([0, 1], 4.0),
        ([0, 2], -1.0),
    ]
}

/// Manufactured-solution source term (delegates to the exact-solution
/// module; kept here so the discretization API is self-contained).
pub fn mms_forcing(family: MmsFamily, p: &PlateParams, x: f64, y: f64, t: f64) -> f64 {
    family.forcing(p, x, y, t)
}

/// Discretization points (interior + physical boundary) of a component.
pub fn active_points(g: &ComponentGrid) -> Vec<[i64; 2]> {
    use crate::compgrid::PointClass::*;
    g.points().filter(|&p| matches!(g.class_at(p), Interior | Boundary)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compgrid;
    use crate::mapping::Mapping;

    fn params(k: f64, t: f64, d: f64) -> PlateParams {
        PlateParams { rho: 1.0, thickness: 1.0, k_spring: k, tension: t, d_flex: d, nu: 0.3 }
    }

    #[test]
    fn identity_map_coefficients() {
        let m = Mapping::Rectangle { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 };
        let p = params(5.0, 3.7, 2.2);
        let c = coefficients(&m.metrics(0.3, 0.4), &p);
        assert_eq!(c.b11, 3.7);
        assert_eq!(c.b22, 3.7);
        assert_eq!(c.d1111, -2.2);
        assert_eq!(c.d2222, -2.2);
        assert_eq!(c.d1122, -2.0 * 2.2);
        for v in [c.a1, c.a2, c.b12, c.c111, c.c112, c.c122, c.c222, c.d1112, c.d1222] {
            assert_eq!(v, 0.0);
        }
        // stretched map x = 2r: r_x = 1/2, d1111 = -D/16
        let m2 = Mapping::Rectangle { x0: 0.0, y0: 0.0, x1: 2.0, y1: 1.0 };
        let c2 = coefficients(&m2.metrics(0.1, 0.1), &params(0.0, 0.0, 1.0));
        assert!((c2.d1111 + 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn constant_field_returns_minus_k_times_value() {
        let cg = compgrid::disc(1).unwrap();
        let g = &cg.grids[0]; // annulus: all coefficient families active
        let p = params(5.0, 1.3, 0.7);
        let op = GridOperator::new(g, &p, 1.0, active_points(g));
        let u = vec![4.2; g.ext[0] * g.ext[1]];
        let mut out = g.zeros();
        op.apply(g, &u, &mut out);
        // rounding floor: stencil weights reach ~3e5 (d2222/h_s^4), so exact
        // cancellation of the derivative terms leaves ~1e-9 of noise
        for &pt in &op.pde {
            let got = out[g.index(pt)];
            assert!((got + 5.0 * 4.2).abs() < 1e-7, "L(const) = -K const, got {got}");
        }
    }

    #[test]
    fn quartic_is_differentiated_exactly() {
        // K=T=0, D=1 on a Cartesian grid: L x^4 = -w_xxxx = -24 exactly,
        // for either delta (only the d-terms act on this field).
        let cg = compgrid::single_square(1).unwrap();
        let g = &cg.grids[0];
        let p = params(0.0, 0.0, 1.0);
        for delta in [0.0, 1.0] {
            let op = GridOperator::new(g, &p, delta, active_points(g));
            let mut u = g.zeros();
            for pt in g.points() {
                let [x, _] = g.phys_coords(pt);
                u[g.index(pt)] = x.powi(4);
            }
            let mut out = g.zeros();
            op.apply(g, &u, &mut out);
            for &pt in &op.pde {
                assert!(
                    (out[g.index(pt)] + 24.0).abs() < 1e-8,
                    "delta={delta} at {pt:?}: {}",
                    out[g.index(pt)]
                );
            }
        }
    }

    /// Independent oracle for the whole coefficient transcription: for
    /// w = exp(ax+by), L w = (-K + T(a^2+b^2) - D(a^2+b^2)^2) w exactly, so
    /// the discrete operator on the annulus must converge to that at 2nd
    /// order (all 14 coefficients and both metric tables participate).
    #[test]
    fn annulus_operator_converges_to_continuous() {
        let p = params(2.0, 1.5, 1.0);
        let (a, b) = (0.6, 0.45);
        let factor = -2.0 + 1.5 * (a * a + b * b) - (a * a + b * b) * (a * a + b * b);
        let mut errs = Vec::new();
        for level in [1u32, 2, 4] {
            let cg = compgrid::disc(level).unwrap();
            let g = &cg.grids[0];
            let op = GridOperator::new(g, &p, 1.0, active_points(g));
            let mut u = g.zeros();
            for pt in g.points() {
                let [x, y] = g.phys_coords(pt);
                u[g.index(pt)] = (a * x + b * y).exp();
            }
            let mut out = g.zeros();
            op.apply(g, &u, &mut out);
            let mut err: f64 = 0.0;
            for &pt in &op.pde {
                let [x, y] = g.phys_coords(pt);
                let want = factor * (a * x + b * y).exp();
                err = err.max((out[g.index(pt)] - want).abs());
            }
            errs.push(err);
        }
        let r1 = (errs[0] / errs[1]).log2();
        let r2 = (errs[1] / errs[2]).log2();
        assert!(r1 > 1.8 && r2 > 1.8, "rates {r1:.2}, {r2:.2} (errs {errs:?})");
    }

    /// With D = 0 the only active operators are the delta-corrected ones, so
    /// the interior truncation order switches: 2nd order at delta=0, 4th at
    /// delta=1.
    #[test]
    fn delta_switches_low_order_operator_accuracy() {
        let p = params(0.5, 2.0, 0.0);
        let (a, b) = (0.6, 0.45);
        let factor = -0.5 + 2.0 * (a * a + b * b);
        let mut rates = Vec::new();
        for delta in [0.0, 1.0] {
            let mut errs = Vec::new();
            for level in [1u32, 2] {
                let cg = compgrid::disc(level).unwrap();
                let g = &cg.grids[0];
                let op = GridOperator::new(g, &p, delta, active_points(g));
                let mut u = g.zeros();
                for pt in g.points() {
                    let [x, y] = g.phys_coords(pt);
                    u[g.index(pt)] = (a * x + b * y).exp();
                }
                let mut out = g.zeros();
                op.apply(g, &u, &mut out);
                let mut err: f64 = 0.0;
                for &pt in &op.pde {
                    let [x, y] = g.phys_coords(pt);
                    err = err.max((out[g.index(pt)] - factor * (a * x + b * y).exp()).abs());
                }
                errs.push(err);
            }
            rates.push((errs[0] / errs[1]).log2());
        }
        assert!(rates[0] > 1.7 && rates[0] < 2.4, "delta=0 rate {}", rates[0]);
        assert!(rates[1] > 3.5, "delta=1 rate {}", rates[1]);
    }

    #[test]
    fn dissipation_on_simple_fields() {
        let cg = compgrid::single_square(1).unwrap();
        let g = &cg.grids[0];
        let pde = active_points(g);
        let n = g.ext[0] * g.ext[1];
        // constant -> 0, linear -> 0, plus-minus mode -> -32 u
        let fields: [(Box<dyn Fn([i64; 2]) -> f64>, f64); 3] = [
            (Box::new(|_| 3.0), 0.0),
            (Box::new(|p| p[0] as f64 - 0.3 * p[1] as f64), 0.0),
            (Box::new(|p| if (p[0] + p[1]) % 2 == 0 { 1.0 } else { -1.0 }), -32.0),
        ];
        for (f, scale) in fields {
            let mut u = vec![0.0; n];
            for pt in g.points() {
                u[g.index(pt)] = f(pt);
            }
            let mut out = vec![0.0; n];
            apply_dissipation(g, &pde, &u, &mut out);
            for &pt in &pde {
                let want = scale * f(pt);
                assert!(
                    (out[g.index(pt)] - want).abs() < 1e-12,
                    "at {pt:?}: {} vs {want}",
                    out[g.index(pt)]
                );
            }
        }
    }

    #[test]
    fn dissipation_is_negative_semidefinite() {
        // zero-extended random fields on the physical square
        let cg = compgrid::single_square(1).unwrap();
        let g = &cg.grids[0];
        let pde = active_points(g);
        let mut seed = 0x2545f4914f6cdd1du64;
        let mut rng = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..5 {
            let mut u = g.zeros();
            for &pt in &pde {
                u[g.index(pt)] = rng();
            }
            let mut out = g.zeros();
            // u vanishes off the PDE points, so the quadratic form of the
            // zero-extended field reduces to the sum over PDE rows
            apply_dissipation(g, &pde, &u, &mut out);
            let dot: f64 = pde.iter().map(|&pt| u[g.index(pt)] * out[g.index(pt)]).sum();
            assert!(dot <= 1e-12, "u^T D_ad u = {dot} > 0");
        }
    }

    #[test]
    fn operator_is_reflection_symmetric() {
        // symmetric field on a symmetric Cartesian grid: L_h u inherits the
        // x -> 1-x symmetry
        let cg = compgrid::single_square(1).unwrap();
        let g = &cg.grids[0];
        let p = params(1.0, 1.0, 1.0);
        let op = GridOperator::new(g, &p, 1.0, active_points(g));
        let mut u = g.zeros();
        for pt in g.points() {
            let [x, y] = g.phys_coords(pt);
            u[g.index(pt)] = ((x - 0.5) * (x - 0.5) + 0.2 * y).cos();
        }
        let mut out = g.zeros();
        op.apply(g, &u, &mut out);
        let n = g.n[0] as i64;
        for &pt in &op.pde {
            let mirror = [n - pt[0], pt[1]];
            let (a, b) = (out[g.index(pt)], out[g.index(mirror)]);
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{pt:?} vs {mirror:?}: {a} {b}");
        }
    }

    #[test]
    fn unused_points_never_contaminate() {
        let cg = compgrid::disc(1).unwrap();
        let sq = &cg.grids[1];
        let p = params(1.0, 1.0, 1.0);
        let pde = active_points(sq);
        assert!(!pde.is_empty());
        let op = GridOperator::new(sq, &p, 1.0, pde.clone());
        let mut u = sq.zeros();
        for pt in sq.points() {
            u[sq.index(pt)] = if sq.class_at(pt) == crate::compgrid::PointClass::Unused {
                f64::NAN
            } else {
                1.0
            };
        }
        let mut out = sq.zeros();
        op.apply(sq, &u, &mut out);
        apply_dissipation(sq, &pde, &u, &mut out.clone());
        for &pt in &op.pde {
            assert!(out[sq.index(pt)].is_finite(), "NaN leaked into {pt:?}");
        }
    }
}
