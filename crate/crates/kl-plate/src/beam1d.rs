//! Eigenvalue diagnostics for a simply supported beam, w_tt = -w_xxxx, on a
//! single interval or on two overlapping component grids.
//!
//! The discrete problem is written as M_I d2W/dt2 = M_L W with the optional
//! dissipation term ad * M_ad acting on dW/dt. W stacks every stored point of
//! every grid (two ghost layers per side). M_I carries a 1 on rows holding
//! the evolution equation and 0 on boundary, ghost and interpolation rows;
//! those rows of M_L hold the constraints instead. Eliminating the
//! constrained points by static condensation leaves a small dense system
//! whose update matrices are diagonalized exactly. This is the cheapest
//! setting that exhibits the weak instability caused by grid-to-grid
//! interpolation, and the one used to validate the dissipated schemes.

use nalgebra::{Complex, DMatrix, DVector};

use crate::compgrid::{Composite1d, SideKind};
use crate::error::{Error, Result};
use crate::stability;
use crate::Scheme;

/// Modulus tolerance separating "on" from "outside" the unit circle.
pub const UNIT_CIRCLE_TOL: f64 = 1e-10;

pub struct BeamSystem {
    /// Identity on evolution rows, zero on constraint rows.
    pub m_i: DMatrix<f64>,
    /// Evolution rows: -(D+D-)^2; constraint rows: boundary conditions,
    /// one-sided extrapolations and interpolation conditions.
    pub m_l: DMatrix<f64>,
    /// Evolution rows: -h^4 (D+D-)^2, i.e. pure undivided differences.
    pub m_ad: DMatrix<f64>,
    /// Dissipation strength multiplying `m_ad` in the schemes.
    pub ad: f64,
    /// Marks the rows that carry the evolution equation.
    pub eq_rows: Vec<bool>,
    /// Physical coordinate of every stored point.
    pub x: Vec<f64>,
    /// Smallest component spacing.
    pub h: f64,
}

/// Row offset of each grid in the stacked vector; grid g point i lives at
/// offsets[g] + (i + 2).
fn offsets(c: &Composite1d) -> Vec<usize> {
    let mut off = vec![0usize];
    for g in &c.grids {
        off.push(off.last().unwrap() + g.n + 5);
    }
    off
}

/// Assemble the full (uncondensed) beam matrices on a 1D composite grid with
/// simply supported physical ends: w = 0 and a vanishing second difference at
/// the boundary, with a fifth-order one-sided extrapolation closing the outer
/// ghost. Interpolation rows tie each overlap ghost to five donor points.
pub fn assemble_beam(c: &Composite1d, ad: f64) -> Result<BeamSystem> {
    for g in &c.grids {
        if g.n < 4 {
            return Err(Error::Config(format!(
                "beam grid with {} cells is too small for the five-point stencils",
                g.n
            )));
        }
    }
    let off = offsets(c);
    let nr = *off.last().unwrap();
    let mut m_i = DMatrix::zeros(nr, nr);
    let mut m_l = DMatrix::zeros(nr, nr);
    let mut m_ad = DMatrix::zeros(nr, nr);
    let mut eq_rows = vec![false; nr];
    let mut x = vec![0.0; nr];
    let mut h = f64::INFINITY;

    for (gi, g) in c.grids.iter().enumerate() {
        let at = |i: i64| off[gi] + (i + 2) as usize;
        let n = g.n as i64;
        h = h.min(g.h);
        for i in -2..=n + 2 {
            x[at(i)] = g.x(i);
        }

        // evolution equation on every point not claimed by a boundary or an
        // interpolation condition
        let lo = if g.sides[0] == SideKind::Physical { 1 } else { 0 };
        let hi = if g.sides[1] == SideKind::Physical { n - 1 } else { n };
        let st = [1.0, -4.0, 6.0, -4.0, 1.0];
        let h4 = g.h.powi(4);
        for i in lo..=hi {
            let r = at(i);
            m_i[(r, r)] = 1.0;
            eq_rows[r] = true;
            for (k, s) in st.iter().enumerate() {
                let col = at(i - 2 + k as i64);
                m_l[(r, col)] -= s / h4;
                m_ad[(r, col)] -= s;
            }
        }

        for side in 0..2 {
            if g.sides[side] != SideKind::Physical {
                continue;
            }
            let (ib, d): (i64, i64) = if side == 0 { (0, 1) } else { (n, -1) };
            // w = 0 on the boundary point
            m_l[(at(ib), at(ib))] = 1.0;
            // zero second difference centered on the boundary
            let r1 = at(ib - d);
            let h2 = g.h * g.h;
            m_l[(r1, at(ib - d))] += 1.0 / h2;
            m_l[(r1, at(ib))] += -2.0 / h2;
            m_l[(r1, at(ib + d))] += 1.0 / h2;
            // fifth-difference extrapolation for the outer ghost
            let r2 = at(ib - 2 * d);
            let h5 = g.h.powi(5);
            for (k, s) in [1.0, -5.0, 10.0, -10.0, 5.0, -1.0].iter().enumerate() {
                m_l[(r2, at(ib - 2 * d + k as i64 * d))] += s / h5;
            }
        }
    }

    for p in &c.interp {
        let r = off[p.grid] + (p.i + 2) as usize;
        m_l[(r, r)] += 1.0;
        for (k, w) in p.w.iter().enumerate() {
            let col = off[p.donor] + (p.base + k as i64 + 2) as usize;
            m_l[(r, col)] -= w;
        }
    }

    Ok(BeamSystem { m_i, m_l, m_ad, ad, eq_rows, x, h })
}

/// The beam system restricted to the evolution unknowns, with the constrained
/// points eliminated through the (square) constraint block of `m_l`.
pub struct CondensedBeam {
    pub m_l: DMatrix<f64>,
    pub m_ad: DMatrix<f64>,
    /// Coordinates of the retained unknowns.
    pub x: Vec<f64>,
}

pub fn condense(sys: &BeamSystem) -> Result<CondensedBeam> {
    let nr = sys.eq_rows.len();
    let idx_i: Vec<usize> = (0..nr).filter(|&r| sys.eq_rows[r]).collect();
    let idx_c: Vec<usize> = (0..nr).filter(|&r| !sys.eq_rows[r]).collect();
    let sel = |m: &DMatrix<f64>, rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
    };
    // constraints: Lcc Wc + Lci Wi = 0, hence Wc = S Wi
    let lcc = sel(&sys.m_l, &idx_c, &idx_c);
    let lci = sel(&sys.m_l, &idx_c, &idx_i);
    let s = -lcc
        .lu()
        .solve(&lci)
        .ok_or_else(|| Error::SingularSystem("beam constraint block".into()))?;
    let m_l = sel(&sys.m_l, &idx_i, &idx_i) + sel(&sys.m_l, &idx_i, &idx_c) * &s;
    let m_ad = sel(&sys.m_ad, &idx_i, &idx_i) + sel(&sys.m_ad, &idx_i, &idx_c) * &s;
    Ok(CondensedBeam { m_l, m_ad, x: idx_i.iter().map(|&r| sys.x[r]).collect() })
}

/// Update matrices on the condensed unknowns: Q2 u^{n+1} + Q1 u^n + Q0
/// u^{n-1} = 0, with `q0 = None` for the two-level Newmark scheme whose state
/// already stacks (W, V).
pub struct SchemeMatrices {
    pub scheme: Scheme,
    pub dt: f64,
    pub ad: f64,
    pub q2: DMatrix<f64>,
    pub q1: DMatrix<f64>,
    pub q0: Option<DMatrix<f64>>,
}

/// First-order block d/dt (W, V) = M (W, V) used by the predictor-corrector
/// scheme: M = [[0, I], [M_L, ad M_ad]].
fn first_order_block(c: &CondensedBeam, ad: f64) -> DMatrix<f64> {
    let n = c.m_l.nrows();
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    m.view_mut((0, n), (n, n)).copy_from(&DMatrix::identity(n, n));
    m.view_mut((n, 0), (n, n)).copy_from(&c.m_l);
    m.view_mut((n, n), (n, n)).copy_from(&(ad * &c.m_ad));
    m
}

pub fn scheme_matrices(sys: &BeamSystem, scheme: Scheme, dt: f64) -> Result<SchemeMatrices> {
    assert!(dt.is_finite() && dt >= 0.0);
    let c = condense(sys)?;
    Ok(build_scheme_matrices(&c, scheme, dt, sys.ad))
}

fn build_scheme_matrices(c: &CondensedBeam, scheme: Scheme, dt: f64, ad: f64) -> SchemeMatrices {
    let n = c.m_l.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let (q2, q1, q0) = match scheme {
        Scheme::C2 => (
            id.clone(),
            -2.0 * &id - dt * dt * &c.m_l - dt * ad * &c.m_ad,
            Some(&id + dt * ad * &c.m_ad),
        ),
        // predict, then add the dissipation update: the three-level form
        // folds both stages into one matrix product
        Scheme::Upc2 => (
            id.clone(),
            -((&id + (dt * ad / 2.0) * &c.m_ad) * (2.0 * &id + dt * dt * &c.m_l)),
            Some(&id + dt * ad * &c.m_ad),
        ),
        Scheme::Pc22 => {
            let id2 = DMatrix::<f64>::identity(2 * n, 2 * n);
            let m = first_order_block(c, ad);
            let m2 = &m * &m;
            (
                id2.clone(),
                -&id2 - dt * &m - 0.75 * (dt * dt) * &m2,
                Some(0.25 * (dt * dt) * m2),
            )
        }
        Scheme::Nb2 => {
            let (beta, gamma) = (0.25, 0.5);
            let mut q2 = DMatrix::<f64>::zeros(2 * n, 2 * n);
            q2.view_mut((0, 0), (n, n)).copy_from(&(&id - (dt * dt * beta) * &c.m_l));
            q2.view_mut((0, n), (n, n)).copy_from(&(-(dt * dt * beta * ad) * &c.m_ad));
            q2.view_mut((n, 0), (n, n)).copy_from(&(-(dt * gamma) * &c.m_l));
            q2.view_mut((n, n), (n, n)).copy_from(&(&id - (dt * gamma * ad) * &c.m_ad));
            let w = dt * dt * (1.0 - 2.0 * beta) / 2.0;
            let mut b = DMatrix::<f64>::zeros(2 * n, 2 * n);
            b.view_mut((0, 0), (n, n)).copy_from(&(&id + w * &c.m_l));
            b.view_mut((0, n), (n, n)).copy_from(&(dt * &id + (w * ad) * &c.m_ad));
            b.view_mut((n, 0), (n, n)).copy_from(&((dt * (1.0 - gamma)) * &c.m_l));
            b.view_mut((n, n), (n, n)).copy_from(&(&id + (dt * (1.0 - gamma) * ad) * &c.m_ad));
            (q2, -b, None)
        }
    };
    SchemeMatrices { scheme, dt, ad, q2, q1, q0 }
}

pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex<f64>>,
    pub max_modulus: f64,
    /// Eigenvalues with |lambda| > 1 + UNIT_CIRCLE_TOL.
    pub outside_count: usize,
    pub scheme: Scheme,
    pub ad: f64,
    pub dt: f64,
}

/// Amplification spectrum of the update matrices: roots of
/// det(Q2 l^2 + Q1 l + Q0) = 0 via companion linearization, or of
/// det(Q2 l + Q1) = 0 for the two-level scheme. Moduli beyond 1e8 (spurious
/// blowups of a near-singular leading block) are filtered out.
pub fn spectrum(mats: &SchemeMatrices) -> Result<SpectrumReport> {
    let n = mats.q1.nrows();
    let lu = mats.q2.clone().lu();
    let a1 = lu
        .solve(&mats.q1)
        .ok_or_else(|| Error::SingularSystem("beam update matrix".into()))?;
    let m = match &mats.q0 {
        Some(q0) => {
            let a0 = lu
                .solve(q0)
                .ok_or_else(|| Error::SingularSystem("beam update matrix".into()))?;
            // state (u^{n-1}, u^n) -> (u^n, u^{n+1})
            let mut cm = DMatrix::<f64>::zeros(2 * n, 2 * n);
            cm.view_mut((0, n), (n, n)).copy_from(&DMatrix::identity(n, n));
            cm.view_mut((n, 0), (n, n)).copy_from(&(-&a0));
            cm.view_mut((n, n), (n, n)).copy_from(&(-&a1));
            cm
        }
        None => -a1,
    };
    let eigenvalues: Vec<Complex<f64>> = m
        .complex_eigenvalues()
        .iter()
        .copied()
        .filter(|z| z.norm() < 1e8)
        .collect();
    let max_modulus = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let outside_count = eigenvalues.iter().filter(|z| z.norm() > 1.0 + UNIT_CIRCLE_TOL).count();
    Ok(SpectrumReport {
        eigenvalues,
        max_modulus,
        outside_count,
        scheme: mats.scheme,
        ad: mats.ad,
        dt: mats.dt,
    })
}

/// Time step and dissipation strength for the beam: the sharpest symbol value
/// is -16/h^4 and the dissipation bound is mu = 16 ad with ad = df/(2 h^2).
pub fn beam_dt(c: &Composite1d, scheme: Scheme, df: f64, csf: f64) -> (f64, f64) {
    let h = c.grids.iter().map(|g| g.h).fold(f64::INFINITY, f64::min);
    let ad = df / (2.0 * h * h);
    let dt = stability::time_step(scheme, -16.0 / h.powi(4), 16.0 * ad, csf, 1.0);
    (dt, ad)
}

/// Assemble, condense and diagonalize in one call, choosing the time step
/// from the scheme's stability formula.
pub fn beam_spectrum(c: &Composite1d, scheme: Scheme, df: f64, csf: f64) -> Result<SpectrumReport> {
    let (dt, ad) = beam_dt(c, scheme, df, csf);
    let sys = assemble_beam(c, ad)?;
    spectrum(&scheme_matrices(&sys, scheme, dt)?)
}

pub struct BeamTrajectory {
    /// max|W| after each step, starting with the initial data.
    pub max_w: Vec<f64>,
    /// Final solution on the evolution unknowns.
    pub w: DVector<f64>,
    /// Coordinates matching `w`.
    pub x: Vec<f64>,
    /// Time reached (steps * dt).
    pub t: f64,
}

/// March the condensed recurrence and record the amplitude history. The same
/// update matrices drive both this and `spectrum`, so measured growth rates
/// can be compared against the dominant eigenvalue modulus. No amplitude
/// guard is applied: the point of the diagnostic is to follow weakly
/// unstable runs far beyond any production bound, and doubles hold the
/// growth comfortably; only a non-finite amplitude aborts.
pub fn integrate_beam(
    sys: &BeamSystem,
    scheme: Scheme,
    dt: f64,
    steps: usize,
    w0: impl Fn(f64) -> f64,
    v0: impl Fn(f64) -> f64,
) -> Result<BeamTrajectory> {
    let c = condense(sys)?;
    let mats = build_scheme_matrices(&c, scheme, dt, sys.ad);
    let n = c.m_l.nrows();
    let w_init = DVector::from_iterator(n, c.x.iter().map(|&x| w0(x)));
    let v_init = DVector::from_iterator(n, c.x.iter().map(|&x| v0(x)));

    let stack = |a: &DVector<f64>, b: &DVector<f64>| {
        DVector::from_fn(2 * n, |i, _| if i < n { a[i] } else { b[i - n] })
    };
    // state now / state one step back (unused by the two-level scheme)
    let (mut u_cur, mut u_prev) = match scheme {
        Scheme::C2 | Scheme::Upc2 => {
            let acc = &c.m_l * &w_init + sys.ad * (&c.m_ad * &v_init);
            let back = &w_init - dt * &v_init + (dt * dt / 2.0) * acc;
            (w_init.clone(), back)
        }
        Scheme::Pc22 => {
            let m = first_order_block(&c, sys.ad);
            let u0 = stack(&w_init, &v_init);
            let du = &m * &u0;
            let back = &u0 - dt * &du + (dt * dt / 2.0) * (&m * du);
            (u0, back)
        }
        Scheme::Nb2 => {
            let u0 = stack(&w_init, &v_init);
            (u0.clone(), u0)
        }
    };

    let lu = mats.q2.clone().lu();
    let a1 = lu
        .solve(&mats.q1)
        .ok_or_else(|| Error::SingularSystem("beam update matrix".into()))?;
    let a0 = match &mats.q0 {
        Some(q0) => Some(
            lu.solve(q0)
                .ok_or_else(|| Error::SingularSystem("beam update matrix".into()))?,
        ),
        None => None,
    };

    let mut max_w = Vec::with_capacity(steps + 1);
    max_w.push(u_cur.rows(0, n).amax());
    for step in 1..=steps {
        let u_next = match &a0 {
            Some(a0) => -(&a1 * &u_cur) - a0 * &u_prev,
            None => -(&a1 * &u_cur),
        };
        u_prev = std::mem::replace(&mut u_cur, u_next);
        let amax = u_cur.rows(0, n).amax();
        if !amax.is_finite() {
            return Err(Error::Instability { step, max_w: amax });
        }
        max_w.push(amax);
    }

    Ok(BeamTrajectory {
        max_w,
        w: u_cur.rows(0, n).into_owned(),
        x: c.x,
        t: steps as f64 * dt,
    })
}
