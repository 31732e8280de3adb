//! Time integration of the semidiscrete plate system
//! rho H W_tt = L_h W + F, stabilized by upwind-style hyper-dissipation
//! ad D_ad W_t added to the acceleration.
//!
//! Four second-order schemes share one spatial core: an explicit centered
//! scheme with lagged dissipation (C2), its predictor-corrector variant with
//! upwinded dissipation (UPC2), an Adams-Bashforth/Adams-Moulton pair on the
//! first-order system (PC22), and an implicit Newmark-beta scheme (NB2,
//! beta = 1/4, gamma = 1/2) that tolerates large time steps.
//!
//! Every stage that produces a displacement or velocity field ends with the
//! closure sweep: Dirichlet values, grid-to-grid interpolation, then the
//! ghost solve. C2 and UPC2 evolve displacement only and report velocity and
//! acceleration one step behind by post-processing; PC22 and NB2 carry
//! (W, V, A) at the current level.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};

use crate::boundary::{build_closure, BcData, GhostClosure, GridBc, Homogeneous, RowData, Scaled};
use crate::compgrid::{CompositeGrid, PointClass};
use crate::discretization::{active_points, apply_dissipation, dissipation_weights, GridOperator};
use crate::error::{Error, Result};
use crate::stability::{dissipation_coefficient, q_hat_max};
use crate::{PlateParams, Scheme};

const BETA: f64 = 0.25;
const GAMMA: f64 = 0.5;

/// Right-hand forcing f(x, t).
pub trait ForcingSource {
    fn eval(&self, x: [f64; 2], t: f64) -> f64;
}

pub struct NoForcing;

impl ForcingSource for NoForcing {
    fn eval(&self, _x: [f64; 2], _t: f64) -> f64 {
        0.0
    }
}

/// Source term of a reference solution (manufactured forcing; zero for the
/// free-vibration modes).
pub struct ExactForcing {
    pub exact: crate::exactsol::Exact,
    pub params: PlateParams,
}

impl ForcingSource for ExactForcing {
    fn eval(&self, x: [f64; 2], t: f64) -> f64 {
        self.exact.forcing(&self.params, x[0], x[1], t)
    }
}

/// Time dependence of the boundary data. All in-scope reference solutions
/// are separable with a cosine time factor.
#[derive(Clone, Copy, Debug)]
pub enum TimeFactor {
    /// Data constant in time (velocity and acceleration conditions zero).
    Constant,
    /// cos(omega t), differentiating to [cos, -om sin, -om^2 cos].
    Cosine(f64),
}

impl TimeFactor {
    /// Factors multiplying the spatial data in displacement, velocity and
    /// acceleration conditions at time t.
    pub fn eval(self, t: f64) -> [f64; 3] {
        match self {
            TimeFactor::Constant => [1.0, 0.0, 0.0],
            TimeFactor::Cosine(om) => {
                [(om * t).cos(), -om * (om * t).sin(), -om * om * (om * t).cos()]
            }
        }
    }
}

/// Boundary data source: a spatial evaluator and its time factor.
pub struct BcSource<'a> {
    pub spatial: &'a dyn BcData,
    pub time: TimeFactor,
}

impl BcSource<'static> {
    pub fn homogeneous() -> Self {
        BcSource { spatial: &Homogeneous, time: TimeFactor::Constant }
    }
}

/// The spatially discretized plate: interior operators, boundary closures,
/// dissipation coefficient, and the symbol bound the time steps come from.
pub struct PlateSystem<'a> {
    pub cg: &'a CompositeGrid,
    pub ops: Vec<GridOperator>,
    pub closures: Vec<GhostClosure>,
    pub params: PlateParams,
    /// Most negative operator symbol over all PDE points.
    pub q_hat: f64,
    /// Dissipation coefficient ad = df sqrt(-Q_M)/16.
    pub ad: f64,
    /// Flat storage index per PDE point, aligned with ops[g].pde.
    pde_flat: Vec<Vec<usize>>,
    /// Physical coordinates per PDE point, aligned with ops[g].pde.
    pde_coords: Vec<Vec<[f64; 2]>>,
}

impl<'a> PlateSystem<'a> {
    pub fn new(
        cg: &'a CompositeGrid,
        params: PlateParams,
        bcs: &[GridBc],
        delta: f64,
        df: f64,
    ) -> Result<Self> {
        if bcs.len() != cg.grids.len() {
            return Err(Error::Config(format!(
                "{} boundary assignments for {} component grids",
                bcs.len(),
                cg.grids.len()
            )));
        }
        let ops: Vec<GridOperator> = cg
            .grids
            .iter()
            .map(|g| GridOperator::new(g, &params, delta, active_points(g)))
            .collect();
        let closures = cg
            .grids
            .iter()
            .zip(bcs)
            .map(|(g, bc)| build_closure(g, bc, params.nu, delta))
            .collect::<Result<Vec<_>>>()?;
        let q_hat = q_hat_max(cg, &ops, params.k_spring)?;
        let ad = dissipation_coefficient(q_hat, df);
        let pde_flat = cg
            .grids
            .iter()
            .zip(&ops)
            .map(|(g, op)| op.pde.iter().map(|&p| g.index(p)).collect())
            .collect();
        let pde_coords = cg
            .grids
            .iter()
            .zip(&ops)
            .map(|(g, op)| op.pde.iter().map(|&p| g.phys_coords(p)).collect())
            .collect();
        Ok(PlateSystem { cg, ops, closures, params, q_hat, ad, pde_flat, pde_coords })
    }

    /// Closure sweep on one field: Dirichlet values, interpolation, ghost
    /// solve, with the spatial data scaled by the `deriv`-th time factor
    /// (0 = displacement, 1 = velocity, 2 = acceleration).
    pub fn close_field(&self, u: &mut [Vec<f64>], bc: &BcSource, t: f64, deriv: usize) -> Result<()> {
        let data = Scaled { base: bc.spatial, factor: bc.time.eval(t)[deriv] };
        for (closure, ug) in self.closures.iter().zip(u.iter_mut()) {
            closure.set_dirichlet(ug, &data);
        }
        self.cg.apply_interpolation(u);
        for (closure, ug) in self.closures.iter().zip(u.iter_mut()) {
            closure.solve_ghosts(ug, &data)?;
        }
        Ok(())
    }

    /// out = (L_h w + F(t)) / (rho H) at the PDE points; other entries of
    /// `out` are left untouched.
    pub fn pde_accel(
        &self,
        w: &[Vec<f64>],
        t: f64,
        forcing: &dyn ForcingSource,
        out: &mut [Vec<f64>],
    ) {
        let rho_h = self.params.mass();
        for (gi, g) in self.cg.grids.iter().enumerate() {
            self.ops[gi].apply(g, &w[gi], &mut out[gi]);
            for (j, &k) in self.pde_flat[gi].iter().enumerate() {
                out[gi][k] = (out[gi][k] + forcing.eval(self.pde_coords[gi][j], t)) / rho_h;
            }
        }
    }

    /// out += ad * D_ad u at the PDE points (no-op for ad = 0).
    pub fn add_dissipation(&self, u: &[Vec<f64>], out: &mut [Vec<f64>], scratch: &mut [Vec<f64>]) {
        if self.ad == 0.0 {
            return;
        }
        for (gi, g) in self.cg.grids.iter().enumerate() {
            apply_dissipation(g, &self.ops[gi].pde, &u[gi], &mut scratch[gi]);
            for &k in &self.pde_flat[gi] {
                out[gi][k] += self.ad * scratch[gi][k];
            }
        }
    }

    /// Max |u| over the PDE points of all grids.
    pub fn max_abs(&self, u: &[Vec<f64>]) -> f64 {
        let mut m = 0.0f64;
        for (gi, flats) in self.pde_flat.iter().enumerate() {
            for &k in flats {
                m = m.max(u[gi][k].abs());
            }
        }
        m
    }
}

/// Marching state for one scheme. Constructed from closed initial data at
/// t0; `step` advances dt at a time. Velocity and acceleration outputs are
/// time-tagged: C2/UPC2 report them one step behind the displacement.
pub struct Stepper<'a> {
    pub sys: &'a PlateSystem<'a>,
    pub scheme: Scheme,
    pub dt: f64,
    forcing: &'a dyn ForcingSource,
    bc: BcSource<'a>,
    t0: f64,
    n: usize,
    w: Vec<Vec<f64>>,
    w_prev: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    v_prev: Vec<Vec<f64>>,
    ka_prev: Vec<Vec<f64>>,
    s1: Vec<Vec<f64>>,
    s2: Vec<Vec<f64>>,
    s3: Vec<Vec<f64>>,
    s4: Vec<Vec<f64>>,
    implicit: Option<ImplicitOp>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        sys: &'a PlateSystem<'a>,
        scheme: Scheme,
        dt: f64,
        t0: f64,
        mut w0: Vec<Vec<f64>>,
        mut v0: Vec<Vec<f64>>,
        forcing: &'a dyn ForcingSource,
        bc: BcSource<'a>,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("nonpositive time step {dt}")));
        }
        sys.close_field(&mut w0, &bc, t0, 0)?;
        sys.close_field(&mut v0, &bc, t0, 1)?;
        let z = sys.cg.zeros();
        let mut st = Stepper {
            sys,
            scheme,
            dt,
            forcing,
            bc,
            t0,
            n: 0,
            w: w0,
            v: v0,
            w_prev: z.clone(),
            a: z.clone(),
            v_prev: z.clone(),
            ka_prev: z.clone(),
            s1: z.clone(),
            s2: z.clone(),
            s3: z.clone(),
            s4: z,
            implicit: None,
        };
        match scheme {
            Scheme::C2 | Scheme::Upc2 => {
                // Taylor level behind the start: W^{-1} = W0 - dt V0 + dt^2/2 A0
                st.sys.pde_accel(&st.w, t0, forcing, &mut st.s1);
                for gi in 0..sys.cg.grids.len() {
                    for &k in &sys.pde_flat[gi] {
                        st.w_prev[gi][k] =
                            st.w[gi][k] - dt * st.v[gi][k] + 0.5 * dt * dt * st.s1[gi][k];
                    }
                }
                sys.close_field(&mut st.w_prev, &st.bc, t0 - dt, 0)?;
            }
            Scheme::Pc22 => {
                // the first call to step() bootstraps; A^0 is needed there
                st.sys.pde_accel(&st.w, t0, forcing, &mut st.a);
                sys.close_field(&mut st.a, &st.bc, t0, 2)?;
            }
            Scheme::Nb2 => {
                st.sys.pde_accel(&st.w, t0, forcing, &mut st.a);
                st.sys.add_dissipation(&st.v, &mut st.a, &mut st.s1);
                sys.close_field(&mut st.a, &st.bc, t0, 2)?;
                st.implicit = Some(ImplicitOp::build(sys, dt)?);
            }
        }
        Ok(st)
    }

    /// Completed steps.
    pub fn steps(&self) -> usize {
        self.n
    }

    /// Time of the current displacement level.
    pub fn time(&self) -> f64 {
        self.t0 + self.n as f64 * self.dt
    }

    pub fn w(&self) -> &[Vec<f64>] {
        &self.w
    }

    /// Velocity with its time tag (lagging one step for C2/UPC2).
    pub fn velocity(&self) -> (f64, &[Vec<f64>]) {
        match self.scheme {
            Scheme::C2 | Scheme::Upc2 => {
                (self.t0 + self.n.saturating_sub(1) as f64 * self.dt, &self.v)
            }
            _ => (self.time(), &self.v),
        }
    }

    /// Acceleration with its time tag (lagging one step for C2/UPC2, where
    /// it is valid only after the first step).
    pub fn acceleration(&self) -> (f64, &[Vec<f64>]) {
        match self.scheme {
            Scheme::C2 | Scheme::Upc2 => {
                (self.t0 + self.n.saturating_sub(1) as f64 * self.dt, &self.a)
            }
            _ => (self.time(), &self.a),
        }
    }

    pub fn max_w(&self) -> f64 {
        self.sys.max_abs(&self.w)
    }

    pub fn step(&mut self) -> Result<()> {
        match self.scheme {
            Scheme::C2 => self.step_c2()?,
            Scheme::Upc2 => self.step_upc2()?,
            Scheme::Pc22 => {
                if self.n == 0 {
                    self.step_pc22_bootstrap()?
                } else {
                    self.step_pc22()?
                }
            }
            Scheme::Nb2 => self.step_nb2()?,
        }
        self.n += 1;
        self.guard()
    }

    fn guard(&self) -> Result<()> {
        let mut m = self.sys.max_abs(&self.w);
        if matches!(self.scheme, Scheme::Pc22 | Scheme::Nb2) {
            m = m.max(self.sys.max_abs(&self.v));
        }
        if m.is_finite() {
            Ok(())
        } else {
            Err(Error::Instability { step: self.n, max_w: m })
        }
    }

    fn step_c2(&mut self) -> Result<()> {
        let (dt, tn) = (self.dt, self.time());
        let sys = self.sys;
        sys.pde_accel(&self.w, tn, self.forcing, &mut self.s1); // A^n
        let dissipating = sys.ad > 0.0;
        if dissipating {
            for (gi, g) in sys.cg.grids.iter().enumerate() {
                apply_dissipation(g, &sys.ops[gi].pde, &self.w[gi], &mut self.s2[gi]);
                apply_dissipation(g, &sys.ops[gi].pde, &self.w_prev[gi], &mut self.s3[gi]);
            }
        }
        for gi in 0..sys.cg.grids.len() {
            for &k in &sys.pde_flat[gi] {
                let mut val = 2.0 * self.w[gi][k] - self.w_prev[gi][k]
                    + dt * dt * self.s1[gi][k];
                if dissipating {
                    val += dt * sys.ad * (self.s2[gi][k] - self.s3[gi][k]);
                }
                self.s4[gi][k] = val;
            }
        }
        sys.close_field(&mut self.s4, &self.bc, tn + dt, 0)?;
        self.postprocess_and_rotate(dt)
    }

    fn step_upc2(&mut self) -> Result<()> {
        let (dt, tn) = (self.dt, self.time());
        let sys = self.sys;
        sys.pde_accel(&self.w, tn, self.forcing, &mut self.s1); // A^n
        for gi in 0..sys.cg.grids.len() {
            for &k in &sys.pde_flat[gi] {
                self.s4[gi][k] =
                    2.0 * self.w[gi][k] - self.w_prev[gi][k] + dt * dt * self.s1[gi][k];
            }
        }
        sys.close_field(&mut self.s4, &self.bc, tn + dt, 0)?; // W^p
        if sys.ad > 0.0 {
            for (gi, g) in sys.cg.grids.iter().enumerate() {
                apply_dissipation(g, &sys.ops[gi].pde, &self.s4[gi], &mut self.s2[gi]);
                apply_dissipation(g, &sys.ops[gi].pde, &self.w_prev[gi], &mut self.s3[gi]);
            }
            for gi in 0..sys.cg.grids.len() {
                for &k in &sys.pde_flat[gi] {
                    self.s4[gi][k] += 0.5 * dt * sys.ad * (self.s2[gi][k] - self.s3[gi][k]);
                }
            }
            sys.close_field(&mut self.s4, &self.bc, tn + dt, 0)?;
        }
        self.postprocess_and_rotate(dt)
    }

    /// Shared C2/UPC2 tail: V^n and A^n outputs, then level rotation
    /// (s4 holds the closed W^{n+1}, s1 the PDE acceleration A^n). The
    /// velocity difference of two closed displacement levels is closed by
    /// linearity; the acceleration needs its own sweep to define it at
    /// interpolation, boundary and ghost points.
    fn postprocess_and_rotate(&mut self, dt: f64) -> Result<()> {
        let tn = self.time();
        for gi in 0..self.sys.cg.grids.len() {
            for k in 0..self.v[gi].len() {
                self.v[gi][k] = (self.s4[gi][k] - self.w_prev[gi][k]) / (2.0 * dt);
            }
        }
        self.sys.close_field(&mut self.s1, &self.bc, tn, 2)?;
        std::mem::swap(&mut self.a, &mut self.s1);
        std::mem::swap(&mut self.w_prev, &mut self.w);
        std::mem::swap(&mut self.w, &mut self.s4);
        Ok(())
    }

    fn step_pc22(&mut self) -> Result<()> {
        let (dt, tn) = (self.dt, self.time());
        let t1 = tn + dt;
        let sys = self.sys;
        // s1 = ka^n = A^n + ad D_ad V^n
        for gi in 0..sys.cg.grids.len() {
            self.s1[gi].copy_from_slice(&self.a[gi]);
        }
        let mut scratch = std::mem::take(&mut self.s4);
        sys.add_dissipation(&self.v, &mut self.s1, &mut scratch);
        self.s4 = scratch;
        // predictors
        for gi in 0..sys.cg.grids.len() {
            for &k in &sys.pde_flat[gi] {
                self.s2[gi][k] =
                    self.w[gi][k] + dt * (1.5 * self.v[gi][k] - 0.5 * self.v_prev[gi][k]);
                self.s3[gi][k] =
                    self.v[gi][k] + dt * (1.5 * self.s1[gi][k] - 0.5 * self.ka_prev[gi][k]);
            }
        }
        sys.close_field(&mut self.s2, &self.bc, t1, 0)?; // W^p
        sys.close_field(&mut self.s3, &self.bc, t1, 1)?; // V^p
        sys.pde_accel(&self.s2, t1, self.forcing, &mut self.s4); // A^p
        // correctors: W first (uses V^p), then ka^p into s4, then V
        for gi in 0..sys.cg.grids.len() {
            for &k in &sys.pde_flat[gi] {
                self.s2[gi][k] = self.w[gi][k] + 0.5 * dt * (self.v[gi][k] + self.s3[gi][k]);
            }
        }
        let mut scratch = std::mem::take(&mut self.ka_prev); // consumed this step
        sys.add_dissipation(&self.s3, &mut self.s4, &mut scratch); // s4 = ka^p
        self.ka_prev = scratch;
        for gi in 0..sys.cg.grids.len() {
            for &k in &sys.pde_flat[gi] {
                self.s3[gi][k] = self.v[gi][k] + 0.5 * dt * (self.s1[gi][k] + self.s4[gi][k]);
            }
        }
        sys.close_field(&mut self.s2, &self.bc, t1, 0)?; // W^{n+1}
        sys.close_field(&mut self.s3, &self.bc, t1, 1)?; // V^{n+1}
        sys.pde_accel(&self.s2, t1, self.forcing, &mut self.a); // A^{n+1}
        sys.close_field(&mut self.a, &self.bc, t1, 2)?;
        std::mem::swap(&mut self.v_prev, &mut self.v);
        std::mem::swap(&mut self.v, &mut self.s3);
        std::mem::swap(&mut self.ka_prev, &mut self.s1);
        std::mem::swap(&mut self.w, &mut self.s2);
        Ok(())
    }

    /// First PC22 step: advance displacement by one UPC2-style step and the
    /// velocity by a trapezoidal correction, seeding the multistep history.
    fn step_pc22_bootstrap(&mut self) -> Result<()> {
        let (dt, t0) = (self.dt, self.t0);
        let t1 = t0 + dt;
        let sys = self.sys;
        // W^{-1} and W^p as in UPC2 (self.a = A^0 from construction)
        for gi in 0..sys.cg.grids.len() {
            for &k in &sys.pde_flat[gi] {
                let (w, v, a) = (self.w[gi][k], self.v[gi][k], self.a[gi][k]);
                self.s2[gi][k] = w + dt * v + 0.5 * dt * dt * a;
                self.s3[gi][k] = w - dt * v + 0.5 * dt * dt * a;
            }
        }
        sys.close_field(&mut self.s2, &self.bc, t1, 0)?;
        sys.close_field(&mut self.s3, &self.bc, t0 - dt, 0)?;
        if sys.ad > 0.0 {
            for (gi, g) in sys.cg.grids.iter().enumerate() {
                apply_dissipation(g, &sys.ops[gi].pde, &self.s2[gi], &mut self.s1[gi]);
                apply_dissipation(g, &sys.ops[gi].pde, &self.s3[gi], &mut self.s4[gi]);
            }
            for gi in 0..sys.cg.grids.len() {
                for &k in &sys.pde_flat[gi] {
                    self.s2[gi][k] += 0.5 * dt * sys.ad * (self.s1[gi][k] - self.s4[gi][k]);
                }
            }
            sys.close_field(&mut self.s2, &self.bc, t1, 0)?;
        }
        // ka^0 = A^0 + ad D_ad V^0
        for gi in 0..sys.cg.grids.len() {
            self.s1[gi].copy_from_slice(&self.a[gi]);
        }
        let mut scratch = std::mem::take(&mut self.s4);
        sys.add_dissipation(&self.v, &mut self.s1, &mut scratch);
        // velocity predictor V^p = V^0 + dt ka^0
        for gi in 0..sys.cg.grids.len() {
            for &k in &sys.pde_flat[gi] {
                scratch[gi][k] = self.v[gi][k] + dt * self.s1[gi][k];
            }
        }
        sys.close_field(&mut scratch, &self.bc, t1, 1)?;
        // ka^1 estimate on (W^1, V^p)
        sys.pde_accel(&self.s2, t1, self.forcing, &mut self.s3);
        let mut scratch2 = std::mem::take(&mut self.ka_prev);
        sys.add_dissipation(&scratch, &mut self.s3, &mut scratch2);
        self.ka_prev = scratch2;
        // V^1 = V^0 + dt/2 (ka^0 + ka^1)
        for gi in 0..sys.cg.grids.len() {
            for &k in &sys.pde_flat[gi] {
                scratch[gi][k] = self.v[gi][k] + 0.5 * dt * (self.s1[gi][k] + self.s3[gi][k]);
            }
        }
        sys.close_field(&mut scratch, &self.bc, t1, 1)?;
        self.s4 = scratch;
        // rotate: history (V^0, ka^0), state (W^1, V^1), A^1
        std::mem::swap(&mut self.v_prev, &mut self.v);
        std::mem::swap(&mut self.v, &mut self.s4);
        std::mem::swap(&mut self.ka_prev, &mut self.s1);
        std::mem::swap(&mut self.w, &mut self.s2);
        sys.pde_accel(&self.w, t1, self.forcing, &mut self.a);
        sys.close_field(&mut self.a, &self.bc, t1, 2)?;
        Ok(())
    }

    fn step_nb2(&mut self) -> Result<()> {
        let (dt, tn) = (self.dt, self.time());
        let t1 = tn + dt;
        let sys = self.sys;
        // Stage I predictors
        for gi in 0..sys.cg.grids.len() {
            for &k in &sys.pde_flat[gi] {
                let (w, v, a) = (self.w[gi][k], self.v[gi][k], self.a[gi][k]);
                self.s1[gi][k] = w + dt * v + 0.5 * dt * dt * (1.0 - 2.0 * BETA) * a;
                self.s2[gi][k] = v + dt * (1.0 - GAMMA) * a;
            }
        }
        sys.close_field(&mut self.s1, &self.bc, t1, 0)?; // W^p
        sys.close_field(&mut self.s2, &self.bc, t1, 1)?; // V^p
        // Stage II: solve for A^{n+1} on all stored points
        let implicit = self.implicit.as_ref().expect("built at construction");
        implicit.solve(
            sys,
            &self.s1,
            &self.s2,
            t1,
            self.forcing,
            &self.bc,
            &mut self.s3,
        )?;
        // Stage III correctors (predictor values at PDE points are
        // unchanged by the closure sweep)
        for gi in 0..sys.cg.grids.len() {
            for &k in &sys.pde_flat[gi] {
                self.s1[gi][k] += BETA * dt * dt * self.s3[gi][k];
                self.s2[gi][k] += GAMMA * dt * self.s3[gi][k];
            }
        }
        sys.close_field(&mut self.s1, &self.bc, t1, 0)?;
        sys.close_field(&mut self.s2, &self.bc, t1, 1)?;
        std::mem::swap(&mut self.w, &mut self.s1);
        std::mem::swap(&mut self.v, &mut self.s2);
        std::mem::swap(&mut self.a, &mut self.s3);
        Ok(())
    }
}

/// Factorized NB2 acceleration system: PDE rows
/// (rho H - beta dt^2 L_h - gamma dt rho H ad D_ad), Dirichlet and ghost
/// closure rows (with twice-differentiated data), interpolation rows, and
/// identity rows at unused points.
struct ImplicitOp {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    offsets: Vec<usize>,
    total: usize,
    /// Marks Dirichlet boundary points per grid (flat-indexed).
    dirichlet: Vec<Vec<bool>>,
}

impl ImplicitOp {
    fn build(sys: &PlateSystem, dt: f64) -> Result<Self> {
        let rho_h = sys.params.mass();
        let ad = sys.ad;
        let grids = &sys.cg.grids;
        let mut offsets = Vec::with_capacity(grids.len() + 1);
        let mut total = 0usize;
        for g in grids.iter() {
            offsets.push(total);
            total += g.ext[0] * g.ext[1];
        }
        offsets.push(total);

        let mut dirichlet: Vec<Vec<bool>> = grids
            .iter()
            .map(|g| vec![false; g.ext[0] * g.ext[1]])
            .collect();
        for (gi, closure) in sys.closures.iter().enumerate() {
            for &(flat, _) in &closure.dirichlet {
                dirichlet[gi][flat] = true;
            }
        }

        let mut entries: std::collections::BTreeMap<(usize, usize), f64> =
            std::collections::BTreeMap::new();
        let mut add = |r: usize, c: usize, v: f64| {
            if v != 0.0 {
                *entries.entry((r, c)).or_insert(0.0) += v;
            }
        };

        for (gi, g) in grids.iter().enumerate() {
            let off = offsets[gi];
            // identity rows: unused points and Dirichlet boundary points
            for p in g.points() {
                let k = g.index(p);
                match g.class_at(p) {
                    PointClass::Unused => add(off + k, off + k, 1.0),
                    PointClass::Interior | PointClass::Boundary if dirichlet[gi][k] => {
                        add(off + k, off + k, 1.0)
                    }
                    _ => {}
                }
            }
            // PDE rows
            let op = &sys.ops[gi];
            for (j, &pt) in op.pde.iter().enumerate() {
                let k = sys.pde_flat[gi][j];
                if dirichlet[gi][k] {
                    continue;
                }
                let row = off + k;
                add(row, row, rho_h);
                for (di, strow) in op.stencils[j].iter().enumerate() {
                    for (dj, &wv) in strow.iter().enumerate() {
                        if wv != 0.0 {
                            let col = off
                                + g.index([pt[0] + di as i64 - 2, pt[1] + dj as i64 - 2]);
                            add(row, col, -BETA * dt * dt * wv);
                        }
                    }
                }
                if ad > 0.0 {
                    for (o, dw) in dissipation_weights() {
                        let col = off + g.index([pt[0] + o[0], pt[1] + o[1]]);
                        add(row, col, -GAMMA * dt * rho_h * ad * dw);
                    }
                }
            }
            // ghost closure rows (one per unknown; any row-to-slot pairing
            // yields the same solution of the square system)
            let closure = &sys.closures[gi];
            for (j, crow) in closure.rows.iter().enumerate() {
                let row = off + closure.unknowns[j];
                for &(flat, _, c) in &crow.pts {
                    add(row, off + flat, c);
                }
            }
        }
        // interpolation rows couple grids
        for ip in &sys.cg.interp {
            let row = offsets[ip.grid] + grids[ip.grid].index(ip.pt);
            add(row, row, 1.0);
            let d = &grids[ip.donor];
            for (a, wa) in ip.w[0].iter().enumerate() {
                for (b, wb) in ip.w[1].iter().enumerate() {
                    let col = offsets[ip.donor]
                        + d.index([ip.base[0] + a as i64, ip.base[1] + b as i64]);
                    add(row, col, -wa * wb);
                }
            }
        }

        let triplets: Vec<Triplet<usize, usize, f64>> = entries
            .into_iter()
            .map(|((r, c), v)| Triplet::new(r, c, v))
            .collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(total, total, &triplets)
            .map_err(|e| Error::SingularSystem(format!("implicit assembly: {e:?}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| Error::SingularSystem(format!("implicit factorization: {e:?}")))?;
        Ok(ImplicitOp { lu, offsets, total, dirichlet })
    }

    /// Solve for the acceleration at t1 given closed predictors W^p, V^p.
    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        sys: &PlateSystem,
        wp: &[Vec<f64>],
        vp: &[Vec<f64>],
        t1: f64,
        forcing: &dyn ForcingSource,
        bc: &BcSource,
        out: &mut [Vec<f64>],
    ) -> Result<()> {
        let rho_h = sys.params.mass();
        let mut rhs = faer::Mat::<f64>::zeros(self.total, 1);
        let data = Scaled { base: bc.spatial, factor: bc.time.eval(t1)[2] };
        for (gi, g) in sys.cg.grids.iter().enumerate() {
            let off = self.offsets[gi];
            // PDE rows: L_h W^p + F + rho H ad D_ad V^p
            sys.ops[gi].apply(g, &wp[gi], &mut out[gi]);
            for (j, &k) in sys.pde_flat[gi].iter().enumerate() {
                if self.dirichlet[gi][k] {
                    continue;
                }
                rhs[(off + k, 0)] =
                    out[gi][k] + forcing.eval(sys.pde_coords[gi][j], t1);
            }
            if sys.ad > 0.0 {
                apply_dissipation(g, &sys.ops[gi].pde, &vp[gi], &mut out[gi]);
                for &k in &sys.pde_flat[gi] {
                    if !self.dirichlet[gi][k] {
                        rhs[(off + k, 0)] += rho_h * sys.ad * out[gi][k];
                    }
                }
            }
            // Dirichlet rows: accel data
            let closure = &sys.closures[gi];
            for &(flat, x) in &closure.dirichlet {
                rhs[(off + flat, 0)] = data.point(x);
            }
            // ghost rows: twice-differentiated condition/residual data
            for (j, crow) in closure.rows.iter().enumerate() {
                let r = off + closure.unknowns[j];
                rhs[(r, 0)] = match &crow.data {
                    RowData::Condition(op) => data.condition(op) * crow.scale,
                    RowData::Residual => {
                        crow.pts.iter().map(|&(_, x, c)| c * data.point(x)).sum()
                    }
                };
            }
        }
        self.lu.solve_in_place(&mut rhs);
        for (gi, og) in out.iter_mut().enumerate() {
            let off = self.offsets[gi];
            for (k, o) in og.iter_mut().enumerate() {
                *o = rhs[(off + k, 0)];
            }
        }
        Ok(())
    }
}
