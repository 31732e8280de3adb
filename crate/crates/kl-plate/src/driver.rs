//! Run orchestration: configuration parsing and validation, problem
//! assembly (grid + parameters + exact solution + initial data), time loops
//! with max-norm error measurement, convergence tables, and the analysis
//! sweeps (1D beam spectra, operator symbol, amplification-root locus).
//!
//! Everything here is deterministic: fixed iteration orders, no wall-clock
//! data in any output, and all floating-point output printed with `{:.16e}`
//! so identical configurations produce byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boundary::{BcData, BcKind, GridBc, Homogeneous};
use crate::compgrid::{
    build_overlapping_1d, build_single_1d, disc, single_square, square_with_hole,
    two_patch_square, ComponentGrid, CompositeGrid, PointClass,
};
use crate::error::{Error, Result};
use crate::exactsol::{CircularBc, CircularMode, Exact, MmsFamily, SpatialBc};
use crate::stability::{check_roots, symbol, time_step};
use crate::stepping::{
    BcSource, ExactForcing, ForcingSource, NoForcing, PlateSystem, Stepper, TimeFactor,
};
use crate::{beam1d, PlateParams, Scheme};

/// What a run solves or analyzes.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Problem {
    /// Manufactured solution cos(pi x) cos(pi t) on the single square grid.
    #[serde(rename = "mms-1d")]
    Mms1d,
    /// Manufactured solution cos(pi x) cos(pi y) cos(pi t) on the
    /// two-component overlapping square grid.
    #[serde(rename = "mms-2d")]
    Mms2d,
    /// Free-vibration mode of the unit circular plate on the disc grid.
    #[serde(rename = "circular-mode")]
    CircularMode,
    /// Cosine-bump displacement release on the square-with-hole grid.
    #[serde(rename = "square-with-hole-pulse")]
    SquareWithHolePulse,
    /// 1D beam amplification spectra over schemes and dissipation factors.
    #[serde(rename = "beam1d-eig")]
    Beam1dEig,
    /// Operator symbol over a frequency lattice.
    #[serde(rename = "symbol-sweep")]
    SymbolSweep,
    /// Amplification-root locus over the symbol range.
    #[serde(rename = "roots")]
    Roots,
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Problem::Mms1d => "mms-1d",
            Problem::Mms2d => "mms-2d",
            Problem::CircularMode => "circular-mode",
            Problem::SquareWithHolePulse => "square-with-hole-pulse",
            Problem::Beam1dEig => "beam1d-eig",
            Problem::SymbolSweep => "symbol-sweep",
            Problem::Roots => "roots",
        })
    }
}

fn default_level() -> u32 {
    1
}
fn default_scheme() -> Scheme {
    Scheme::C2
}
fn default_bc() -> BcKind {
    BcKind::Clamped
}
fn default_delta() -> f64 {
    1.0
}
fn default_df() -> f64 {
    0.1
}
fn default_mode_n() -> u32 {
    2
}
fn default_one() -> f64 {
    1.0
}
fn default_nu() -> f64 {
    0.3
}
fn default_threads() -> usize {
    1
}

/// One run, as read from a JSON configuration file. Unknown keys are
/// rejected. Physical coefficients left unset take problem-specific
/// defaults (see `params`).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Problem,
    /// Grid refinement level: target spacing h = 0.1 / level.
    #[serde(default = "default_level")]
    pub level: u32,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Boundary condition applied to every physical side.
    #[serde(default = "default_bc")]
    pub bc: BcKind,
    /// Stencil selector for 1st/2nd derivative approximations (0 or 1).
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Dissipation factor df (ad = df sqrt(-Q_M)/16).
    #[serde(default = "default_df")]
    pub df: f64,
    /// Time-step safety factor; defaults to 0.9 (explicit) / 5 (implicit).
    #[serde(default)]
    pub csf: Option<f64>,
    /// Angular mode number for circular-mode runs.
    #[serde(default = "default_mode_n")]
    pub mode_n: u32,
    /// Final time; defaults to 0.1 (manufactured) / 0.2 (circular-mode).
    #[serde(default)]
    pub tfinal: Option<f64>,
    /// Step count; overrides tfinal (the step size then comes straight from
    /// the stability formula). Defaults to 2000 for the pulse problem.
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default = "default_one")]
    pub rho: f64,
    #[serde(default = "default_one")]
    pub thickness: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default)]
    pub k_spring: Option<f64>,
    #[serde(default)]
    pub tension: Option<f64>,
    /// Flexural rigidity D; mutually exclusive with `youngs`.
    #[serde(default)]
    pub d_flex: Option<f64>,
    /// Young's modulus E, converted via D = E H^3 / (12 (1 - nu^2)).
    #[serde(default)]
    pub youngs: Option<f64>,
    /// Output directory for CSV tables and field snapshots; no files are
    /// written when unset.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Worker threads. Accepted for forward compatibility; the desk-scale
    /// passes run serially regardless, which keeps outputs deterministic.
    #[serde(default = "default_threads")]
    pub threads: usize,
    /// Snapshot cadence in steps; defaults to ceil(steps / 20).
    #[serde(default)]
    pub snapshot_every: Option<usize>,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("configuration: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn minimal(problem: Problem) -> Self {
        RunConfig {
            problem,
            level: default_level(),
            scheme: default_scheme(),
            bc: default_bc(),
            delta: default_delta(),
            df: default_df(),
            csf: None,
            mode_n: default_mode_n(),
            tfinal: None,
            steps: None,
            rho: 1.0,
            thickness: 1.0,
            nu: default_nu(),
            k_spring: None,
            tension: None,
            d_flex: None,
            youngs: None,
            out: None,
            threads: 1,
            snapshot_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.level == 0 {
            return Err(Error::Config("level must be at least 1".into()));
        }
        if !(self.delta == 0.0 || self.delta == 1.0) {
            return Err(Error::Config(format!("delta must be 0 or 1, got {}", self.delta)));
        }
        if !(self.df.is_finite() && self.df >= 0.0) {
            return Err(Error::Config(format!("df must be nonnegative, got {}", self.df)));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.d_flex.is_some() && self.youngs.is_some() {
            return Err(Error::Config("specify d_flex or youngs, not both".into()));
        }
        if let Some(csf) = self.csf {
            if !(csf.is_finite() && csf > 0.0) {
                return Err(Error::Config(format!("csf must be positive, got {csf}")));
            }
        }
        if self.problem == Problem::CircularMode && self.bc == BcKind::Free {
            return Err(Error::Config(
                "circular-mode has reference solutions for clamped and supported rims only"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// Physical parameters with problem-appropriate defaults: the
    /// manufactured 1D and circular-mode problems are pure bending
    /// (K = T = 0, D = 1), the rest default to K = T = D = 1.
    pub fn params(&self) -> Result<PlateParams> {
        let (k0, t0) = match self.problem {
            Problem::Mms1d | Problem::CircularMode => (0.0, 0.0),
            _ => (1.0, 1.0),
        };
        let k_spring = self.k_spring.unwrap_or(k0);
        let tension = self.tension.unwrap_or(t0);
        let p = match self.youngs {
            Some(e) => {
                PlateParams::from_youngs(self.rho, self.thickness, e, self.nu, k_spring, tension)
            }
            None => PlateParams {
                rho: self.rho,
                thickness: self.thickness,
                k_spring,
                tension,
                d_flex: self.d_flex.unwrap_or(1.0),
                nu: self.nu,
            },
        };
        if !(p.rho > 0.0 && p.thickness > 0.0) {
            return Err(Error::Config("rho and thickness must be positive".into()));
        }
        if p.d_flex < 0.0 || p.tension < 0.0 || p.k_spring < 0.0 {
            return Err(Error::Config("K, T and D must be nonnegative".into()));
        }
        Ok(p)
    }

    pub fn csf_for(&self, scheme: Scheme) -> f64 {
        self.csf.unwrap_or(match scheme {
            Scheme::Nb2 => 5.0,
            _ => 0.9,
        })
    }

    fn tfinal_resolved(&self) -> Option<f64> {
        self.tfinal.or(match self.problem {
            Problem::Mms1d | Problem::Mms2d => Some(0.1),
            Problem::CircularMode => Some(0.2),
            _ => None,
        })
    }

    fn steps_resolved(&self) -> Option<usize> {
        self.steps.or(match self.problem {
            Problem::SquareWithHolePulse => Some(2000),
            _ => None,
        })
    }
}

/// Composite grid for a problem at a refinement level.
pub fn build_grid(problem: Problem, level: u32) -> Result<CompositeGrid> {
    match problem {
        Problem::Mms1d => single_square(level),
        Problem::Mms2d => two_patch_square(level),
        Problem::CircularMode => disc(level),
        Problem::SquareWithHolePulse => square_with_hole(level),
        // analysis problems sweep the plain square discretization
        Problem::Beam1dEig | Problem::SymbolSweep | Problem::Roots => single_square(level),
    }
}

fn exact_solution(cfg: &RunConfig, params: &PlateParams) -> Result<Option<Exact>> {
    Ok(match cfg.problem {
        Problem::Mms1d => Some(Exact::Mms(MmsFamily::Cos1d)),
        Problem::Mms2d => Some(Exact::Mms(MmsFamily::Cos2d)),
        Problem::CircularMode => {
            let bc = match cfg.bc {
                BcKind::Clamped => CircularBc::Clamped,
                BcKind::Supported => CircularBc::Supported,
                BcKind::Free => unreachable!("rejected by validate"),
            };
            Some(Exact::Circular(CircularMode::new(bc, cfg.mode_n, params.nu, params)))
        }
        _ => None,
    })
}

/// Initial displacement of the pulse problem: a compact cosine bump of
/// radius 0.4 released between the outer edge and the hole.
fn pulse_displacement(x: f64, y: f64) -> f64 {
    let r = (x + 1.4).hypot(y);
    if r <= 0.4 {
        0.25 * ((std::f64::consts::PI * r / 0.4).cos() + 1.0)
    } else {
        0.0
    }
}

fn initial_data(cg: &CompositeGrid, exact: Option<&Exact>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut w = cg.zeros();
    let mut v = cg.zeros();
    for (gi, g) in cg.grids.iter().enumerate() {
        for p in g.points() {
            let [x, y] = g.phys_coords(p);
            let k = g.index(p);
            match exact {
                Some(e) => {
                    w[gi][k] = e.value(x, y, 0.0);
                    v[gi][k] = e.velocity(x, y, 0.0);
                }
                None => w[gi][k] = pulse_displacement(x, y),
            }
        }
    }
    (w, v)
}

fn is_solution_point(class: PointClass) -> bool {
    matches!(class, PointClass::Interior | PointClass::Boundary | PointClass::Interp)
}

/// Max |u| over the solution points (interior, boundary, interpolation)
/// of one component.
fn field_max(g: &ComponentGrid, u: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for p in g.points() {
        if is_solution_point(g.class_at(p)) {
            m = m.max(u[g.index(p)].abs());
        }
    }
    m
}

/// Max-norm error of a field against a reference function of (x, y).
fn max_error(cg: &CompositeGrid, u: &[Vec<f64>], reference: impl Fn(f64, f64) -> f64) -> f64 {
    let mut m = 0.0f64;
    for (gi, g) in cg.grids.iter().enumerate() {
        for p in g.points() {
            if is_solution_point(g.class_at(p)) {
                let [x, y] = g.phys_coords(p);
                m = m.max((u[gi][g.index(p)] - reference(x, y)).abs());
            }
        }
    }
    m
}

/// Result of one time-marching run.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub problem: Problem,
    pub level: u32,
    pub scheme: Scheme,
    pub dt: f64,
    pub steps: usize,
    pub t_final: f64,
    /// Max-norm errors (w, v, a) against the exact solution, when known.
    pub errors: Option<[f64; 3]>,
    pub max_w_initial: f64,
    pub max_w_final: f64,
    /// Running max of |w| per component grid over the whole run.
    pub grid_peak: Vec<f64>,
}

pub fn run_solve(cfg: &RunConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    match cfg.problem {
        Problem::Mms1d | Problem::Mms2d | Problem::CircularMode | Problem::SquareWithHolePulse => {
        }
        other => {
            return Err(Error::Config(format!(
                "'{other}' is an analysis sweep, not a time-marching problem"
            )))
        }
    }
    let params = cfg.params()?;
    let cg = build_grid(cfg.problem, cfg.level)?;
    let bcs: Vec<GridBc> = cg.grids.iter().map(|g| GridBc::uniform(cfg.bc, g)).collect();
    let exact = exact_solution(cfg, &params)?;
    let sys = PlateSystem::new(&cg, params, &bcs, cfg.delta, cfg.df)?;

    let dt_formula = time_step(
        cfg.scheme,
        sys.q_hat,
        32.0 * sys.ad,
        cfg.csf_for(cfg.scheme),
        params.mass(),
    );
    let (dt, nsteps, t_final) = match (cfg.steps_resolved(), cfg.tfinal_resolved()) {
        (Some(n), _) => (dt_formula, n.max(1), dt_formula * n.max(1) as f64),
        (None, Some(tf)) => {
            if !(tf.is_finite() && tf > 0.0) {
                return Err(Error::Config(format!("tfinal must be positive, got {tf}")));
            }
            let n = ((tf / dt_formula) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            (tf / n as f64, n, tf)
        }
        (None, None) => return Err(Error::Config("specify tfinal or steps".into())),
    };

    let forcing: Box<dyn ForcingSource> = match exact {
        Some(e) => Box::new(ExactForcing { exact: e, params }),
        None => Box::new(NoForcing),
    };
    let spatial: Box<dyn BcData> = match exact {
        Some(e) => Box::new(SpatialBc(e)),
        None => Box::new(Homogeneous),
    };
    let time = match exact {
        Some(Exact::Mms(_)) => TimeFactor::Cosine(std::f64::consts::PI),
        Some(Exact::Circular(m)) => TimeFactor::Cosine(m.omega),
        None => TimeFactor::Constant,
    };

    let (w0, v0) = initial_data(&cg, exact.as_ref());
    let mut stepper = Stepper::new(
        &sys,
        cfg.scheme,
        dt,
        0.0,
        w0,
        v0,
        &*forcing,
        BcSource { spatial: &*spatial, time },
    )?;

    let snapshot_every = cfg.snapshot_every.unwrap_or_else(|| nsteps.div_ceil(20)).max(1);
    let mut snapshots = SnapshotWriter::new(cfg.out.as_deref())?;
    snapshots.write(&cg, &stepper)?;

    let max_w_initial = stepper.max_w();
    let mut grid_peak: Vec<f64> =
        cg.grids.iter().enumerate().map(|(gi, g)| field_max(g, &stepper.w()[gi])).collect();
    for s in 1..=nsteps {
        stepper.step()?;
        for (gi, g) in cg.grids.iter().enumerate() {
            grid_peak[gi] = grid_peak[gi].max(field_max(g, &stepper.w()[gi]));
        }
        if s % snapshot_every == 0 || s == nsteps {
            snapshots.write(&cg, &stepper)?;
        }
    }

    let max_w_final = stepper.max_w();
    let errors = match &exact {
        None => None,
        Some(e) => {
            // the two-level schemes report velocity and acceleration one
            // step behind the displacement, so march one step past T and
            // read the lagging fields at their tags
            let w_at_t: Vec<Vec<f64>> = match cfg.scheme {
                Scheme::C2 | Scheme::Upc2 => {
                    let keep = stepper.w().to_vec();
                    stepper.step()?;
                    keep
                }
                _ => stepper.w().to_vec(),
            };
            let (tv, v) = stepper.velocity();
            let (ta, a) = stepper.acceleration();
            debug_assert!((tv - t_final).abs() < 1e-9 && (ta - t_final).abs() < 1e-9);
            Some([
                max_error(&cg, &w_at_t, |x, y| e.value(x, y, t_final)),
                max_error(&cg, v, |x, y| e.velocity(x, y, tv)),
                max_error(&cg, a, |x, y| e.accel(x, y, ta)),
            ])
        }
    };

    let outcome = SolveOutcome {
        problem: cfg.problem,
        level: cfg.level,
        scheme: cfg.scheme,
        dt,
        steps: nsteps,
        t_final,
        errors,
        max_w_initial,
        max_w_final,
        grid_peak,
    };
    if let Some(dir) = cfg.out.as_deref() {
        write_text(&dir.join("errors.csv"), &solve_csv(&outcome, cfg))?;
    }
    Ok(outcome)
}

pub fn solve_csv(o: &SolveOutcome, cfg: &RunConfig) -> String {
    let mut s = String::from(
        "problem,level,scheme,bc,delta,df,csf,dt,steps,t_final,err_w,err_v,err_a,max_w_initial,max_w_final\n",
    );
    let errs = match o.errors {
        Some([w, v, a]) => format!("{:.16e},{:.16e},{:.16e}", w, v, a),
        None => ",,".into(),
    };
    let _ = writeln!(
        s,
        "{},{},{},{},{},{:.16e},{:.16e},{:.16e},{},{:.16e},{},{:.16e},{:.16e}",
        o.problem,
        o.level,
        o.scheme,
        cfg.bc,
        cfg.delta,
        cfg.df,
        cfg.csf_for(o.scheme),
        o.dt,
        o.steps,
        o.t_final,
        errs,
        o.max_w_initial,
        o.max_w_final,
    );
    s
}

/// Per-level entry of a convergence table.
#[derive(Clone, Debug)]
pub struct LevelResult {
    pub level: u32,
    /// Target grid spacing 0.1 / level.
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    /// None when the run aborted (instability).
    pub errors: Option<[f64; 3]>,
}

/// Errors, coarse-to-fine ratios and least-squares rates over a level sweep.
#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub rows: Vec<LevelResult>,
    /// ratios[i][c] = err[i-1][c] / err[i][c]; first entry is None.
    pub ratios: Vec<[Option<f64>; 3]>,
    /// Least-squares slope of log error vs log h per component, over the
    /// levels that completed; None with fewer than two completed levels.
    pub rates: Option<[f64; 3]>,
    /// Levels whose runs aborted with an instability.
    pub diverged: Vec<u32>,
}

pub fn run_convergence(cfg: &RunConfig, levels: &[u32]) -> Result<ConvergenceTable> {
    cfg.validate()?;
    match cfg.problem {
        Problem::Mms1d | Problem::Mms2d | Problem::CircularMode => {}
        other => {
            return Err(Error::Config(format!(
                "'{other}' has no exact solution to measure convergence against"
            )))
        }
    }
    if levels.len() < 3 {
        return Err(Error::Config("a convergence study needs at least 3 levels".into()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("levels must be strictly increasing".into()));
    }
    let mut rows = Vec::new();
    let mut diverged = Vec::new();
    for &level in levels {
        let mut c = cfg.clone();
        c.level = level;
        c.out = None;
        match run_solve(&c) {
            Ok(o) => rows.push(LevelResult {
                level,
                h: 0.1 / level as f64,
                dt: o.dt,
                steps: o.steps,
                errors: o.errors,
            }),
            Err(Error::Instability { step, .. }) => {
                diverged.push(level);
                rows.push(LevelResult {
                    level,
                    h: 0.1 / level as f64,
                    dt: 0.0,
                    steps: step,
                    errors: None,
                });
            }
            Err(e) => return Err(e),
        }
    }

    let mut ratios = vec![[None; 3]; rows.len()];
    for i in 1..rows.len() {
        if let (Some(prev), Some(cur)) = (rows[i - 1].errors, rows[i].errors) {
            for c in 0..3 {
                ratios[i][c] = Some(prev[c] / cur[c]);
            }
        }
    }
    let completed: Vec<&LevelResult> = rows.iter().filter(|r| r.errors.is_some()).collect();
    let rates = if completed.len() >= 2 {
        let mut fitted = [0.0; 3];
        for (c, f) in fitted.iter_mut().enumerate() {
            let pts: Vec<(f64, f64)> = completed
                .iter()
                .map(|r| (r.h.ln(), r.errors.unwrap()[c].max(f64::MIN_POSITIVE).ln()))
                .collect();
            *f = least_squares_slope(&pts);
        }
        Some(fitted)
    } else {
        None
    };
    let table = ConvergenceTable { rows, ratios, rates, diverged };
    if let Some(dir) = cfg.out.as_deref() {
        std::fs::create_dir_all(dir).map_err(Error::Io)?;
        write_text(&dir.join("convergence.csv"), &convergence_csv(&table))?;
    }
    Ok(table)
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

pub fn convergence_csv(t: &ConvergenceTable) -> String {
    let mut s = String::from("level,h,dt,steps,err_w,ratio_w,err_v,ratio_v,err_a,ratio_a\n");
    for (row, ratio) in t.rows.iter().zip(&t.ratios) {
        let _ = write!(s, "{},{:.16e},{:.16e},{}", row.level, row.h, row.dt, row.steps);
        match row.errors {
            Some(errs) => {
                for c in 0..3 {
                    let _ = write!(s, ",{:.16e}", errs[c]);
                    match ratio[c] {
                        Some(r) => {
                            let _ = write!(s, ",{:.16e}", r);
                        }
                        None => s.push(','),
                    }
                }
            }
            None => s.push_str(",diverged,,diverged,,diverged,"),
        }
        s.push('\n');
    }
    if let Some(r) = t.rates {
        let _ = writeln!(
            s,
            "rates,,,,{:.16e},,{:.16e},,{:.16e},",
            r[0], r[1], r[2]
        );
    }
    s
}

/// One spectrum of the 1D beam diagnostic.
pub struct BeamRow {
    /// "composite" (two overlapping grids) or "single".
    pub grid: &'static str,
    pub report: beam1d::SpectrumReport,
    pub df: f64,
}

/// Amplification spectra of all four schemes on the composite and single
/// 1D beam grids, with and without dissipation.
pub fn run_beam_eig(cfg: &RunConfig) -> Result<Vec<BeamRow>> {
    cfg.validate()?;
    let composite = build_overlapping_1d(15, 9, 0.22)?;
    let single = build_single_1d(20);
    let mut dfs = vec![0.0];
    if cfg.df != 0.0 {
        dfs.push(cfg.df);
    }
    let mut rows = Vec::new();
    for (name, grid) in [("composite", &composite), ("single", &single)] {
        for &df in &dfs {
            for scheme in [Scheme::C2, Scheme::Upc2, Scheme::Pc22, Scheme::Nb2] {
                let report =
                    beam1d::beam_spectrum(grid, scheme, df, cfg.csf_for(scheme))?;
                rows.push(BeamRow { grid: name, report, df });
            }
        }
    }
    if let Some(dir) = cfg.out.as_deref() {
        std::fs::create_dir_all(dir).map_err(Error::Io)?;
        write_text(&dir.join("eig1d.csv"), &beam_eig_csv(&rows))?;
        write_text(&dir.join("eig1d_summary.csv"), &beam_summary_csv(&rows))?;
    }
    Ok(rows)
}

/// One line per eigenvalue, sorted by descending modulus within each sweep
/// entry (for unit-circle plots).
pub fn beam_eig_csv(rows: &[BeamRow]) -> String {
    let mut s = String::from("grid,scheme,df,dt,ad,re,im,modulus\n");
    for row in rows {
        let mut eigs = row.report.eigenvalues.clone();
        eigs.sort_by(|a, b| {
            b.norm()
                .total_cmp(&a.norm())
                .then(a.re.total_cmp(&b.re))
                .then(a.im.total_cmp(&b.im))
        });
        for z in eigs {
            let _ = writeln!(
                s,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                row.grid,
                row.report.scheme,
                row.df,
                row.report.dt,
                row.report.ad,
                z.re,
                z.im,
                z.norm()
            );
        }
    }
    s
}

pub fn beam_summary_csv(rows: &[BeamRow]) -> String {
    let mut s = String::from("grid,scheme,df,dt,ad,max_modulus,outside_count\n");
    for row in rows {
        let _ = writeln!(
            s,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            row.grid,
            row.report.scheme,
            row.df,
            row.report.dt,
            row.report.ad,
            row.report.max_modulus,
            row.report.outside_count
        );
    }
    s
}

/// Symbol sweep result: grid extremum, dissipation coefficient, and the
/// symbol on a frequency lattice at the extremal discretization point.
pub struct SymbolSweep {
    pub q_hat: f64,
    pub ad: f64,
    /// (xi1, xi2, q) over a 65x65 lattice of [0, pi]^2.
    pub lattice: Vec<(f64, f64, f64)>,
}

pub fn run_symbol(cfg: &RunConfig) -> Result<SymbolSweep> {
    cfg.validate()?;
    let params = cfg.params()?;
    let cg = build_grid(cfg.problem, cfg.level)?;
    let bcs: Vec<GridBc> = cg.grids.iter().map(|g| GridBc::uniform(cfg.bc, g)).collect();
    let sys = PlateSystem::new(&cg, params, &bcs, cfg.delta, cfg.df)?;

    // locate the discretization point whose symbol attains the extremum
    let pi = std::f64::consts::PI;
    let mut worst: Option<(usize, usize, f64)> = None;
    for (gi, g) in cg.grids.iter().enumerate() {
        for (j, c) in sys.ops[gi].coeffs.iter().enumerate() {
            let v = symbol(c, g.h, params.k_spring, [pi, pi]);
            if worst.is_none_or(|(_, _, cur)| v < cur) {
                worst = Some((gi, j, v));
            }
        }
    }
    let (gi, j, _) = worst
        .ok_or_else(|| Error::GridConstruction("no discretization points for the symbol".into()))?;
    let (c, h) = (&sys.ops[gi].coeffs[j], cg.grids[gi].h);

    let n = 64;
    let mut lattice = Vec::with_capacity((n + 1) * (n + 1));
    for i in 0..=n {
        for k in 0..=n {
            let xi = [pi * i as f64 / n as f64, pi * k as f64 / n as f64];
            lattice.push((xi[0], xi[1], symbol(c, h, params.k_spring, xi)));
        }
    }
    let sweep = SymbolSweep { q_hat: sys.q_hat, ad: sys.ad, lattice };
    if let Some(dir) = cfg.out.as_deref() {
        std::fs::create_dir_all(dir).map_err(Error::Io)?;
        write_text(&dir.join("symbol.csv"), &symbol_csv(&sweep))?;
    }
    Ok(sweep)
}

pub fn symbol_csv(s: &SymbolSweep) -> String {
    let mut out = String::from("xi1,xi2,q\n");
    for (x1, x2, q) in &s.lattice {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", x1, x2, q);
    }
    out
}

/// Amplification-root locus: max root modulus of the configured scheme at
/// its formula time step, as the test-problem coefficient sweeps the symbol
/// range [Q_M / (rho H), 0].
pub struct RootsSweep {
    pub scheme: Scheme,
    pub dt: f64,
    pub mu: f64,
    /// (q, max |root|) samples.
    pub locus: Vec<(f64, f64)>,
}

pub fn run_roots(cfg: &RunConfig) -> Result<RootsSweep> {
    cfg.validate()?;
    let params = cfg.params()?;
    let cg = build_grid(cfg.problem, cfg.level)?;
    let bcs: Vec<GridBc> = cg.grids.iter().map(|g| GridBc::uniform(cfg.bc, g)).collect();
    let sys = PlateSystem::new(&cg, params, &bcs, cfg.delta, cfg.df)?;
    let mu = 32.0 * sys.ad;
    let dt = time_step(cfg.scheme, sys.q_hat, mu, cfg.csf_for(cfg.scheme), params.mass());
    let q_min = sys.q_hat / params.mass();
    let samples = 200;
    let mut locus = Vec::with_capacity(samples + 1);
    for i in 0..=samples {
        let q = q_min * (1.0 - i as f64 / samples as f64);
        locus.push((q, check_roots(cfg.scheme, q, 0.0, mu, dt)));
    }
    let sweep = RootsSweep { scheme: cfg.scheme, dt, mu, locus };
    if let Some(dir) = cfg.out.as_deref() {
        std::fs::create_dir_all(dir).map_err(Error::Io)?;
        write_text(&dir.join("roots.csv"), &roots_csv(&sweep))?;
    }
    Ok(sweep)
}

pub fn roots_csv(s: &RootsSweep) -> String {
    let mut out = String::from("scheme,q,mu,dt,max_modulus\n");
    for (q, m) in &s.locus {
        let _ = writeln!(out, "{},{:.16e},{:.16e},{:.16e},{:.16e}", s.scheme, q, s.mu, s.dt, m);
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(Error::Io)
}

/// Writes numbered field snapshots (x, y, w, v, a per solution point) into
/// the output directory; inert when no directory is configured.
struct SnapshotWriter {
    dir: Option<PathBuf>,
    count: usize,
}

impl SnapshotWriter {
    fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).map_err(Error::Io)?;
        }
        Ok(SnapshotWriter { dir: dir.map(Path::to_path_buf), count: 0 })
    }

    fn write(&mut self, cg: &CompositeGrid, st: &Stepper) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let (tv, v) = st.velocity();
        let (ta, a) = st.acceleration();
        let mut s = String::new();
        let _ = writeln!(s, "# t={:.16e} t_velocity={:.16e} t_acceleration={:.16e}", st.time(), tv, ta);
        let _ = writeln!(s, "# grid x y w v a");
        for (gi, g) in cg.grids.iter().enumerate() {
            for p in g.points() {
                if !is_solution_point(g.class_at(p)) {
                    continue;
                }
                let [x, y] = g.phys_coords(p);
                let k = g.index(p);
                let _ = writeln!(
                    s,
                    "{} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
                    gi,
                    x,
                    y,
                    st.w()[gi][k],
                    v[gi][k],
                    a[gi][k]
                );
            }
        }
        let path = dir.join(format!("snap_{:05}.txt", self.count));
        self.count += 1;
        write_text(&path, &s)
    }
}
