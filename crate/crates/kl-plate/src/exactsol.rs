//! Closed-form reference solutions: manufactured cosine solutions with their
//! forcing terms, and free-vibration modes of the clamped/simply-supported
//! circular plate built from Bessel functions.

use crate::boundary::{BcData, BoundaryOp, OpKind, SideGeom};
use crate::PlateParams;

const PI: f64 = std::f64::consts::PI;

/// Bessel function of the first kind J_n(x) for x >= 0.
///
/// Ascending series below x = 12; Miller's downward recurrence with the
/// J_0 + 2*sum J_2k = 1 normalization above, where the series starts to lose
/// digits to cancellation.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 12.0 {
        let half = 0.5 * x;
        let mut term = 1.0;
        for k in 1..=n as u64 {
            term *= half / k as f64;
        }
        let mut sum = term;
        let mut k = 1.0f64;
        while term.abs() > 1e-18 * (1.0 + sum.abs()) {
            term *= -(half * half) / (k * (n as f64 + k));
            sum += term;
            k += 1.0;
            if k > 200.0 {
                break;
            }
        }
        sum
    } else {
        let m = {
            let guess = x + 12.0 * x.cbrt() + 20.0;
            let mut m = guess as usize;
            m += m % 2;
            m
        };
        let mut jp = 0.0f64; // J~_{k+1}
        let mut jc = 1e-30f64; // J~_k
        let mut norm = 0.0f64;
        let mut jn = 0.0f64;
        for k in (0..m).rev() {
            let jm = (2.0 * (k + 1) as f64 / x) * jc - jp;
            jp = jc;
            jc = jm;
            if k % 2 == 0 {
                norm += if k == 0 { jc } else { 2.0 * jc };
            }
            if k == n as usize {
                jn = jc;
            }
            if jc.abs() > 1e250 {
                jp *= 1e-250;
                jc *= 1e-250;
                norm *= 1e-250;
                jn *= 1e-250;
            }
        }
        jn / norm
    }
}

/// Modified Bessel function of the first kind I_n(x), ascending series
/// (all terms positive, no cancellation).
pub fn bessel_i(n: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n as u64 {
        term *= half / k as f64;
    }
    let mut sum = term;
    let mut k = 1.0f64;
    while term > 1e-18 * sum {
        term *= (half * half) / (k * (n as f64 + k));
        sum += term;
        k += 1.0;
        if k > 500.0 {
            break;
        }
    }
    sum
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CircularBc {
    Clamped,
    Supported,
}

/// Frequency equation whose positive zeros are the radial wavenumbers of the
/// circular-plate modes: clamped plates need w = dw/dr = 0 at the rim,
/// simply supported plates w = 0 and zero radial bending moment (which is
/// where Poisson's ratio enters).
pub fn mode_equation(bc: CircularBc, n: u32, nu: f64, lam: f64) -> f64 {
    let base = bessel_j(n, lam) * bessel_i(n + 1, lam) + bessel_i(n, lam) * bessel_j(n + 1, lam);
    match bc {
        CircularBc::Clamped => base,
        CircularBc::Supported => {
            base - 2.0 * lam / (1.0 - nu) * bessel_j(n, lam) * bessel_i(n, lam)
        }
    }
}

/// k-th positive root (k >= 1) of the frequency equation: scan upward from
/// 0.5 in steps of 0.1, bisect each bracketed sign change to ~1e-13.
pub fn circular_lambda(bc: CircularBc, n: u32, nu: f64, k: usize) -> f64 {
    assert!(k >= 1);
    let f = |lam: f64| mode_equation(bc, n, nu, lam);
    let mut found = 0;
    let mut a = 0.5;
    let mut fa = f(a);
    loop {
        let b = a + 0.1;
        let fb = f(b);
        if fa == 0.0 {
            found += 1;
            if found == k {
                return a;
            }
        } else if fa * fb < 0.0 {
            found += 1;
            if found == k {
                let (mut lo, mut hi) = (a, b);
                let mut flo = fa;
                while hi - lo > 1e-13 {
                    let mid = 0.5 * (lo + hi);
                    let fm = f(mid);
                    if flo * fm <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                return 0.5 * (lo + hi);
            }
        }
        a = b;
        fa = fb;
        assert!(a < 60.0, "root {k} of mode equation not found below 60");
    }
}

/// One free-vibration mode of the unit-radius circular plate:
/// w = [J_n(lam*rho) - (J_n(lam)/I_n(lam)) I_n(lam*rho)] cos(n theta) cos(omega t)
/// with omega = lam^2 sqrt(D/(rho H)).
#[derive(Clone, Copy, Debug)]
pub struct CircularMode {
    pub bc: CircularBc,
    pub n: u32,
    pub lam: f64,
    pub coef: f64,
    pub omega: f64,
}

impl CircularMode {
    pub fn new(bc: CircularBc, n: u32, nu: f64, p: &PlateParams) -> Self {
        let lam = circular_lambda(bc, n, nu, 1);
        let coef = bessel_j(n, lam) / bessel_i(n, lam);
        let omega = lam * lam * (p.d_flex / p.mass()).sqrt();
        CircularMode { bc, n, lam, coef, omega }
    }

    /// Spatial mode shape at polar (rho, theta).
    pub fn shape(&self, rho: f64, theta: f64) -> f64 {
        let radial = bessel_j(self.n, self.lam * rho) - self.coef * bessel_i(self.n, self.lam * rho);
        radial * (self.n as f64 * theta).cos()
    }
}

/// The separable manufactured solutions w = S(x,y) cos(pi t).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MmsFamily {
    /// S = cos(pi x): constant across y, so boundary data in y is trivial.
    Cos1d,
    /// S = cos(pi x) cos(pi y).
    Cos2d,
}

/// d^a/dx^a cos(pi x) = pi^a cos(pi x + a pi/2)
fn dcos(a: usize, x: f64) -> f64 {
    PI.powi(a as i32) * (PI * x + a as f64 * PI / 2.0).cos()
}

impl MmsFamily {
    /// Spatial factor derivative d^a_x d^b_y S.
    pub fn space_deriv(self, a: usize, b: usize, x: f64, y: f64) -> f64 {
        match self {
            MmsFamily::Cos1d => {
                if b > 0 {
                    0.0
                } else {
                    dcos(a, x)
                }
            }
            MmsFamily::Cos2d => dcos(a, x) * dcos(b, y),
        }
    }

    pub fn space(self, x: f64, y: f64) -> f64 {
        self.space_deriv(0, 0, x, y)
    }

    /// Source term making w = S cos(pi t) solve
    /// rho H w_tt = -K w + T lap w - D lap^2 w + f.
    pub fn forcing(self, p: &PlateParams, x: f64, y: f64, t: f64) -> f64 {
        let s = self.space(x, y);
        let lap = self.space_deriv(2, 0, x, y) + self.space_deriv(0, 2, x, y);
        let bilap = self.space_deriv(4, 0, x, y)
            + 2.0 * self.space_deriv(2, 2, x, y)
            + self.space_deriv(0, 4, x, y);
        let tt = (PI * t).cos();
        (-p.mass() * PI * PI * s + p.k_spring * s - p.tension * lap + p.d_flex * bilap) * tt
    }
}

/// A reference solution the driver can measure errors against and use as
/// twilight data for boundary conditions.
#[derive(Clone, Copy, Debug)]
pub enum Exact {
    Mms(MmsFamily),
    Circular(CircularMode),
}

impl Exact {
    pub fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Exact::Mms(f) => f.space(x, y) * (PI * t).cos(),
            Exact::Circular(m) => m.shape(x.hypot(y), y.atan2(x)) * (m.omega * t).cos(),
        }
    }

    pub fn velocity(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Exact::Mms(f) => -PI * f.space(x, y) * (PI * t).sin(),
            Exact::Circular(m) => {
                -m.omega * m.shape(x.hypot(y), y.atan2(x)) * (m.omega * t).sin()
            }
        }
    }

    pub fn accel(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Exact::Mms(f) => -PI * PI * f.space(x, y) * (PI * t).cos(),
            Exact::Circular(m) => {
                -m.omega * m.omega * m.shape(x.hypot(y), y.atan2(x)) * (m.omega * t).cos()
            }
        }
    }

    /// Cartesian space derivative d^a_x d^b_y w at time t. Only the
    /// manufactured families provide these; the circular modes satisfy their
    /// boundary conditions homogeneously and never need them.
    pub fn cart_deriv(&self, a: usize, b: usize, x: f64, y: f64, t: f64) -> Option<f64> {
        match self {
            Exact::Mms(f) => Some(f.space_deriv(a, b, x, y) * (PI * t).cos()),
            Exact::Circular(_) => None,
        }
    }

    /// Whether the physical boundary rows (slope/moment/shear/corner) of the
    /// associated problem are homogeneous for this solution.
    pub fn physical_rows_homogeneous(&self) -> bool {
        matches!(self, Exact::Circular(_))
    }

    pub fn forcing(&self, p: &PlateParams, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Exact::Mms(f) => f.forcing(p, x, y, t),
            Exact::Circular(_) => 0.0,
        }
    }

    /// Separable time factor and its first two derivatives at `t`
    /// (w = S(x,y) T(t) with T = cos(omega t)).
    pub fn time_factors(&self, t: f64) -> [f64; 3] {
        let om = match self {
            Exact::Mms(_) => PI,
            Exact::Circular(m) => m.omega,
        };
        [(om * t).cos(), -om * (om * t).sin(), -om * om * (om * t).cos()]
    }
}

/// The spatial factor S of a separable reference solution as boundary data.
/// Combined with a time-factor scaling this provides twilight data: Dirichlet
/// values and physical conditions are the continuous operators on S, while
/// extrapolation rows consume S point values directly. The circular modes
/// satisfy their physical conditions exactly, so those evaluate to zero.
pub struct SpatialBc(pub Exact);

impl BcData for SpatialBc {
    fn point(&self, x: [f64; 2]) -> f64 {
        self.0.value(x[0], x[1], 0.0)
    }

    fn condition(&self, op: &BoundaryOp) -> f64 {
        if self.0.physical_rows_homogeneous() {
            return 0.0;
        }
        let Exact::Mms(f) = self.0 else { unreachable!() };
        let d = |a, b| f.space_deriv(a, b, op.x[0], op.x[1]);
        match op.geom {
            SideGeom::Cartesian { axis, sigma } => {
                // derivative orders along (normal, tangential)
                let dd = |n: usize, t: usize| if axis == 0 { d(n, t) } else { d(t, n) };
                match op.kind {
                    OpKind::Slope => sigma * dd(1, 0),
                    OpKind::Moment => dd(2, 0) + op.nu * dd(0, 2),
                    OpKind::Shear => sigma * (dd(3, 0) + (2.0 - op.nu) * dd(1, 2)),
                    OpKind::CrossDeriv => d(1, 1),
                }
            }
            SideGeom::Circular { .. } => {
                unreachable!("manufactured runs are confined to rectangular patches")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed independently with 40-digit arithmetic.
    const J_REF: &[(u32, f64, f64)] = &[
        (0, 1.0, 0.76519768655796655145),
        (1, 1.0, 0.44005058574493351596),
        (2, 1.0, 0.11490348493190048047),
        (0, 5.0, -0.17759677131433830435),
        (1, 5.0, -0.32757913759146522204),
        (2, 5.0, 0.046565116277752215532),
        (3, 5.0, 0.36483123061366699446),
        (0, 15.0, -0.014224472826780773234),
        (2, 15.0, 0.04157167797525047472),
        (1, 0.5, 0.24226845767487388638),
    ];

    const I_REF: &[(u32, f64, f64)] = &[
        (0, 1.0, 1.2660658777520083356),
        (1, 1.0, 0.56515910399248502721),
        (2, 1.0, 0.13574766976703828118),
        (0, 5.0, 27.239871823604446895),
        (1, 5.0, 24.335642142450527199),
        (3, 5.0, 10.331150169151138387),
        (0, 12.0, 18948.925349296308861),
    ];

    #[test]
    fn bessel_j_matches_reference() {
        for &(n, x, want) in J_REF {
            let got = bessel_j(n, x);
            assert!(
                (got - want).abs() < 1e-13 * (1.0 + want.abs()),
                "J_{n}({x}): got {got}, want {want}"
            );
        }
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(1, 0.0), 0.0);
    }

    #[test]
    fn bessel_i_matches_reference() {
        for &(n, x, want) in I_REF {
            let got = bessel_i(n, x);
            assert!(
                (got - want).abs() < 1e-13 * (1.0 + want.abs()),
                "I_{n}({x}): got {got}, want {want}"
            );
        }
    }

    #[test]
    fn mode_equation_matches_reference() {
        assert!((mode_equation(CircularBc::Clamped, 0, 0.3, 3.0) - 0.62679479745787719584).abs() < 1e-13);
        assert!((mode_equation(CircularBc::Clamped, 1, 0.3, 4.0) - 3.1295531913850757775).abs() < 1e-12);
        assert!((mode_equation(CircularBc::Supported, 1, 0.3, 4.0) - 10.495811002590794338).abs() < 1e-12);
    }

    #[test]
    fn first_mode_wavenumbers_match_reference() {
        let cases = [
            (CircularBc::Clamped, 0, 3.196220616582541094),
            (CircularBc::Clamped, 1, 4.6108998790490558272),
            (CircularBc::Clamped, 2, 5.9056782354205228797),
            (CircularBc::Supported, 0, 2.2215195345922361967),
            (CircularBc::Supported, 1, 3.7280242854692805787),
            (CircularBc::Supported, 2, 5.0609580832881870271),
        ];
        for (bc, n, want) in cases {
            let got = circular_lambda(bc, n, 0.3, 1);
            assert!((got - want).abs() < 1e-11, "{bc:?} n={n}: got {got}, want {want}");
        }
    }

    #[test]
    fn mode_shape_matches_reference_and_rim_conditions() {
        let p = PlateParams { rho: 1.0, thickness: 1.0, k_spring: 0.0, tension: 0.0, d_flex: 1.0, nu: 0.3 };
        let mc = CircularMode::new(CircularBc::Clamped, 0, 0.3, &p);
        assert!((mc.shape(0.6, 0.0) - 0.39150245793219706383).abs() < 1e-12);
        assert!((mc.omega - mc.lam * mc.lam).abs() < 1e-12);
        let ms = CircularMode::new(CircularBc::Supported, 1, 0.3, &p);
        assert!((ms.shape(0.6, 0.0) - 0.53949721866052017604).abs() < 1e-12);
        // rim: both vanish; clamped also has zero radial slope
        for m in [&mc, &ms] {
            assert!(m.shape(1.0, 0.3).abs() < 1e-12, "w(rim) = 0");
        }
        let eps = 1e-5;
        let slope = (mc.shape(1.0 + eps, 0.0) - mc.shape(1.0 - eps, 0.0)) / (2.0 * eps);
        assert!(slope.abs() < 1e-6, "clamped rim slope {slope}");
        // supported rim: radial moment w_rr + nu*(w_r/r + w_tt/r^2) = 0
        let wrr = (ms.shape(1.0 + eps, 0.0) - 2.0 * ms.shape(1.0, 0.0) + ms.shape(1.0 - eps, 0.0))
            / (eps * eps);
        let wr = (ms.shape(1.0 + eps, 0.0) - ms.shape(1.0 - eps, 0.0)) / (2.0 * eps);
        let wtt = (ms.shape(1.0, eps) - 2.0 * ms.shape(1.0, 0.0) + ms.shape(1.0, -eps)) / (eps * eps);
        let moment = wrr + 0.3 * (wr + wtt);
        assert!(moment.abs() < 1e-4, "supported rim moment {moment}");
    }

    #[test]
    fn mms_forcing_reduces_to_known_multiples() {
        // pure plate: f = (pi^4 - pi^2) w
        let p = PlateParams { rho: 1.0, thickness: 1.0, k_spring: 0.0, tension: 0.0, d_flex: 1.0, nu: 0.3 };
        let e = Exact::Mms(MmsFamily::Cos1d);
        for &(x, y, t) in &[(0.3, 0.7, 0.0), (0.12, 0.5, 0.41)] {
            let f = e.forcing(&p, x, y, t);
            let w = e.value(x, y, t);
            let want = (PI.powi(4) - PI * PI) * w;
            assert!((f - want).abs() < 1e-10 * (1.0 + want.abs()), "{f} vs {want}");
        }
        // all parameters 1: f = (-pi^2 + 1 + 2 pi^2 + 4 pi^4) w
        let p1 = PlateParams { rho: 1.0, thickness: 1.0, k_spring: 1.0, tension: 1.0, d_flex: 1.0, nu: 0.3 };
        let e2 = Exact::Mms(MmsFamily::Cos2d);
        for &(x, y, t) in &[(0.3, 0.7, 0.2), (0.9, 0.05, 0.77)] {
            let f = e2.forcing(&p1, x, y, t);
            let w = e2.value(x, y, t);
            let want = (-PI * PI + 1.0 + 2.0 * PI * PI + 4.0 * PI.powi(4)) * w;
            assert!((f - want).abs() < 1e-10 * (1.0 + want.abs()), "{f} vs {want}");
        }
    }

    #[test]
    fn mms_derivatives_consistent_with_finite_differences() {
        let e = Exact::Mms(MmsFamily::Cos2d);
        let (x, y, t) = (0.37, 0.81, 0.13);
        let h = 1e-3;
        let fd_x = (e.value(x + h, y, t) - e.value(x - h, y, t)) / (2.0 * h);
        assert!((fd_x - e.cart_deriv(1, 0, x, y, t).unwrap()).abs() < 1e-5);
        let fd_xyy = (e.cart_deriv(0, 2, x + h, y, t).unwrap()
            - e.cart_deriv(0, 2, x - h, y, t).unwrap())
            / (2.0 * h);
        assert!((fd_xyy - e.cart_deriv(1, 2, x, y, t).unwrap()).abs() < 1e-3);
        let fd_t = (e.value(x, y, t + h) - e.value(x, y, t - h)) / (2.0 * h);
        assert!((fd_t - e.velocity(x, y, t)).abs() < 1e-5);
        let fd_tt = (e.velocity(x, y, t + h) - e.velocity(x, y, t - h)) / (2.0 * h);
        assert!((fd_tt - e.accel(x, y, t)).abs() < 1e-5);
    }
}
