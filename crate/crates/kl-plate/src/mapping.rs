//! Smooth maps from the unit square (r,s) onto physical component-grid
//! regions, together with the derivatives of the *inverse* map (r and s as
//! functions of x,y) through fourth order. Those derivatives are what the
//! chain rule needs to transform the plate operator onto the reference
//! square.
//!
//! Two families cover every grid in scope: axis-aligned rectangles and
//! origin-centered annuli (radial x angular). Both have closed-form
//! inverses, so donor points in overlap regions are located exactly.

/// Partial derivatives of one scalar field q(x,y):
/// `d[a][b]` = d^(a+b) q / dx^a dy^b for a+b <= 4 (`d[0][0]` is q itself).
#[derive(Clone, Copy, Debug, Default)]
pub struct Deriv4 {
    pub d: [[f64; 5]; 5],
}

/// Inverse-map derivatives at one point: r(x,y) and s(x,y).
#[derive(Clone, Copy, Debug)]
pub struct Metrics {
    pub r: Deriv4,
    pub s: Deriv4,
}

impl Metrics {
    pub fn grad_r(&self) -> [f64; 2] {
        [self.r.d[1][0], self.r.d[0][1]]
    }
    pub fn grad_s(&self) -> [f64; 2] {
        [self.s.d[1][0], self.s.d[0][1]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mapping {
    /// x = x0 + r (x1-x0), y = y0 + s (y1-y0)
    Rectangle { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// x = rho cos(theta), y = rho sin(theta) with
    /// rho = r0 + r (r1-r0), theta = theta0 + s (theta1-theta0),
    /// centered at the origin. A full ring has theta1-theta0 = 2 pi.
    Annulus { r0: f64, r1: f64, theta0: f64, theta1: f64 },
}

impl Mapping {
    pub fn eval(&self, r: f64, s: f64) -> [f64; 2] {
        match *self {
            Mapping::Rectangle { x0, y0, x1, y1 } => [x0 + r * (x1 - x0), y0 + s * (y1 - y0)],
            Mapping::Annulus { r0, r1, theta0, theta1 } => {
                let rho = r0 + r * (r1 - r0);
                let th = theta0 + s * (theta1 - theta0);
                [rho * th.cos(), rho * th.sin()]
            }
        }
    }

    /// Closed-form inverse. The angular coordinate is unwrapped into
    /// [theta0, theta0 + 2 pi), so for a full ring s lands in [0,1).
    pub fn inverse(&self, x: f64, y: f64) -> [f64; 2] {
        match *self {
            Mapping::Rectangle { x0, y0, x1, y1 } => [(x - x0) / (x1 - x0), (y - y0) / (y1 - y0)],
            Mapping::Annulus { r0, r1, theta0, theta1 } => {
                let rho = x.hypot(y);
                let tau = std::f64::consts::TAU;
                let th = theta0 + (y.atan2(x) - theta0).rem_euclid(tau);
                [(rho - r0) / (r1 - r0), (th - theta0) / (theta1 - theta0)]
            }
        }
    }

    /// True when the s direction closes on itself (full ring).
    pub fn periodic_s(&self) -> bool {
        match *self {
            Mapping::Rectangle { .. } => false,
            Mapping::Annulus { theta0, theta1, .. } => {
                (theta1 - theta0 - std::f64::consts::TAU).abs() < 1e-12
            }
        }
    }

    /// Derivatives of the inverse map at reference point (r,s).
    pub fn metrics(&self, r: f64, s: f64) -> Metrics {
        match *self {
            Mapping::Rectangle { x0, y0, x1, y1 } => {
                let _ = (x0, y0);
                let mut mr = Deriv4::default();
                let mut ms = Deriv4::default();
                mr.d[0][0] = r;
                ms.d[0][0] = s;
                mr.d[1][0] = 1.0 / (x1 - x0);
                ms.d[0][1] = 1.0 / (y1 - y0);
                Metrics { r: mr, s: ms }
            }
            Mapping::Annulus { r0, r1, theta0, theta1 } => {
                let lr = r1 - r0;
                let lt = theta1 - theta0;
                let rho = r0 + r * lr;
                let th = theta0 + s * lt;
                let (sn, cs) = th.sin_cos();

                // rho(x,y) = sqrt(x^2+y^2): derivatives in terms of
                // c = cos(theta), s = sin(theta) and powers of 1/rho.
                let mut drho = Deriv4::default();
                drho.d[0][0] = rho;
                drho.d[1][0] = cs;
                drho.d[0][1] = sn;
                drho.d[2][0] = sn * sn / rho;
                drho.d[1][1] = -cs * sn / rho;
                drho.d[0][2] = cs * cs / rho;
                let r2 = rho * rho;
                drho.d[3][0] = -3.0 * cs * sn * sn / r2;
                drho.d[2][1] = sn * (2.0 * cs * cs - sn * sn) / r2;
                drho.d[1][2] = cs * (2.0 * sn * sn - cs * cs) / r2;
                drho.d[0][3] = -3.0 * cs * cs * sn / r2;
                let r3 = r2 * rho;
                drho.d[4][0] = 3.0 * sn * sn * (4.0 * cs * cs - sn * sn) / r3;
                drho.d[3][1] = 3.0 * cs * sn * (3.0 * sn * sn - 2.0 * cs * cs) / r3;
                drho.d[2][2] = (2.0 * cs.powi(4) - 11.0 * cs * cs * sn * sn + 2.0 * sn.powi(4)) / r3;
                drho.d[1][3] = 3.0 * cs * sn * (3.0 * cs * cs - 2.0 * sn * sn) / r3;
                drho.d[0][4] = 3.0 * cs * cs * (4.0 * sn * sn - cs * cs) / r3;

                // theta(x,y) is the imaginary part of log(x+iy):
                // d^a_x d^b_y theta = Im[i^b (-1)^(n-1) (n-1)! z^(-n)], n=a+b,
                // and z^(-n) = (cos n*theta - i sin n*theta)/rho^n.
                let mut dth = Deriv4::default();
                dth.d[0][0] = th;
                for a in 0..=4usize {
                    for b in 0..=(4 - a) {
                        let n = a + b;
                        if n == 0 {
                            continue;
                        }
                        let fact: f64 = (1..n).product::<usize>() as f64;
                        let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
                        let (cn, snn) = ((n as f64) * th).sin_cos();
                        let (cosn, sinn) = (snn, cn); // sin_cos returns (sin, cos)
                        // Im[i^b (cos - i sin)] cycles with b mod 4.
                        let im = match b % 4 {
                            0 => -sinn,
                            1 => cosn,
                            2 => sinn,
                            _ => -cosn,
                        };
                        dth.d[a][b] = sign * fact * im / rho.powi(n as i32);
                    }
                }

                // r = (rho-r0)/lr and s = (theta-theta0)/lt are affine in
                // rho/theta, so every derivative just rescales.
                let mut mr = Deriv4::default();
                let mut ms = Deriv4::default();
                for a in 0..=4usize {
                    for b in 0..=(4 - a) {
                        if a + b == 0 {
                            continue;
                        }
                        mr.d[a][b] = drho.d[a][b] / lr;
                        ms.d[a][b] = dth.d[a][b] / lt;
                    }
                }
                mr.d[0][0] = r;
                ms.d[0][0] = s;
                Metrics { r: mr, s: ms }
            }
        }
    }
}
