//! Frozen-coefficient stability machinery: the Fourier symbol of the
//! discrete plate operator, its grid extremum, the dissipation coefficient,
//! per-scheme time-step formulas, and a characteristic-root checker for the
//! scalar test problem  w_tt = Q w - mu w_t  with Q possibly perturbed off
//! the real axis by interpolation coupling.

use crate::compgrid::CompositeGrid;
use crate::discretization::{GridOperator, OperatorCoeffs};
use crate::error::{Error, Result};
use crate::Scheme;
use nalgebra::Complex;

/// Symbol of L_h at one point. Only the even-parity terms (b and d families)
/// appear; the printed formula this implements drops the odd-derivative
/// a- and c-terms (they contribute an imaginary part) without comment, and we
/// follow it as written.
pub fn symbol(c: &OperatorCoeffs, h: [f64; 2], k_spring: f64, xi: [f64; 2]) -> f64 {
    let (hr, hs) = (h[0], h[1]);
    let (sr, ss) = ((xi[0] / 2.0).sin(), (xi[1] / 2.0).sin());
    let (sr2, ss2) = (sr * sr, ss * ss);
    let (snr, sns) = (xi[0].sin(), xi[1].sin());
    -k_spring
        - c.b11 * 4.0 * sr2 / (hr * hr)
        - c.b12 * snr * sns / (hr * hs)
        - c.b22 * 4.0 * ss2 / (hs * hs)
        + c.d1111 * 16.0 * sr2 * sr2 / (hr * hr * hr * hr)
        + c.d1112 * 4.0 * sr2 * snr * sns / (hr * hr * hr * hs)
        + c.d1122 * 16.0 * sr2 * ss2 / (hr * hr * hs * hs)
        + c.d1222 * 4.0 * snr * ss2 * sns / (hr * hs * hs * hs)
        + c.d2222 * 16.0 * ss2 * ss2 / (hs * hs * hs * hs)
}

/// Grid extremum Q_M: the symbol at the plus-minus mode xi = (pi, pi),
/// minimized (most negative, i.e. largest magnitude) over all PDE points of
/// all components.
pub fn q_hat_max(cg: &CompositeGrid, ops: &[GridOperator], k_spring: f64) -> Result<f64> {
    let mut q: Option<f64> = None;
    let pi = std::f64::consts::PI;
    for (g, op) in cg.grids.iter().zip(ops) {
        for c in &op.coeffs {
            let v = symbol(c, g.h, k_spring, [pi, pi]);
            q = Some(match q {
                None => v,
                Some(cur) => cur.min(v),
            });
        }
    }
    q.ok_or_else(|| Error::GridConstruction("no discretization points for the symbol".into()))
}

/// ad = df sqrt(-Q_M) / 16.
pub fn dissipation_coefficient(q_hat_m: f64, df: f64) -> f64 {
    df * (-q_hat_m).sqrt() / 16.0
}

/// Sufficient dissipation bound for a perturbed test problem Q = m + i n,
/// evaluated at mu = 0: with r = sqrt((mu^2+4m)^2 + 16 n^2) and
/// theta = atan2(4n, mu^2+4m), the bound is sqrt(r) |cos(theta/2)|.
pub fn mu_lower_bound(m: f64, n: f64) -> f64 {
    let re = 4.0 * m;
    let im = 4.0 * n;
    let r = re.hypot(im);
    let theta = im.atan2(re);
    r.sqrt() * (theta / 2.0).cos().abs()
}

/// Stable time step for a scheme, from the frozen-coefficient analysis.
/// The test-problem coefficient is Q = Q_M / (rho H); mu = 32 ad is used
/// undivided. csf multiplies the estimate (explicit schemes want
/// csf in (0,1]; NB2 is implicit and takes csf in [1,50]).
pub fn time_step(scheme: Scheme, q_hat_m: f64, mu: f64, csf: f64, rho_h: f64) -> f64 {
    assert!(q_hat_m < 0.0 && mu >= 0.0 && csf > 0.0 && rho_h > 0.0);
    let q = q_hat_m / rho_h;
    match scheme {
        Scheme::C2 => {
            if mu == 0.0 {
                csf * 2.0 / (-q).sqrt()
            } else {
                let sq2 = std::f64::consts::SQRT_2;
                let a = 4.0 * sq2 / (mu + (mu * mu - 8.0 * sq2 * q).sqrt());
                csf * a.min(2.0 / mu)
            }
        }
        Scheme::Upc2 => {
            let a = 2.0 / (-q).sqrt();
            csf * if mu > 0.0 { a.min(2.0 / mu) } else { a }
        }
        Scheme::Pc22 | Scheme::Nb2 => {
            let (ra, rb) = (1.75, 1.2);
            let im = (-mu * mu - 4.0 * q).sqrt();
            csf * ((mu / (2.0 * ra)).abs().powf(1.5) + (im / (2.0 * rb)).abs().powf(1.5))
                .powf(-2.0 / 3.0)
        }
    }
}

/// Largest root modulus of the quadratic z^2 + b z + c with complex
/// coefficients. Nearly-degenerate discriminants collapse to the double
/// root: at a marginally stable time step the naive formula would otherwise
/// split |z|=1 into 1 +- O(sqrt(eps)).
fn quad_max_modulus(b: Complex<f64>, c: Complex<f64>) -> f64 {
    let disc = b * b - 4.0 * c;
    let scale = b.norm_sqr() + 4.0 * c.norm();
    if disc.norm() <= 1e-12 * scale {
        return (b / 2.0).norm();
    }
    let sq = disc.sqrt();
    // avoid cancellation: pick the sign that grows |b + sign*sq|
    let q = if (b + sq).norm() >= (b - sq).norm() { -(b + sq) / 2.0 } else { -(b - sq) / 2.0 };
    let z1 = q;
    let z2 = c / q;
    z1.norm().max(z2.norm())
}

/// Largest amplification-factor modulus of a scheme applied to the test
/// problem w_tt = Q w - mu w_t with Q = m + i n, at time step dt.
pub fn check_roots(scheme: Scheme, m: f64, n: f64, mu: f64, dt: f64) -> f64 {
    let q = Complex::new(m, n);
    match scheme {
        Scheme::C2 => {
            // zeta^2 - (2 + dt^2 Q - mu dt) zeta + (1 - mu dt) = 0
            let b = -(Complex::new(2.0 - mu * dt, 0.0) + dt * dt * q);
            let c = Complex::new(1.0 - mu * dt, 0.0);
            quad_max_modulus(b, c)
        }
        Scheme::Upc2 => {
            // zeta^2 - (1 - mu dt/2)(2 + dt^2 Q) zeta + (1 - mu dt) = 0
            let b = -((2.0 + dt * dt * q) * (1.0 - mu * dt / 2.0));
            let c = Complex::new(1.0 - mu * dt, 0.0);
            quad_max_modulus(b, c)
        }
        Scheme::Pc22 => {
            // per eigenvalue lambda of [[0,1],[Q,-mu]]:
            // zeta^2 - (1 + z + 3z^2/4) zeta + z^2/4 = 0 with z = dt lambda
            let disc = (Complex::new(mu * mu, 0.0) + 4.0 * q).sqrt();
            let mut worst: f64 = 0.0;
            for lam in [(-mu + disc) / 2.0, (-mu - disc) / 2.0] {
                let z = dt * lam;
                let b = -(1.0 + z + 0.75 * z * z);
                let c = z * z / 4.0;
                worst = worst.max(quad_max_modulus(b, c));
            }
            worst
        }
        Scheme::Nb2 => {
            // eigenvalues of A^{-1} B for beta=1/4, gamma=1/2
            let (beta, gamma) = (0.25, 0.5);
            let dt2 = dt * dt;
            let a00 = 1.0 - q * beta * dt2;
            let a01 = Complex::new(beta * dt2 * mu, 0.0);
            let a10 = -q * dt * gamma;
            let a11 = Complex::new(dt * gamma * mu + 1.0, 0.0);
            let b00 = 1.0 - q * dt2 * (2.0 * beta - 1.0) / 2.0;
            let b01 = Complex::new(mu * (2.0 * beta - 1.0) * dt2 / 2.0 + dt, 0.0);
            let b10 = -q * dt * (gamma - 1.0);
            let b11 = Complex::new(dt * mu * (gamma - 1.0) + 1.0, 0.0);
            let det_a = a00 * a11 - a01 * a10;
            // C = A^{-1} B
            let c00 = (a11 * b00 - a01 * b10) / det_a;
            let c01 = (a11 * b01 - a01 * b11) / det_a;
            let c10 = (a00 * b10 - a10 * b00) / det_a;
            let c11 = (a00 * b11 - a10 * b01) / det_a;
            let tr = c00 + c11;
            let det = c00 * c11 - c01 * c10;
            quad_max_modulus(-tr, det)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compgrid;
    use crate::discretization::{active_points, coefficients, GridOperator};
    use crate::mapping::Mapping;
    use crate::PlateParams;

    const PI: f64 = std::f64::consts::PI;

    fn unit_params() -> PlateParams {
        PlateParams { rho: 1.0, thickness: 1.0, k_spring: 1.0, tension: 1.0, d_flex: 1.0, nu: 0.3 }
    }

    #[test]
    fn symbol_on_unit_cartesian_grid() {
        let m = Mapping::Rectangle { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 };
        let p = unit_params();
        let c = coefficients(&m.metrics(0.5, 0.5), &p);
        let h = [0.1, 0.1];
        assert_eq!(symbol(&c, h, 1.0, [0.0, 0.0]), -1.0, "xi=0 leaves only -K");
        let q_pp = symbol(&c, h, 1.0, [PI, PI]);
        assert!((q_pp - (-640801.0)).abs() < 1e-6, "(pi,pi): {q_pp}");
        let q_p0 = symbol(&c, h, 1.0, [PI, 0.0]);
        assert!((q_p0 - (-160401.0)).abs() < 1e-7, "(pi,0): {q_p0}");
    }

    #[test]
    fn q_extremum_on_single_grid_and_k_only() {
        let cg = compgrid::single_square(1).unwrap();
        let p = unit_params();
        let op = GridOperator::new(&cg.grids[0], &p, 1.0, active_points(&cg.grids[0]));
        let q = q_hat_max(&cg, std::slice::from_ref(&op), p.k_spring).unwrap();
        assert!((q - (-640801.0)).abs() < 1e-6);
        // K-only problem: symbol is the constant -K
        let pk = PlateParams { tension: 0.0, d_flex: 0.0, k_spring: 7.0, ..p };
        let opk = GridOperator::new(&cg.grids[0], &pk, 1.0, active_points(&cg.grids[0]));
        let qk = q_hat_max(&cg, std::slice::from_ref(&opk), 7.0).unwrap();
        assert!((qk + 7.0).abs() < 1e-12);
    }

    #[test]
    fn symbol_is_nonpositive_and_extremal_at_pi_pi() {
        // brute-force a xi-lattice on every in-scope grid type
        let p = unit_params();
        let grids = [
            compgrid::single_square(1).unwrap(),
            compgrid::two_patch_square(1).unwrap(),
            compgrid::disc(1).unwrap(),
            compgrid::square_with_hole(2).unwrap(),
        ];
        for cg in &grids {
            for g in &cg.grids {
                let op = GridOperator::new(g, &p, 1.0, active_points(g));
                for c in &op.coeffs {
                    let q_pp = symbol(c, g.h, p.k_spring, [PI, PI]);
                    for i in 0..=16 {
                        for j in 0..=16 {
                            let xi = [PI * i as f64 / 16.0, PI * j as f64 / 16.0];
                            let v = symbol(c, g.h, p.k_spring, xi);
                            assert!(v <= 1e-9, "positive symbol {v} at xi={xi:?}");
                            assert!(v >= q_pp - 1e-9 * q_pp.abs(), "extremum not at (pi,pi)");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn q_extremum_refines_at_fourth_order_rate() {
        let p = unit_params();
        let mut qs = Vec::new();
        for level in [1u32, 2, 4] {
            let cg = compgrid::disc(level).unwrap();
            let ops: Vec<_> = cg
                .grids
                .iter()
                .map(|g| GridOperator::new(g, &p, 1.0, active_points(g)))
                .collect();
            qs.push(q_hat_max(&cg, &ops, p.k_spring).unwrap().abs());
        }
        for w in qs.windows(2) {
            let ratio = w[1] / w[0];
            assert!((14.0..=18.0).contains(&ratio), "|Q_M| refinement ratio {ratio}");
        }
    }

    #[test]
    fn dissipation_coefficient_examples() {
        assert_eq!(dissipation_coefficient(-123.0, 0.0), 0.0);
        assert!((dissipation_coefficient(-640801.0, 0.1) - 0.1 * 640801f64.sqrt() / 16.0).abs() < 1e-12);
        assert!((dissipation_coefficient(-256.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mu_bound_behavior() {
        assert!(mu_lower_bound(-1.0, 0.0).abs() < 1e-12, "no perturbation, no dissipation needed");
        let b = mu_lower_bound(-1.0, 0.01);
        assert!(b > 0.0 && b < 1.0);
        assert!((mu_lower_bound(-1.0, 0.01) - mu_lower_bound(-1.0, -0.01)).abs() < 1e-15);
    }

    #[test]
    fn time_step_formula_examples() {
        assert!((time_step(Scheme::C2, -4.0, 0.0, 1.0, 1.0) - 1.0).abs() < 1e-14);
        assert!((time_step(Scheme::Pc22, -4.0, 0.0, 1.0, 1.0) - 0.6).abs() < 1e-14);
        // dissipative UPC2 case
        let ad = dissipation_coefficient(-640801.0, 0.1);
        let dt = time_step(Scheme::Upc2, -640801.0, 32.0 * ad, 0.9, 1.0);
        assert!((dt - 2.249e-3).abs() < 1e-5, "UPC2 dt {dt}");
        // rho H division happens inside
        let dt_heavy = time_step(Scheme::C2, -4.0, 0.0, 1.0, 4.0);
        assert!((dt_heavy - 2.0).abs() < 1e-14);
    }

    #[test]
    fn marginal_and_nondissipative_roots() {
        for m in [-4.0f64, -640801.0] {
            let dt = 2.0 / (-m).sqrt();
            let r = check_roots(Scheme::C2, m, 0.0, 0.0, dt);
            assert!((r - 1.0).abs() < 1e-12, "C2 marginal root {r}");
        }
        for dt in [0.01, 0.5, 3.0, 100.0] {
            let r = check_roots(Scheme::Nb2, -7.3, 0.0, 0.0, dt);
            assert!((r - 1.0).abs() < 1e-10, "NB2 nondissipative: {r} at dt={dt}");
        }
    }

    #[test]
    fn formula_time_steps_keep_roots_inside_unit_disc() {
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut rng = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let m = -(10f64).powf(rng() * 6.0);
            for df in [0.0, 0.1] {
                let mu = 32.0 * dissipation_coefficient(m, df);
                for scheme in [Scheme::C2, Scheme::Upc2, Scheme::Pc22, Scheme::Nb2] {
                    let dt = time_step(scheme, m, mu, 1.0, 1.0);
                    let r = check_roots(scheme, m, 0.0, mu, dt);
                    assert!(r <= 1.0 + 1e-9, "{scheme:?} m={m} df={df}: {r}");
                }
            }
        }
    }

    #[test]
    fn explicit_formulas_are_sharp() {
        // 5% over the formula step must destabilize C2 and UPC2 somewhere
        let ms = [-1.0, -10.0, -1e3, -1e6];
        for scheme in [Scheme::C2, Scheme::Upc2] {
            let exceeded = ms.iter().any(|&m| {
                let dt = time_step(scheme, m, 0.0, 1.05, 1.0);
                check_roots(scheme, m, 0.0, 0.0, dt) > 1.0
            });
            assert!(exceeded, "{scheme:?} not sharp at csf=1.05");
        }
    }

    #[test]
    fn perturbed_roots_with_dissipation_stay_bounded() {
        // imaginary perturbation n with df=0.1 dissipation at csf=0.9
        let mut seed = 0xdeadbeef12345u64;
        let mut rng = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let m = -(10f64).powf(rng() * 6.0);
            let n = 0.05 * m.abs() * (rng() - 0.5);
            let mu = 32.0 * dissipation_coefficient(m, 0.1);
            for scheme in [Scheme::C2, Scheme::Upc2, Scheme::Pc22, Scheme::Nb2] {
                let dt = time_step(scheme, m, mu, 0.9, 1.0);
                let r = check_roots(scheme, m, n, mu, dt);
                assert!(r <= 1.0 + 1e-12, "{scheme:?} m={m} n={n}: {r}");
            }
        }
    }
}
