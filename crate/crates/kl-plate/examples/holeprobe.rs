use kl_plate::boundary::{BcKind, GridBc, Homogeneous};
use kl_plate::compgrid::square_with_hole;
use kl_plate::stability::time_step;
use kl_plate::stepping::*;
use kl_plate::{PlateParams, Scheme};

fn run(case: &str, rim: BcKind, outer: BcKind, steps: usize) {
    let cg = square_with_hole(2).unwrap();
    let p = PlateParams { rho: 1.0, thickness: 1.0, k_spring: 1.0, tension: 1.0, d_flex: 1.0, nu: 0.3 };
    let mut bcs: Vec<GridBc> = Vec::new();
    // grid 0 = ring (rim = axis 0 end 0), grid 1 = square (all physical)
    let mut b0 = GridBc::uniform(rim, &cg.grids[0]);
    b0.sides = [[Some(rim), None], [None, None]];
    bcs.push(b0);
    bcs.push(GridBc::uniform(outer, &cg.grids[1]));
    let sys = PlateSystem::new(&cg, p, &bcs, 1.0, 0.1).unwrap();
    let dt = time_step(Scheme::C2, sys.q_hat, 32.0 * sys.ad, 0.9, p.mass());
    let mut w0 = cg.zeros();
    let v0 = cg.zeros();
    let g = &cg.grids[1];
    for pt in g.points() {
        let [x, y] = g.phys_coords(pt);
        let r = ((x + 1.4).powi(2) + y * y).sqrt();
        if r < 0.4 {
            w0[1][g.index(pt)] = (std::f64::consts::PI * r / 0.8).cos().powi(4);
        }
    }
    let forcing = NoForcing;
    let spatial = Homogeneous;
    let bc = BcSource { spatial: &spatial, time: TimeFactor::Constant };
    let mut st = Stepper::new(&sys, Scheme::C2, dt, 0.0, w0, v0, &forcing, bc).unwrap();
    let mut trace = vec![st.max_w()];
    for s in 1..=steps {
        if st.step().is_err() { println!("{case}: INF at step {s}"); return; }
        if s % (steps / 5) == 0 { trace.push(st.max_w()); }
    }
    println!("{case}: max|W| trace {:?}", trace.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>());
}

fn main() {
    run("rim=clamped outer=clamped", BcKind::Clamped, BcKind::Clamped, 1000);
    run("rim=free    outer=clamped", BcKind::Free, BcKind::Clamped, 1000);
    run("rim=clamped outer=free   ", BcKind::Clamped, BcKind::Free, 1000);
    run("rim=free    outer=free   ", BcKind::Free, BcKind::Free, 1000);
}
