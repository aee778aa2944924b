use liouville::identities::{quad_opposite_cdf, standard_ideal_quadrilateral, OppositePair};
use liouville::integrate::IntegratorConfig;
use std::time::Instant;

fn main() {
    let quad = standard_ideal_quadrilateral();
    let cfg = IntegratorConfig { tolerance: 1e-6, ..Default::default() };
    eprintln!("start");
    let t0 = Instant::now();
    let m = quad_opposite_cdf(&quad, OppositePair::OneThree, 2.0, &cfg).unwrap();
    eprintln!("rho0=2: oracle={:.8} formula={:.8} nonmono={} [{:?}]", m.oracle, m.formula, m.non_monotone, t0.elapsed());
}
