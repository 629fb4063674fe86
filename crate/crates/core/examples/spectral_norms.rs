//! Refined norms, the duality pairing and sup norms on the circle.

use std::sync::Arc;

use refined_sobolev::spectral::{
    duality_bound, hs_norm, hs_phi_norm, sup_and_cq_seminorms, FrequencyLattice, SpectralFunction,
};
use refined_sobolev::weights::SlowVaryWeight;
use refined_sobolev::Complex64;

fn main() -> refined_sobolev::Result<()> {
    let lattice = Arc::new(FrequencyLattice::torus(1, 256)?);
    let u = SpectralFunction::from_fn(lattice.clone(), |k| {
        let b = (1.0 + (k[0] * k[0]) as f64).sqrt();
        Complex64::new(b.powf(-1.2), 0.0)
    });
    let log = SlowVaryWeight::log_power(1.0);
    for s in [0.0, 0.5, 0.7] {
        println!("s = {s}: ‖u‖_s = {:.6}, ‖u‖_(s,log) = {:.6}", hs_norm(&u, s), hs_phi_norm(&u, s, &log));
    }
    println!("sup |u| = {:.6}", sup_and_cq_seminorms(&u, 0)?);
    println!("C^1 seminorm = {:.6}", sup_and_cq_seminorms(&u, 1)?);

    // the extremal partner of u makes the pairing bound an equality
    let profile = lattice.weight_profile(0.5, &log);
    let v = u.multiply(|i| Complex64::new(profile[i] * profile[i], 0.0));
    let report = duality_bound(&u, &v, 0.5, &log)?;
    println!("|⟨u,v⟩| = {:.6}, bound = {:.6}, ratio = {:.15}", report.pairing_abs, report.bound, report.ratio);
    Ok(())
}
