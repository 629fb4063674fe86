//! A priori constants for a variable-coefficient elliptic operator and the
//! decay of its commutator with a multiplication on frequency shells.

use std::f64::consts::PI;

use refined_sobolev::pseudo::{
    apriori_estimate_harness, commutator_shell_norms, AprioriVariant, MatrixSymbol, SmoothCutoff, TorusSection,
};
use refined_sobolev::weights::SlowVaryWeight;
use refined_sobolev::Complex64;

fn main() -> refined_sobolev::Result<()> {
    let a = MatrixSymbol::variable_elliptic();
    let log = SlowVaryWeight::log_power(1.0);
    let chi = SmoothCutoff::new(0.0, 0.6, 1.2)?;
    let eta = SmoothCutoff::new(0.0, 1.5, 2.2)?;
    println!("χ(0) = {}, χ(π) = {}", chi.eval(0.0), chi.eval(PI));
    for n in [32, 64, 128] {
        let samples: Vec<_> = (0..20).map(|i| TorusSection::random(1, i, 1, n, n, 3.0)).collect();
        let local = apriori_estimate_harness(&a, &AprioriVariant::Localized { chi, eta }, 0.0, &log, -0.5, &samples)?;
        let sharp = apriori_estimate_harness(&a, &AprioriVariant::Sharpened { chi }, 0.0, &log, 0.5, &samples)?;
        println!("N = {n:>3}: localized C ≈ {:.4}, sharpened C ≈ {:.4}", local.c_estimate, sharp.c_estimate);
    }

    let q = Complex64::new(0.25, 0.0);
    let cosine = MatrixSymbol::multiplication(1, &[(-1, q), (0, Complex64::new(0.5, 0.0)), (1, q)]);
    let mut previous: Option<f64> = None;
    for n in [32, 64, 128, 256] {
        let (lower, top) = commutator_shell_norms(&a, &cosine, 0.0, &log, n)?;
        let factor = previous.map(|p| format!("{:.3}", p / top)).unwrap_or_default();
        println!("N = {n:>3}: ‖[A,χ]‖ from H^(m−1) {lower:.4}, from H^m {top:.4e} {factor}");
        previous = Some(top);
    }
    Ok(())
}
