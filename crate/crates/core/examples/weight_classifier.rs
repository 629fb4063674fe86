//! Classifies the embedding integral for single-log weights and builds the
//! companion weight of `log²`.

use refined_sobolev::weights::{
    build_interp_parameter, check_pseudoconcavity, companion_weight, embedding_criterion, geometric_grid,
    CompanionVariant, QuadratureConfig, SlowVaryWeight,
};

fn main() -> refined_sobolev::Result<()> {
    let cfg = QuadratureConfig::default();
    println!("{:>6}  {:<12}  fitted exponents", "r", "verdict");
    for r in [0.25, 0.5, 0.6, 1.0, 2.0] {
        let report = embedding_criterion(&SlowVaryWeight::log_power(r), &cfg);
        println!("{r:>6}  {:<12}  {:?}", format!("{:?}", report.verdict), report.level_exponents);
    }

    let w = SlowVaryWeight::iterated_log(vec![1.0, 1.0])?;
    println!("\nφ = log·log log, splice point {:.4}", w.splice_point());
    for t in [1.0, 1e3, 1e6, 1e12] {
        println!("  φ({t:e}) = {:.6}", w.eval(t)?);
    }

    let psi = build_interp_parameter(&w, 1.0, 1.0)?;
    let pc = check_pseudoconcavity(&psi, &geometric_grid(1.0, 1e12, 200), 1e-12);
    println!("ψ(t) = t^θ φ(t^(1/2)), θ = {}: pseudoconcave on the grid: {}", psi.theta(), pc.pass);

    let log2 = SlowVaryWeight::log_power(2.0);
    let (phi0, report) = companion_weight(&log2, CompanionVariant::SquaredDenominator, &cfg)?;
    println!("\ncompanion of log², tail exponent {:.4}", report.tail_exponent);
    for t in [1e2, 1e6, 1e10] {
        println!("  φ₀({t:e}) = {:.6}", phi0.eval(t)?);
    }
    Ok(())
}
