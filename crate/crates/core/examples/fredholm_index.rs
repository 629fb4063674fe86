//! Kernel, cokernel and index of a few elliptic symbols on the circle, and a
//! restricted solve for the winding operator.

use refined_sobolev::pseudo::{fredholm_analysis, projectors, restricted_solve, MatrixSymbol, TorusSection};
use refined_sobolev::weights::SlowVaryWeight;

fn main() -> refined_sobolev::Result<()> {
    let log = SlowVaryWeight::log_power(1.0);
    let symbols = [
        ("identity", MatrixSymbol::identity(1)),
        ("d/dx", MatrixSymbol::derivative()),
        ("d/dx + cos x", MatrixSymbol::derivative_plus_cos()),
        ("winding 1", MatrixSymbol::winding(1)),
        ("winding 2", MatrixSymbol::winding(2)),
    ];
    println!("{:<14}{:>5}{:>7}{:>7}{:>12}", "symbol", "ker", "coker", "index", "gap");
    for (name, a) in &symbols {
        let r = fredholm_analysis(a, 0.5, &log, 64)?;
        println!("{name:<14}{:>5}{:>7}{:>7}{:>12.2e}", r.kernel_dim(), r.cokernel_dim(), r.index, r.gap.min(r.adjoint_gap));
    }

    let a = MatrixSymbol::winding(1);
    let report = fredholm_analysis(&a, 0.5, &log, 64)?;
    let (_, p_plus) = projectors(&report)?;
    let f = p_plus.apply_section(&TorusSection::random(3, 0, 1, 64, 8, 1.0));
    let sol = restricted_solve(&a, &report, &f)?;
    println!("\nwinding 1: residual {:.2e}, condition {:.4}", sol.residual, sol.condition);
    Ok(())
}
