//! Samples a section of the twisted line bundle in a two-chart atlas,
//! flattens it, sews it back and compares norms from two atlases.

use std::f64::consts::PI;

use refined_sobolev::bundle::{atlas_independence_test, bundle_norm, BundleModel, BundleSpec, GlobalSection};
use refined_sobolev::weights::SlowVaryWeight;

fn main() -> refined_sobolev::Result<()> {
    let spec = BundleSpec::named("twisted")?;
    let model = BundleModel::new(spec.clone(), 32)?;
    println!(
        "grid {} points, window ±{}, partition defect {:.1e}, cocycle defect {:.1e}",
        model.grid_points(),
        model.window(),
        model.partition_defect(),
        model.cocycle_defect()
    );

    let log = SlowVaryWeight::log_power(1.0);
    let u = GlobalSection::random(7, 0, model.rank(), 32, 2.0);
    let sampled = model.sample(&u)?;
    let sewn = model.sew(&sampled.flatten()?)?;
    println!("sew∘flatten error {:.2e}", sampled.max_difference(&sewn)?);
    for s in [0.0, 0.5, 1.0] {
        println!("‖u‖_(s={s},log) = {:.6}", bundle_norm(&sampled, s, &log)?);
    }

    let other = BundleModel::new(spec.rotated(PI / 5.0).with_bumps(0.58 * PI), 32)?;
    let sections: Vec<_> = (0..20).map(|i| GlobalSection::random(7, i, 1, 32, 2.0)).collect();
    let bracket = atlas_independence_test(&sections, &model, &other, 0.5, &log)?;
    println!("atlas ratio bracket [{:.4}, {:.4}]", bracket.ratio_min, bracket.ratio_max);
    Ok(())
}
