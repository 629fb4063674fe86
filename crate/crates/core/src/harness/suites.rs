use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{Experiment, Suite};
use super::generate_sections;
use super::report::{ReportRow, RowVerdict};
use crate::bundle::{self, BundleModel, BundleSpec, GlobalSection, RatioBracket};
use crate::error::Result;
use crate::interp::{self, HilbertPair};
use crate::linalg::{self, CMat};
use crate::pseudo::{self, AprioriVariant, MatrixSymbol, SmoothCutoff, SymbolSpec, TorusSection};
use crate::spectral::{self, FrequencyLattice, SpectralFunction};
use crate::weights::{self, QuadratureConfig, SlowVaryWeight, Verdict};

/// Relative drift allowed for "stable in N" quantities, per suite.
const EQUIVALENCE_DRIFT: f64 = 0.10;
const ATLAS_DRIFT: f64 = 0.10;
const DUALITY_DRIFT: f64 = 0.15;
const CONDITION_DRIFT: f64 = 0.20;
const APRIORI_DRIFT: f64 = 0.15;
const COMMUTATOR_DRIFT: f64 = 0.10;
const REGULARITY_DRIFT: f64 = 0.10;
const SEWING_DRIFT: f64 = 0.10;

pub(super) fn run(exp: &Experiment) -> Result<Vec<ReportRow>> {
    let ctx = Ctx { exp, hash: exp.hash() };
    match exp.suite {
        Suite::InterpExactness => interp_exactness(&ctx),
        Suite::InterpEquivalence => interp_equivalence(&ctx),
        Suite::AtlasIndependence => atlas_independence(&ctx),
        Suite::Duality => duality(&ctx),
        Suite::EmbeddingCriterion => embedding_criterion(&ctx),
        Suite::Sharpness => sharpness(&ctx),
        Suite::FredholmIndex => fredholm_index(&ctx),
        Suite::IndexInvariance => index_invariance(&ctx),
        Suite::RestrictedIsomorphism => restricted_isomorphism(&ctx),
        Suite::Apriori => apriori(&ctx),
        Suite::Regularity => regularity(&ctx),
        Suite::Sewing => sewing(&ctx),
    }
}

struct Ctx<'a> {
    exp: &'a Experiment,
    hash: String,
}

impl Ctx<'_> {
    fn row(&self, n: usize, params: &str, quantity: &str, value: f64, tolerance: Option<f64>, verdict: RowVerdict) -> ReportRow {
        ReportRow {
            suite: self.exp.suite.name().into(),
            config_hash: self.hash.clone(),
            seed: self.exp.seed,
            resolution: n,
            parameters: params.into(),
            quantity: quantity.into(),
            value,
            tolerance,
            verdict,
        }
    }

    /// A measured value without its own acceptance test.
    fn info(&self, n: usize, params: &str, quantity: &str, value: f64) -> ReportRow {
        let verdict = if value.is_nan() { RowVerdict::Inconclusive } else { RowVerdict::Pass };
        self.row(n, params, quantity, value, None, verdict)
    }

    fn at_most(&self, n: usize, params: &str, quantity: &str, value: f64, tolerance: f64) -> ReportRow {
        self.row(n, params, quantity, value, Some(tolerance), RowVerdict::from_bool(value <= tolerance))
    }

    fn at_least(&self, n: usize, params: &str, quantity: &str, value: f64, tolerance: f64) -> ReportRow {
        self.row(n, params, quantity, value, Some(tolerance), RowVerdict::from_bool(value >= tolerance))
    }

    /// `max/min − 1` of a series across the configured cutoffs. A single
    /// cutoff gives no drift row.
    fn drift(&self, params: &str, quantity: &str, values: &[f64], tolerance: f64) -> Option<ReportRow> {
        if values.len() < 2 {
            return None;
        }
        let n = *self.exp.cutoffs.last().expect("validated");
        Some(self.at_most(n, params, &format!("{quantity}-drift"), relative_spread(values), tolerance))
    }

    fn space(&self, w: &SlowVaryWeight) -> String {
        format!("s={};phi={}", self.exp.s, weight_label(w))
    }
}

fn relative_spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.0 {
        hi / lo - 1.0
    } else if hi == lo {
        0.0
    } else {
        f64::INFINITY
    }
}

/// `1`, `log^r` or `log^a·log2^b…`, with a scale factor when not 1.
fn weight_label(w: &SlowVaryWeight) -> String {
    let mut out = if w.exponents().iter().all(|&r| r == 0.0) {
        "1".to_string()
    } else {
        w.exponents()
            .iter()
            .enumerate()
            .filter(|(_, r)| **r != 0.0)
            .map(|(i, r)| if i == 0 { format!("log^{r}") } else { format!("log{}^{r}", i + 1) })
            .collect::<Vec<_>>()
            .join("*")
    };
    if w.scale() != 1.0 {
        out = format!("{}*{out}", w.scale());
    }
    out
}

/// Runs `f` over the product `items × cutoffs` in parallel, keeping order.
fn grid<T: Sync, R: Send>(
    items: &[T],
    cutoffs: &[usize],
    f: impl Fn(&T, usize) -> Result<R> + Sync,
) -> Result<Vec<Vec<R>>> {
    let flat: Vec<(usize, usize)> = (0..items.len()).flat_map(|i| cutoffs.iter().map(move |&n| (i, n))).collect();
    let results: Vec<R> = flat.par_iter().map(|&(i, n)| f(&items[i], n)).collect::<Result<_>>()?;
    let mut it = results.into_iter();
    Ok(items.iter().map(|_| it.by_ref().take(cutoffs.len()).collect()).collect())
}

fn interp_exactness(ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let e = ctx.exp;
    let out = grid(&e.weights, &e.cutoffs, |w, n| {
        let lat = FrequencyLattice::torus(1, n)?;
        let psi = weights::build_interp_parameter(w, e.epsilon, e.delta)?;
        let pair = HilbertPair::sobolev(&lat, e.s, e.epsilon, e.delta)?;
        let g = interp::interpolate(&pair, &psi)?;
        let c = lat.quadrature_constant();
        let d: Vec<f64> = lat.weight_profile(e.s, w).iter().map(|p| c * p * p).collect();
        let mut residual = 0.0f64;
        for i in 0..d.len() {
            for j in 0..d.len() {
                let target = if i == j { d[i] } else { 0.0 };
                residual = residual.max((g[(i, j)].re - target).abs().max(g[(i, j)].im.abs()) / (d[i] * d[j]).sqrt());
            }
        }
        let params = format!("{};eps={};delta={}", ctx.space(w), e.epsilon, e.delta);
        Ok(ctx.at_most(n, &params, "max-relative-residual", residual, 1e-12))
    })?;
    Ok(out.into_iter().flatten().collect())
}

fn interp_equivalence(ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let e = ctx.exp;
    let one = SlowVaryWeight::constant();
    let cases: Vec<(String, SlowVaryWeight)> = e
        .bundles
        .iter()
        .flat_map(|b| e.weights.iter().map(move |w| (b.clone(), w.clone())))
        .collect();
    let out = grid(&cases, &e.cutoffs, |(name, w), n| {
        let model = BundleModel::new(BundleSpec::named(name)?, n)?;
        let basis = model.band_limited_basis(n);
        let lower = model.gram_form(&basis, e.s - e.epsilon, &one)?;
        let upper = model.gram_form(&basis, e.s + e.delta, &one)?;
        let direct = model.gram_form(&basis, e.s, w)?;
        let psi = weights::build_interp_parameter(w, e.epsilon, e.delta)?;
        interp::interpolation_equivalence(&lower, &upper, &direct, &psi)
    })?;
    let mut rows = Vec::new();
    for ((name, w), series) in cases.iter().zip(out) {
        let params = format!("bundle={name};{};eps={};delta={}", ctx.space(w), e.epsilon, e.delta);
        for (&n, k) in e.cutoffs.iter().zip(&series) {
            rows.push(ctx.info(n, &params, "c-lower", k.c_lower));
            rows.push(ctx.info(n, &params, "c-upper", k.c_upper));
        }
        let lo: Vec<f64> = series.iter().map(|k| k.c_lower).collect();
        let hi: Vec<f64> = series.iter().map(|k| k.c_upper).collect();
        rows.extend(ctx.drift(&params, "c-lower", &lo, EQUIVALENCE_DRIFT));
        rows.extend(ctx.drift(&params, "c-upper", &hi, EQUIVALENCE_DRIFT));
    }
    Ok(rows)
}

/// Second atlas: charts rotated by π/5 with narrower bumps.
fn alternate_atlas(spec: &BundleSpec) -> BundleSpec {
    spec.rotated(PI / 5.0).with_bumps(0.58 * PI)
}

fn atlas_independence(ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let e = ctx.exp;
    let cases: Vec<(String, SlowVaryWeight)> = e
        .bundles
        .iter()
        .flat_map(|b| e.weights.iter().map(move |w| (b.clone(), w.clone())))
        .collect();
    let out = grid(&cases, &e.cutoffs, |(name, w), n| {
        let spec = BundleSpec::named(name)?;
        let a = BundleModel::new(spec.clone(), n)?;
        let b = BundleModel::new(alternate_atlas(&spec), n)?;
        let sections = generate_sections(e.seed, n, e.samples, &a, e.decay)?;
        bundle::atlas_independence_test(&sections, &a, &b, e.s, w)
    })?;
    let mut rows = Vec::new();
    for ((name, w), series) in cases.iter().zip(out) {
        let params = format!("bundle={name};{};samples={};decay={}", ctx.space(w), e.samples, e.decay);
        for (&n, b) in e.cutoffs.iter().zip(&series) {
            rows.push(ctx.info(n, &params, "ratio-min", b.ratio_min));
            rows.push(ctx.info(n, &params, "ratio-max", b.ratio_max));
        }
        let lo: Vec<f64> = series.iter().map(|b: &RatioBracket| b.ratio_min).collect();
        let hi: Vec<f64> = series.iter().map(|b| b.ratio_max).collect();
        rows.extend(ctx.drift(&params, "ratio-min", &lo, ATLAS_DRIFT));
        rows.extend(ctx.drift(&params, "ratio-max", &hi, ATLAS_DRIFT));
    }
    Ok(rows)
}

fn random_spectral(lattice: &Arc<FrequencyLattice>, seed: u64, sample: u64, decay: f64) -> Result<SpectralFunction> {
    let g = GlobalSection::random(seed, sample, 1, lattice.cutoff(), decay);
    SpectralFunction::new(lattice.clone(), g.coeffs().to_vec())
}

fn duality(ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let e = ctx.exp;
    let count = e.samples as u64;
    let torus = grid(&e.weights, &e.cutoffs, |w, n| {
        let lat = Arc::new(FrequencyLattice::torus(1, n)?);
        let mut worst = 0.0f64;
        for i in 0..count {
            let u = random_spectral(&lat, e.seed, i, e.decay)?;
            let v = random_spectral(&lat, e.seed, count + i, e.decay)?;
            worst = worst.max(spectral::duality_bound(&u, &v, e.s, w)?.ratio);
        }
        let u = random_spectral(&lat, e.seed, 2 * count, e.decay)?;
        let profile = lat.weight_profile(e.s, w);
        let v = u.multiply(|i| Complex64::new(profile[i] * profile[i], 0.0));
        let extremal = (spectral::duality_bound(&u, &v, e.s, w)?.ratio - 1.0).abs();
        Ok((worst, extremal))
    })?;
    let mut rows = Vec::new();
    for (w, series) in e.weights.iter().zip(torus) {
        let params = format!("space=torus;{};samples={}", ctx.space(w), e.samples);
        for (&n, (worst, extremal)) in e.cutoffs.iter().zip(series) {
            rows.push(ctx.at_most(n, &params, "pairing-constant", worst, 1.0 + 1e-13));
            rows.push(ctx.at_most(n, &params, "extremal-defect", extremal, 1e-12));
        }
    }
    let cases: Vec<(String, SlowVaryWeight)> = e
        .bundles
        .iter()
        .flat_map(|b| e.weights.iter().map(move |w| (b.clone(), w.clone())))
        .collect();
    let bundles = grid(&cases, &e.cutoffs, |(name, w), n| {
        let model = BundleModel::new(BundleSpec::named(name)?, n)?;
        let dual = w.reciprocal();
        let us = generate_sections(e.seed, n, e.samples, &model, e.decay)?;
        let mut worst = 0.0f64;
        for (i, u) in us.iter().enumerate() {
            let v = GlobalSection::random(e.seed, count + i as u64, model.rank(), n, e.decay);
            let (su, sv) = (model.sample(u)?, model.sample(&v)?);
            let bound = bundle::bundle_norm(&su, e.s, w)? * bundle::bundle_norm(&sv, -e.s, &dual)?;
            if bound > 0.0 {
                worst = worst.max(bundle::hermitian_pairing(&su, &sv)?.norm() / bound);
            }
        }
        Ok(worst)
    })?;
    for ((name, w), series) in cases.iter().zip(bundles) {
        let params = format!("bundle={name};{};samples={}", ctx.space(w), e.samples);
        for (&n, c) in e.cutoffs.iter().zip(&series) {
            rows.push(ctx.info(n, &params, "pairing-constant", *c));
        }
        rows.extend(ctx.drift(&params, "pairing-constant", &series, DUALITY_DRIFT));
    }
    Ok(rows)
}

fn embedding_criterion(ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let cfg = QuadratureConfig::default();
    let rows = ctx
        .exp
        .exponents
        .par_iter()
        .map(|&r| {
            let report = weights::embedding_criterion(&SlowVaryWeight::log_power(r), &cfg);
            let expected = r > 0.5;
            let (value, verdict) = match report.verdict {
                Verdict::Convergent => (1.0, RowVerdict::from_bool(expected)),
                Verdict::Divergent => (0.0, RowVerdict::from_bool(!expected)),
                Verdict::Inconclusive => (f64::NAN, RowVerdict::Inconclusive),
            };
            let params = format!("phi=log^{r};expected={}", if expected { "convergent" } else { "divergent" });
            ctx.row(0, &params, "convergent", value, None, verdict)
        })
        .collect();
    Ok(rows)
}

fn sharpness(ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let e = ctx.exp;
    let norms: Vec<(f64, f64)> = e.cutoffs.par_iter().map(|&k| pseudo::sharpness_norms(k)).collect::<Result<_>>()?;
    let params = "family=1/(k log k)";
    let mut rows = Vec::new();
    for (&k, (h, sup)) in e.cutoffs.iter().zip(&norms) {
        rows.push(ctx.info(k, params, "h-half-norm", *h));
        rows.push(ctx.info(k, params, "sup-norm", *sup));
    }
    if norms.len() >= 2 {
        let (first, last) = (norms[0], norms[norms.len() - 1]);
        let k = *e.cutoffs.last().expect("validated");
        rows.push(ctx.at_most(k, params, "h-half-increase", last.0 / first.0 - 1.0, 0.01));
        rows.push(ctx.at_least(k, params, "sup-increase", last.1 / first.1 - 1.0, 0.08));
    }
    Ok(rows)
}

/// Index predicted for the built-in families; `None` for custom symbols.
fn expected_index(spec: &SymbolSpec) -> Option<i64> {
    match spec {
        SymbolSpec::Winding { w } => Some(-w),
        SymbolSpec::Custom { .. } => None,
        _ => Some(0),
    }
}

fn fredholm_index(ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let e = ctx.exp;
    let w = &e.weights[0];
    let out = grid(&e.symbols, &e.cutoffs, |spec, n| pseudo::fredholm_analysis(&spec.build()?, e.s, w, n))?;
    let mut rows = Vec::new();
    for (spec, series) in e.symbols.iter().zip(out) {
        let params = format!("symbol={};{}", spec.label(), ctx.space(w));
        for (&n, rep) in e.cutoffs.iter().zip(&series) {
            rows.push(ctx.info(n, &params, "kernel-dim", rep.kernel_dim() as f64));
            rows.push(ctx.info(n, &params, "cokernel-dim", rep.cokernel_dim() as f64));
            let verdict = match expected_index(spec) {
                Some(i) => RowVerdict::from_bool(rep.index == i),
                None => RowVerdict::Pass,
            };
            rows.push(ctx.row(n, &params, "index", rep.index as f64, Some(0.0), verdict));
            rows.push(ctx.at_least(n, &params, "rank-gap", rep.gap.min(rep.adjoint_gap), pseudo::RANK_GAP));
            rows.push(ctx.at_most(n, &params, "cokernel-orthogonality", rep.cokernel_orthogonality, 1e-8));
        }
        let first = series[0].index;
        let spread = series.iter().map(|r| (r.index - first).abs()).max().unwrap_or(0) as f64;
        let n = *e.cutoffs.last().expect("validated");
        rows.push(ctx.at_most(n, &params, "index-spread", spread, 0.0));
    }
    Ok(rows)
}

fn max_angle(a: &CMat, b: &CMat) -> f64 {
    if a.ncols() != b.ncols() {
        return f64::INFINITY;
    }
    linalg::principal_angles(a, b).into_iter().fold(0.0, f64::max)
}

fn index_invariance(ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let e = ctx.exp;
    let spaces = if e.spaces.is_empty() {
        vec![super::SpaceConfig {
            s: e.s,
            weight: e.weights[0].clone(),
        }]
    } else {
        e.spaces.clone()
    };
    let mut rows = Vec::new();
    for spec in &e.symbols {
        let a = spec.build()?;
        let out = grid(&spaces, &e.cutoffs, |sp, n| pseudo::fredholm_analysis(&a, sp.s, &sp.weight, n))?;
        for (ni, &n) in e.cutoffs.iter().enumerate() {
            let base = &out[0][ni];
            let mut spread = 0.0f64;
            for (sp, series) in spaces.iter().zip(&out) {
                let rep = &series[ni];
                let params = format!("symbol={};s={};phi={}", spec.label(), sp.s, weight_label(&sp.weight));
                rows.push(ctx.info(n, &params, "index", rep.index as f64));
                rows.push(ctx.at_most(n, &params, "kernel-angle", max_angle(&rep.kernel, &base.kernel), 1e-8));
                rows.push(ctx.at_most(n, &params, "cokernel-angle", max_angle(&rep.cokernel, &base.cokernel), 1e-8));
                spread = spread.max((rep.index - base.index).abs() as f64);
            }
            rows.push(ctx.at_most(n, &format!("symbol={}", spec.label()), "index-spread", spread, 0.0));
        }
    }
    Ok(rows)
}

fn restricted_isomorphism(ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let e = ctx.exp;
    let w = &e.weights[0];
    let band = e.band.unwrap_or(8);
    let out = grid(&e.symbols, &e.cutoffs, |spec, n| {
        let a = spec.build()?;
        let report = pseudo::fredholm_analysis(&a, e.s, w, n)?;
        let (_, pplus) = pseudo::projectors(&report)?;
        let mut residual = 0.0f64;
        let mut condition = 0.0f64;
        for i in 0..e.samples as u64 {
            let f = pplus.apply_section(&TorusSection::random(e.seed, i, a.rank(), n, band.min(n), e.decay));
            let sol = pseudo::restricted_solve(&a, &report, &f)?;
            residual = residual.max(sol.residual);
            condition = condition.max(sol.condition);
        }
        Ok((residual, condition))
    })?;
    let mut rows = Vec::new();
    for (spec, series) in e.symbols.iter().zip(out) {
        let params = format!("symbol={};{};band={band};samples={}", spec.label(), ctx.space(w), e.samples);
        for (&n, (res, cond)) in e.cutoffs.iter().zip(&series) {
            rows.push(ctx.at_most(n, &params, "max-residual", *res, 1e-8));
            rows.push(ctx.info(n, &params, "condition", *cond));
        }
        let conds: Vec<f64> = series.iter().map(|p| p.1).collect();
        rows.extend(ctx.drift(&params, "condition", &conds, CONDITION_DRIFT));
    }
    Ok(rows)
}

/// `χ = (1 + cos x)/2` as a multiplication symbol.
fn raised_cosine(rank: usize) -> MatrixSymbol {
    let q = Complex64::new(0.25, 0.0);
    MatrixSymbol::multiplication(rank, &[(-1, q), (0, Complex64::new(0.5, 0.0)), (1, q)])
}

fn apriori(ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let e = ctx.exp;
    let w = &e.weights[0];
    let chi = SmoothCutoff::new(0.0, 0.6, 1.2)?;
    let eta = SmoothCutoff::new(0.0, 1.5, 2.2)?;
    let variants = [
        ("global", AprioriVariant::Global),
        ("localized", AprioriVariant::Localized { chi, eta }),
        ("sharpened", AprioriVariant::Sharpened { chi }),
    ];
    let mut rows = Vec::new();
    for spec in &e.symbols {
        let a = spec.build()?;
        let m = a.order();
        let out = grid(&variants, &e.cutoffs, |(_, variant), n| {
            let sigma = match variant {
                AprioriVariant::Sharpened { .. } => e.s + m - 0.5,
                _ => e.sigma.unwrap_or(e.s + m - 1.5),
            };
            let samples: Vec<TorusSection> = (0..e.samples as u64)
                .map(|i| TorusSection::random(e.seed, i, a.rank(), n, n, e.decay))
                .collect();
            Ok((sigma, pseudo::apriori_estimate_harness(&a, variant, e.s, w, sigma, &samples)?.c_estimate))
        })?;
        for ((name, _), series) in variants.iter().zip(out) {
            let params = format!("symbol={};variant={name};{};sigma={}", spec.label(), ctx.space(w), series[0].0);
            for (&n, (_, c)) in e.cutoffs.iter().zip(&series) {
                rows.push(ctx.info(n, &params, "c-estimate", *c));
            }
            let cs: Vec<f64> = series.iter().map(|p| p.1).collect();
            rows.extend(ctx.drift(&params, "c-estimate", &cs, APRIORI_DRIFT));
        }

        let chi_sym = raised_cosine(a.rank());
        let norms: Vec<(f64, f64)> = e
            .cutoffs
            .par_iter()
            .map(|&n| pseudo::commutator_shell_norms(&a, &chi_sym, e.s, w, n))
            .collect::<Result<_>>()?;
        let params = format!("symbol={};chi=(1+cos x)/2;{}", spec.label(), ctx.space(w));
        for (&n, (lower, upper)) in e.cutoffs.iter().zip(&norms) {
            rows.push(ctx.info(n, &params, "commutator-from-lower", *lower));
            rows.push(ctx.info(n, &params, "commutator-from-top", *upper));
        }
        let scale = linalg::spectral_norm(&a.assemble(e.cutoffs[0])).max(1.0);
        if norms.iter().all(|p| p.0 <= 1e-12 * scale) {
            // Commutes with χ on the shells: nothing decays because nothing is there.
            let n = *e.cutoffs.last().expect("validated");
            rows.push(ctx.at_most(n, &params, "commutator-shell-norm", norms.iter().map(|p| p.0).fold(0.0, f64::max), 1e-12 * scale));
        } else {
            let lower: Vec<f64> = norms.iter().map(|p| p.0).collect();
            rows.extend(ctx.drift(&params, "commutator-from-lower", &lower, COMMUTATOR_DRIFT));
            for (pair, ns) in norms.windows(2).zip(e.cutoffs.windows(2)) {
                let factor = (pair[0].1 / pair[1].1) / (ns[1] as f64 / ns[0] as f64);
                rows.push(ctx.at_least(ns[1], &params, "commutator-decay-per-doubling", 2.0 * factor, 2.0));
            }
        }
    }
    Ok(rows)
}

fn regularity(ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let e = ctx.exp;
    let w = &e.weights[0];
    let out = grid(&e.symbols, &e.cutoffs, |spec, n| {
        let a = spec.build()?;
        Ok(pseudo::regularity_experiment(&a, e.s, w, &[n])?.remove(0))
    })?;
    let mut rows = Vec::new();
    for (spec, series) in e.symbols.iter().zip(out) {
        let params = format!("symbol={};{}", spec.label(), ctx.space(w));
        for r in &series {
            rows.push(ctx.info(r.cutoff, &params, "norm-u", r.norm_u));
            rows.push(ctx.info(r.cutoff, &params, "norm-f", r.norm_f));
            rows.push(ctx.info(r.cutoff, &params, "ratio", r.ratio));
            for (sigma, v) in &r.neighbors {
                rows.push(ctx.info(r.cutoff, &params, &format!("norm-u-at-{sigma}"), *v));
            }
            rows.push(ctx.info(r.cutoff, &params, "sup-norm", r.sup_norm));
            // the data is not band-limited, so the extra output band carries
            // a truncation residual of the order of its last coefficients
            rows.push(ctx.info(r.cutoff, &params, "residual", r.residual));
        }
        let ratios: Vec<f64> = series.iter().map(|r| r.ratio).collect();
        rows.extend(ctx.drift(&params, "ratio", &ratios, REGULARITY_DRIFT));
    }
    Ok(rows)
}

/// Chart data `mollifier(t/b) Σ_{|k|≤8} e^{iθ_k} ⟨k⟩^{−decay} e^{ikt}` in
/// every chart and fiber, `b` the chart's bump half-width.
fn random_chart_data(model: &BundleModel, seed: u64, sample: u64, decay: f64) -> Result<Vec<SpectralFunction>> {
    let t = model.window_coordinates();
    let mut out = Vec::with_capacity(model.charts() * model.rank());
    for (j, chart) in model.spec().charts.iter().enumerate() {
        let g = GlobalSection::random(seed, sample * model.charts() as u64 + j as u64, model.rank(), 8, decay);
        for r in 0..model.rank() {
            let samples: Vec<Complex64> = t
                .iter()
                .map(|&x| {
                    let series: Complex64 = g
                        .component(r)
                        .iter()
                        .enumerate()
                        .map(|(i, c)| c * Complex64::from_polar(1.0, (i as f64 - 8.0) * x))
                        .sum();
                    series * bundle::mollifier(x / chart.bump_half_width)
                })
                .collect();
            out.push(model.chart_function(&samples)?);
        }
    }
    Ok(out)
}

fn sewing(ctx: &Ctx) -> Result<Vec<ReportRow>> {
    let e = ctx.exp;
    let cases: Vec<(String, SlowVaryWeight)> = e
        .bundles
        .iter()
        .flat_map(|b| e.weights.iter().map(move |w| (b.clone(), w.clone())))
        .collect();
    let out = grid(&cases, &e.cutoffs, |(name, w), n| {
        let model = BundleModel::new(BundleSpec::named(name)?, n)?;
        let mut roundtrip = 0.0f64;
        for u in generate_sections(e.seed, n, e.samples, &model, e.decay)? {
            let sampled = model.sample(&u)?;
            let sewn = model.sew(&sampled.flatten()?)?;
            roundtrip = roundtrip.max(sampled.max_difference(&sewn)? / sampled.max_abs().max(f64::MIN_POSITIVE));
        }
        let mut constant = 0.0f64;
        for i in 0..e.samples as u64 {
            let data = random_chart_data(&model, e.seed, i, e.decay)?;
            let flat = bundle::flattened_norm(&data, e.s, w);
            if flat > 0.0 {
                constant = constant.max(bundle::bundle_norm(&model.sew(&data)?, e.s, w)? / flat);
            }
        }
        Ok((roundtrip, constant))
    })?;
    let mut rows = Vec::new();
    for ((name, w), series) in cases.iter().zip(out) {
        let params = format!("bundle={name};{};samples={}", ctx.space(w), e.samples);
        for (&n, (rt, c)) in e.cutoffs.iter().zip(&series) {
            rows.push(ctx.at_most(n, &params, "sew-flatten-error", *rt, 1e-10));
            rows.push(ctx.info(n, &params, "sewing-constant", *c));
        }
        let cs: Vec<f64> = series.iter().map(|p| p.1).collect();
        rows.extend(ctx.drift(&params, "sewing-constant", &cs, SEWING_DRIFT));
    }
    Ok(rows)
}
