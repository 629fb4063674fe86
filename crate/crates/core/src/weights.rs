//! Slowly varying weights of Karamata type and the interpolation parameters
//! built from them.
//!
//! A [`SlowVaryWeight`] is the iterated-logarithm function
//! `φ(t) = c·(log t)^{r₁}(log log t)^{r₂}···` above a splice point `t₀`, held
//! constant on `[1, t₀]`. All evaluation happens in log space, so `t` itself
//! may be far outside the range of `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nesting depth supported by the iterated-log family. The splice point for
/// depth 4 is `e^{e^{e^e}}`, which is not representable.
pub const MAX_DEPTH: usize = 3;

/// Smallest `t₀` for which every nested logarithm of the given depth is `≥ 1`.
pub fn tower_splice_point(depth: usize) -> f64 {
    (0..depth).fold(1.0, |acc, _| acc.exp())
}

/// Member of the Karamata class `ℳ` from the iterated-log family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightRecord", into = "WeightRecord")]
pub struct SlowVaryWeight {
    exponents: Vec<f64>,
    splice_point: f64,
    scale: f64,
    ln_splice_value: f64,
}

/// Serialized form of a weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightRecord {
    pub exponents: Vec<f64>,
    #[serde(default)]
    pub splice_point: Option<f64>,
    #[serde(default = "unit", skip_serializing_if = "is_unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

fn is_unit(x: &f64) -> bool {
    *x == 1.0
}

impl TryFrom<WeightRecord> for SlowVaryWeight {
    type Error = Error;

    fn try_from(r: WeightRecord) -> Result<Self> {
        let t0 = r
            .splice_point
            .unwrap_or_else(|| tower_splice_point(r.exponents.len()));
        SlowVaryWeight::with_splice_point(r.exponents, t0)?.scaled(r.scale)
    }
}

impl From<SlowVaryWeight> for WeightRecord {
    fn from(w: SlowVaryWeight) -> Self {
        WeightRecord {
            exponents: w.exponents,
            splice_point: Some(w.splice_point),
            scale: w.scale,
        }
    }
}

/// Sum of `r_i · ln(log_i t)` given `ln t`; requires every nested log `> 0`.
fn ln_iterated_product(exponents: &[f64], ln_t: f64) -> f64 {
    let mut level = ln_t;
    let mut acc = 0.0;
    for (i, &r) in exponents.iter().enumerate() {
        if i > 0 {
            level = level.ln();
        }
        if r != 0.0 {
            acc += r * level.ln();
        }
    }
    acc
}

impl SlowVaryWeight {
    /// The constant weight `φ ≡ 1`.
    pub fn constant() -> Self {
        Self::iterated_log(Vec::new()).expect("empty family is valid")
    }

    /// Iterated-log weight with the minimal splice point.
    pub fn iterated_log(exponents: Vec<f64>) -> Result<Self> {
        let t0 = tower_splice_point(exponents.len());
        Self::with_splice_point(exponents, t0)
    }

    /// Single-log weight `(log t)^r`.
    pub fn log_power(r: f64) -> Self {
        Self::iterated_log(vec![r]).expect("depth 1 is valid")
    }

    pub fn with_splice_point(exponents: Vec<f64>, splice_point: f64) -> Result<Self> {
        if exponents.len() > MAX_DEPTH {
            return Err(Error::Parameter(format!(
                "iterated-log depth {} exceeds {MAX_DEPTH}",
                exponents.len()
            )));
        }
        if let Some(r) = exponents.iter().find(|r| !r.is_finite()) {
            return Err(Error::Parameter(format!("non-finite exponent {r}")));
        }
        let minimal = tower_splice_point(exponents.len());
        if !(splice_point >= minimal * (1.0 - 1e-15)) || !splice_point.is_finite() {
            return Err(Error::Parameter(format!(
                "splice point {splice_point} is below the minimal value {minimal}"
            )));
        }
        let ln_splice_value = ln_iterated_product(&exponents, splice_point.ln());
        Ok(Self {
            exponents,
            splice_point,
            scale: 1.0,
            ln_splice_value,
        })
    }

    /// The weight multiplied by a positive constant.
    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::Parameter(format!("scale factor {factor} must be positive")));
        }
        self.scale *= factor;
        Ok(self)
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn depth(&self) -> usize {
        self.exponents.len()
    }

    pub fn splice_point(&self) -> f64 {
        self.splice_point
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Constant value of the weight on `[1, t₀]`.
    pub fn splice_value(&self) -> f64 {
        self.scale * self.ln_splice_value.exp()
    }

    /// `ln φ(t)` as a function of `ln t ≥ 0`.
    pub fn ln_value_at_ln(&self, ln_t: f64) -> f64 {
        let ln_scale = self.scale.ln();
        if ln_t <= self.splice_point.ln() {
            ln_scale + self.ln_splice_value
        } else {
            ln_scale + ln_iterated_product(&self.exponents, ln_t)
        }
    }

    /// `φ(t)` for `t ≥ 1`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 1.0) {
            return Err(Error::Domain(format!("weight evaluated at t = {t} < 1")));
        }
        Ok(self.ln_value_at_ln(t.ln()).exp())
    }

    /// Infallible evaluation for callers that guarantee `t ≥ 1` (brackets
    /// `⟨k⟩` always are).
    pub(crate) fn value_unchecked(&self, t: f64) -> f64 {
        self.ln_value_at_ln(t.max(1.0).ln()).exp()
    }

    /// `1/φ`, which again lies in the class.
    pub fn reciprocal(&self) -> Self {
        Self {
            exponents: self.exponents.iter().map(|r| -r).collect(),
            splice_point: self.splice_point,
            scale: 1.0 / self.scale,
            ln_splice_value: -self.ln_splice_value,
        }
    }
}

/// Per-point slow-variation measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlowVariationSample {
    pub t: f64,
    pub lambda: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlowVariationReport {
    pub max_deviation: f64,
    pub profile: Vec<SlowVariationSample>,
}

/// Measures `|φ(λt)/φ(t) − 1|` over a grid tail.
pub fn check_slow_variation(
    w: &SlowVaryWeight,
    lambdas: &[f64],
    t_grid: &[f64],
) -> Result<SlowVariationReport> {
    if t_grid.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::Domain("t grid must be strictly increasing".into()));
    }
    if let Some(&t) = t_grid.iter().find(|&&t| t < w.splice_point()) {
        return Err(Error::Domain(format!(
            "grid point {t} lies below the splice point {}",
            w.splice_point()
        )));
    }
    if let Some(&l) = lambdas.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::Domain(format!("scale factor {l} must be positive")));
    }
    let mut profile = Vec::with_capacity(t_grid.len() * lambdas.len());
    for &t in t_grid {
        let ln_t = t.ln();
        for &lambda in lambdas {
            let ln_lt = (ln_t + lambda.ln()).max(0.0);
            let deviation = (w.ln_value_at_ln(ln_lt) - w.ln_value_at_ln(ln_t))
                .exp_m1()
                .abs();
            profile.push(SlowVariationSample {
                t,
                lambda,
                deviation,
            });
        }
    }
    let max_deviation = profile.iter().map(|s| s.deviation).fold(0.0, f64::max);
    Ok(SlowVariationReport {
        max_deviation,
        profile,
    })
}

/// A positive function usable as an interpolation parameter `ψ`.
pub trait ParameterFunction: Sync {
    fn value(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Sync> ParameterFunction for F {
    fn value(&self, t: f64) -> f64 {
        self(t)
    }
}

/// `ψ(t) = t^θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerParameter(pub f64);

impl ParameterFunction for PowerParameter {
    fn value(&self, t: f64) -> f64 {
        t.powf(self.0)
    }
}

/// The interpolation parameter that turns the Sobolev couple
/// `[H^{s−ε}, H^{s+δ}]` into `H^{s,φ}`:
/// `ψ(t) = t^{ε/(ε+δ)} φ(t^{1/(ε+δ)})` for `t ≥ 1`, `ψ(t) = φ(1)` below.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpParameter {
    base: SlowVaryWeight,
    epsilon: f64,
    delta: f64,
}

pub fn build_interp_parameter(w: &SlowVaryWeight, epsilon: f64, delta: f64) -> Result<InterpParameter> {
    if !(epsilon > 0.0) || !(delta > 0.0) || !epsilon.is_finite() || !delta.is_finite() {
        return Err(Error::Parameter(format!(
            "epsilon = {epsilon} and delta = {delta} must both be positive"
        )));
    }
    Ok(InterpParameter {
        base: w.clone(),
        epsilon,
        delta,
    })
}

impl InterpParameter {
    pub fn base(&self) -> &SlowVaryWeight {
        &self.base
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Power exponent `ε/(ε+δ)`.
    pub fn theta(&self) -> f64 {
        self.epsilon / (self.epsilon + self.delta)
    }

    /// `ln ψ(t)` from `ln t`; valid for arbitrarily large `t`.
    pub fn ln_value_at_ln(&self, ln_t: f64) -> f64 {
        if ln_t < 0.0 {
            self.base.ln_value_at_ln(0.0)
        } else {
            self.theta() * ln_t + self.base.ln_value_at_ln(ln_t / (self.epsilon + self.delta))
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("interpolation parameter evaluated at t = {t} ≤ 0")));
        }
        Ok(self.ln_value_at_ln(t.ln()).exp())
    }
}

impl ParameterFunction for InterpParameter {
    fn value(&self, t: f64) -> f64 {
        self.ln_value_at_ln(t.ln()).exp()
    }
}

/// Result of a numeric convergence classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

/// Settings for the tail-integral classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Upper cutoff `T_max` of the directly integrated range.
    pub t_max: f64,
    /// Relative tolerance for adaptive Simpson.
    pub tolerance: f64,
    pub max_depth: u32,
    /// Dead band around the critical exponent 1 in which a level is
    /// considered ambiguous.
    pub margin: f64,
    /// Geometric sub-intervals of the last decade used for the fit.
    pub fit_intervals: usize,
    /// Depth of the log-scale hierarchy tried before giving up.
    pub max_levels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            t_max: 1e12,
            tolerance: 1e-11,
            max_depth: 40,
            margin: 1e-3,
            fit_intervals: 8,
            max_levels: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub verdict: Verdict,
    /// `(T, ∫₁^T dt/(t φ^p(t)))` at decade checkpoints.
    pub partial_integrals: Vec<(f64, f64)>,
    /// Fitted tail exponent per log level, in the order they were tried.
    pub level_exponents: Vec<f64>,
    pub quadrature_converged: bool,
}

/// Adaptive Simpson quadrature; the flag reports whether every panel met the
/// tolerance before the depth limit.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> (f64, bool) {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> (f64, bool) {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        // the second clause stops refinement once panels agree to roundoff
        if delta.abs() <= 15.0 * tol || delta.abs() <= 64.0 * f64::EPSILON * (left + right).abs() {
            return (left + right + delta / 15.0, true);
        }
        if depth == 0 {
            return (left + right + delta / 15.0, false);
        }
        let (l, lok) = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
        let (r, rok) = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
        (l + r, lok && rok)
    }
    if a == b {
        return (0.0, true);
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    recurse(f, a, b, fa, fm, fb, whole, tol * scale, max_depth)
}

/// `log_level(u)`: `u` itself for level 0, `ln u` for level 1, and so on.
fn nested_log(u: f64, level: usize) -> f64 {
    (0..level).fold(u, |acc, _| acc.ln())
}

fn nested_exp(v: f64, level: usize) -> f64 {
    (0..level).fold(v, |acc, _| acc.exp())
}

/// Classifier for `∫₁^∞ dt / (t·exp(p·lnφ(t)))` where `ln_phi_at_ln` maps
/// `ln t` to `ln φ(t)`; used for the weights themselves and for derived
/// functions such as the companion weight.
pub(crate) struct TailClassifier<'a> {
    pub ln_phi_at_ln: &'a dyn Fn(f64) -> f64,
    pub power: f64,
    pub breakpoints: Vec<f64>,
}

/// Output of fitting the last decade.
pub(crate) struct TailFit {
    pub verdict: Verdict,
    pub level_exponents: Vec<f64>,
    pub ok: bool,
    /// Level at which the decision was made and its exponent.
    pub decided: Option<(usize, f64)>,
}

impl TailClassifier<'_> {
    fn integrand(&self, u: f64) -> f64 {
        (-self.power * (self.ln_phi_at_ln)(u)).exp()
    }

    fn integrate(&self, a: f64, b: f64, cfg: &QuadratureConfig) -> (f64, bool) {
        let f = |u: f64| self.integrand(u);
        let mut cuts = vec![a];
        cuts.extend(self.breakpoints.iter().copied().filter(|&p| p > a && p < b));
        cuts.push(b);
        let mut total = 0.0;
        let mut ok = true;
        for w in cuts.windows(2) {
            let (v, good) = adaptive_simpson(&f, w[0], w[1], cfg.tolerance, cfg.max_depth);
            total += v;
            ok &= good;
        }
        (total, ok)
    }

    pub fn partial_integrals(&self, cfg: &QuadratureConfig) -> (Vec<(f64, f64)>, bool) {
        let u_max = cfg.t_max.ln();
        let mut checkpoints: Vec<f64> = Vec::new();
        let mut d = 1;
        while (10f64).powi(d).ln() < u_max {
            checkpoints.push((10f64).powi(d).ln());
            d += 1;
        }
        checkpoints.push(u_max);
        let mut acc = 0.0;
        let mut lo = 0.0;
        let mut ok = true;
        let mut trace = Vec::with_capacity(checkpoints.len());
        for u in checkpoints {
            let (v, good) = self.integrate(lo, u, cfg);
            acc += v;
            ok &= good;
            trace.push((u.exp(), acc));
            lo = u;
        }
        (trace, ok)
    }

    /// Fits local exponents of the increments over the last decade on the
    /// log-scale hierarchy `u, ln u, ln ln u, …`.
    pub fn fit(&self, cfg: &QuadratureConfig) -> TailFit {
        let u_b = cfg.t_max.ln();
        let u_a = (cfg.t_max / 10.0).ln();
        let mut level_exponents = Vec::new();
        let mut ok = true;
        for level in 0..cfg.max_levels {
            let v_a = nested_log(u_a, level);
            let v_b = nested_log(u_b, level);
            if !(v_a > 0.0) || !(v_b > v_a) {
                break;
            }
            let n = cfg.fit_intervals.max(2);
            let vs: Vec<f64> = (0..=n)
                .map(|i| v_a * (v_b / v_a).powf(i as f64 / n as f64))
                .collect();
            let us: Vec<f64> = vs.iter().map(|&v| nested_exp(v, level)).collect();
            let mut xs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for i in 0..n {
                let (inc, good) = self.integrate(us[i], us[i + 1], cfg);
                ok &= good;
                if !(inc > 0.0) {
                    ok = false;
                    break;
                }
                xs.push((0.5 * (vs[i].ln() + vs[i + 1].ln())).max(f64::MIN_POSITIVE));
                ys.push(inc.ln());
            }
            if xs.len() < 2 {
                break;
            }
            let slope = least_squares_slope(&xs, &ys);
            let exponent = 1.0 - slope;
            level_exponents.push(exponent);
            if !ok {
                break;
            }
            if exponent > 1.0 + cfg.margin {
                return TailFit {
                    verdict: Verdict::Convergent,
                    level_exponents,
                    ok,
                    decided: Some((level, exponent)),
                };
            }
            if exponent < 1.0 - cfg.margin {
                return TailFit {
                    verdict: Verdict::Divergent,
                    level_exponents,
                    ok,
                    decided: Some((level, exponent)),
                };
            }
        }
        TailFit {
            verdict: Verdict::Inconclusive,
            level_exponents,
            ok,
            decided: None,
        }
    }

    pub fn classify(&self, cfg: &QuadratureConfig) -> CriterionReport {
        let (partial_integrals, trace_ok) = self.partial_integrals(cfg);
        let fit = self.fit(cfg);
        let quadrature_converged = trace_ok && fit.ok;
        let verdict = if quadrature_converged {
            fit.verdict
        } else {
            Verdict::Inconclusive
        };
        CriterionReport {
            verdict,
            partial_integrals,
            level_exponents: fit.level_exponents,
            quadrature_converged,
        }
    }

    /// Extrapolated `∫_u^∞` from the fitted tail model at level `level`
    /// with exponent `p > 1`.
    pub fn tail_from(&self, u: f64, level: usize, exponent: f64) -> f64 {
        let jacobian: f64 = (0..level).map(|i| nested_log(u, i)).product();
        self.integrand(u) * jacobian * nested_log(u, level) / (exponent - 1.0)
    }
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn weight_breakpoints(w: &SlowVaryWeight) -> Vec<f64> {
    vec![w.splice_point().ln()]
}

/// Numeric classification of `∫₁^∞ dt/(t φ²(t))`, the condition under which
/// `H^{q+n/2,φ}` embeds into `C^q`.
pub fn embedding_criterion(w: &SlowVaryWeight, cfg: &QuadratureConfig) -> CriterionReport {
    let f = |u: f64| w.ln_value_at_ln(u);
    TailClassifier {
        ln_phi_at_ln: &f,
        power: 2.0,
        breakpoints: weight_breakpoints(w),
    }
    .classify(cfg)
}

/// Which tail integral defines the companion weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompanionVariant {
    /// `∫_t^∞ dτ/(τ φ(τ))`.
    SingleDenominator,
    /// `∫_t^∞ dτ/(τ φ²(τ))`, matching the embedding criterion.
    SquaredDenominator,
}

impl CompanionVariant {
    pub fn power(self) -> f64 {
        match self {
            CompanionVariant::SingleDenominator => 1.0,
            CompanionVariant::SquaredDenominator => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CompanionVariant::SingleDenominator => "single-denominator",
            CompanionVariant::SquaredDenominator => "squared-denominator",
        }
    }
}

const COMPANION_CELLS: usize = 2048;

/// `φ₀(t) = φ(t)·(∫_t^∞ dτ/(τ φ^p(τ)))^{1/2}`, with the tail beyond `T_max`
/// taken from the fitted power model.
#[derive(Debug, Clone)]
pub struct CompanionWeight {
    base: SlowVaryWeight,
    variant: CompanionVariant,
    cfg: QuadratureConfig,
    u_max: f64,
    tail_level: usize,
    tail_exponent: f64,
    /// `∫_{u_i}^{u_max}` at the cell edges `u_i = i·u_max/COMPANION_CELLS`.
    cumulative: Vec<f64>,
}

impl CompanionWeight {
    pub fn variant(&self) -> CompanionVariant {
        self.variant
    }

    pub fn tail_exponent(&self) -> f64 {
        self.tail_exponent
    }

    fn classifier<'a>(&'a self, f: &'a dyn Fn(f64) -> f64) -> TailClassifier<'a> {
        TailClassifier {
            ln_phi_at_ln: f,
            power: self.variant.power(),
            breakpoints: weight_breakpoints(&self.base),
        }
    }

    /// `∫_{ln t}^∞ dτ/(τ φ^p)` as a function of `u = ln t`.
    pub fn tail_integral_at_ln(&self, u: f64) -> f64 {
        let f = |x: f64| self.base.ln_value_at_ln(x);
        let c = self.classifier(&f);
        let beyond = c.tail_from(self.u_max, self.tail_level, self.tail_exponent);
        if u >= self.u_max {
            return c.tail_from(u, self.tail_level, self.tail_exponent);
        }
        let u = u.max(0.0);
        let h = self.u_max / COMPANION_CELLS as f64;
        let cell = ((u / h).floor() as usize).min(COMPANION_CELLS - 1);
        let edge = (cell + 1) as f64 * h;
        let g = |x: f64| (-self.variant.power() * self.base.ln_value_at_ln(x)).exp();
        let (partial, _) = adaptive_simpson(&g, u, edge, self.cfg.tolerance, self.cfg.max_depth);
        partial + self.cumulative[cell + 1] + beyond
    }

    pub fn ln_value_at_ln(&self, u: f64) -> f64 {
        self.base.ln_value_at_ln(u) + 0.5 * self.tail_integral_at_ln(u).ln()
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 1.0) {
            return Err(Error::Domain(format!("companion weight evaluated at t = {t} < 1")));
        }
        Ok(self.ln_value_at_ln(t.ln()).exp())
    }
}

/// Numeric evidence about the companion weight.
#[derive(Debug, Clone, Serialize)]
pub struct CompanionReport {
    pub variant: CompanionVariant,
    pub tail_exponent: f64,
    /// `(t, φ₀(t)/φ(t))` on a geometric grid.
    pub ratio_profile: Vec<(f64, f64)>,
    pub ratio_decreasing: bool,
    /// Classification of `∫ dt/(t φ₀)`.
    pub single_denominator_tail: Verdict,
    /// Classification of `∫ dt/(t φ₀²)`.
    pub criterion_for_companion: Verdict,
}

pub fn companion_weight(
    w: &SlowVaryWeight,
    variant: CompanionVariant,
    cfg: &QuadratureConfig,
) -> Result<(CompanionWeight, CompanionReport)> {
    let f = |u: f64| w.ln_value_at_ln(u);
    let classifier = TailClassifier {
        ln_phi_at_ln: &f,
        power: variant.power(),
        breakpoints: weight_breakpoints(w),
    };
    let fit = classifier.fit(cfg);
    let (tail_level, tail_exponent) = match (fit.verdict, fit.decided, fit.ok) {
        (Verdict::Convergent, Some(d), true) => d,
        _ => {
            return Err(Error::DivergentTail {
                variant: variant.name().to_string(),
            })
        }
    };
    let u_max = cfg.t_max.ln();
    let h = u_max / COMPANION_CELLS as f64;
    let g = |x: f64| (-variant.power() * w.ln_value_at_ln(x)).exp();
    let mut cumulative = vec![0.0; COMPANION_CELLS + 1];
    for i in (0..COMPANION_CELLS).rev() {
        let (v, _) = adaptive_simpson(&g, i as f64 * h, (i + 1) as f64 * h, cfg.tolerance, cfg.max_depth);
        cumulative[i] = cumulative[i + 1] + v;
    }
    let companion = CompanionWeight {
        base: w.clone(),
        variant,
        cfg: cfg.clone(),
        u_max,
        tail_level,
        tail_exponent,
        cumulative,
    };

    let ratio_profile: Vec<(f64, f64)> = (1..=24)
        .map(|d| {
            let u = (10f64).ln() * d as f64;
            (u.exp(), (companion.ln_value_at_ln(u) - w.ln_value_at_ln(u)).exp())
        })
        .filter(|&(t, _)| t >= w.splice_point())
        .collect();
    let ratio_decreasing = ratio_profile.windows(2).all(|p| p[1].1 <= p[0].1 * (1.0 + 1e-12));

    let companion_ln = |u: f64| companion.ln_value_at_ln(u);
    let classify_power = |power: f64| {
        TailClassifier {
            ln_phi_at_ln: &companion_ln,
            power,
            breakpoints: weight_breakpoints(w),
        }
        .fit(cfg)
        .verdict
    };
    let report = CompanionReport {
        variant,
        tail_exponent,
        ratio_profile,
        ratio_decreasing,
        single_denominator_tail: classify_power(1.0),
        criterion_for_companion: classify_power(2.0),
    };
    Ok((companion, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct PseudoconcavityReport {
    pub pass: bool,
    /// A pair `(t₁, t₂)` with `t₁ < t₂` where `ψ` decreased.
    pub monotonicity_witness: Option<(f64, f64)>,
    /// A pair `(t₁, t₂)` with `t₁ < t₂` where `ψ(t)/t` increased.
    pub ratio_witness: Option<(f64, f64)>,
}

/// Sufficient-condition heuristic for pseudoconcavity near infinity: `ψ`
/// nondecreasing and `ψ(t)/t` nonincreasing on the grid, up to `tolerance`.
pub fn check_pseudoconcavity<P: ParameterFunction + ?Sized>(
    psi: &P,
    t_grid: &[f64],
    tolerance: f64,
) -> PseudoconcavityReport {
    let mut monotonicity_witness = None;
    let mut ratio_witness = None;
    for pair in t_grid.windows(2) {
        let (t1, t2) = (pair[0], pair[1]);
        let (p1, p2) = (psi.value(t1), psi.value(t2));
        if monotonicity_witness.is_none() && p2 < p1 * (1.0 - tolerance) {
            monotonicity_witness = Some((t1, t2));
        }
        if ratio_witness.is_none() && p2 / t2 > (p1 / t1) * (1.0 + tolerance) {
            ratio_witness = Some((t1, t2));
        }
    }
    PseudoconcavityReport {
        pass: monotonicity_witness.is_none() && ratio_witness.is_none(),
        monotonicity_witness,
        ratio_witness,
    }
}

/// Geometric grid `start·ratio^i` up to and including `stop`.
pub fn geometric_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    let ratio = (stop / start).powf(1.0 / (points.max(2) - 1) as f64);
    (0..points.max(2)).map(|i| start * ratio.powi(i as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn splice_points_follow_the_tower() {
        assert_eq!(tower_splice_point(0), 1.0);
        assert!((tower_splice_point(1) - E).abs() < 1e-15);
        assert!((tower_splice_point(2) - E.powf(E)).abs() < 1e-12);
    }

    #[test]
    fn empty_family_is_one() {
        let w = SlowVaryWeight::constant();
        for t in [1.0, 2.5, 1e9, 1e300] {
            assert_eq!(w.eval(t).unwrap(), 1.0);
        }
    }

    #[test]
    fn single_log_at_e_squared() {
        let w = SlowVaryWeight::log_power(1.0);
        assert!((w.eval(E * E).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn log_loglog_at_tower() {
        let w = SlowVaryWeight::iterated_log(vec![1.0, 1.0]).unwrap();
        // ln t = e², ln ln t = 2
        let value = w.ln_value_at_ln(E * E).exp();
        assert!((value - 2.0 * E * E).abs() < 1e-12, "{value}");
        assert!((value - 14.778).abs() < 1e-3);
    }

    #[test]
    fn continuous_at_splice_point() {
        let w = SlowVaryWeight::iterated_log(vec![0.7, -1.3]).unwrap();
        let t0 = w.splice_point();
        let below = w.eval(t0 * (1.0 - 1e-12)).unwrap();
        let above = w.eval(t0 * (1.0 + 1e-12)).unwrap();
        assert!((below - above).abs() < 1e-9);
    }

    #[test]
    fn domain_error_below_one() {
        assert!(matches!(SlowVaryWeight::log_power(1.0).eval(0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn splice_point_below_tower_is_rejected() {
        assert!(SlowVaryWeight::with_splice_point(vec![1.0], 2.0).is_err());
        assert!(SlowVaryWeight::with_splice_point(vec![1.0], 10.0).is_ok());
    }

    #[test]
    fn serialized_record_round_trip() {
        let w = SlowVaryWeight::iterated_log(vec![1.0, -0.5]).unwrap();
        let text = serde_json::to_string(&w).unwrap();
        assert!(text.contains("exponents") && text.contains("splice_point"));
        let back: SlowVaryWeight = serde_json::from_str(&text).unwrap();
        assert_eq!(back, w);
        let parsed: SlowVaryWeight = serde_json::from_str(r#"{"exponents":[2.0]}"#).unwrap();
        assert_eq!(parsed, SlowVaryWeight::log_power(2.0));
    }

    #[test]
    fn slow_variation_examples() {
        let grid = [1e3, 1e6, 1e9];
        let flat = check_slow_variation(&SlowVaryWeight::constant(), &[0.5, 2.0, 10.0], &grid).unwrap();
        assert_eq!(flat.max_deviation, 0.0);

        let log = SlowVaryWeight::log_power(1.0);
        let report = check_slow_variation(&log, &[2.0], &[1e6]).unwrap();
        let oracle = ((2e6f64).ln() / (1e6f64).ln() - 1.0).abs();
        assert!((report.max_deviation - oracle).abs() < 1e-14);
        assert!((report.max_deviation - 0.0502).abs() < 1e-4);

        let inv = SlowVaryWeight::log_power(-1.0);
        let report = check_slow_variation(&inv, &[10.0], &[1e8]).unwrap();
        assert!((report.max_deviation - 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn slow_variation_rejects_bad_grids() {
        let log = SlowVaryWeight::log_power(1.0);
        assert!(check_slow_variation(&log, &[2.0], &[1e6, 1e3]).is_err());
        assert!(check_slow_variation(&log, &[2.0], &[1.5, 1e3]).is_err());
        assert!(check_slow_variation(&log, &[-1.0], &[1e3]).is_err());
    }

    #[test]
    fn interp_parameter_branches() {
        let flat = build_interp_parameter(&SlowVaryWeight::constant(), 1.0, 1.0).unwrap();
        for t in [1.0, 4.0, 1e6] {
            assert!((flat.eval(t).unwrap() - t.sqrt()).abs() <= 1e-15 * t.sqrt());
        }
        assert_eq!(flat.eval(0.3).unwrap(), 1.0);

        let w = SlowVaryWeight::log_power(1.0).scaled(3.0).unwrap();
        let psi = build_interp_parameter(&w, 0.4, 2.0).unwrap();
        for t in [0.01, 0.5, 0.999] {
            assert!((psi.eval(t).unwrap() - w.eval(1.0).unwrap()).abs() < 1e-15);
        }

        let log = SlowVaryWeight::log_power(1.0);
        let psi = build_interp_parameter(&log, 1.0, 1.0).unwrap();
        let t = E.powi(4);
        assert!((psi.eval(t).unwrap() - 2.0 * E * E).abs() < 1e-12);
        // continuity at t = 1
        assert!((psi.eval(1.0 + 1e-12).unwrap() - psi.eval(1.0 - 1e-12).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn interp_parameter_rejects_nonpositive() {
        let w = SlowVaryWeight::constant();
        assert!(matches!(build_interp_parameter(&w, 0.0, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(build_interp_parameter(&w, 1.0, -2.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn interp_parameter_survives_huge_arguments() {
        let psi = build_interp_parameter(&SlowVaryWeight::log_power(1.0), 1.0, 1.0).unwrap();
        // t = 10^600 is out of f64 range; work with ln t directly
        let ln_t = 600.0 * 10f64.ln();
        let expected = 0.5 * ln_t + (0.5 * ln_t).ln();
        assert!((psi.ln_value_at_ln(ln_t) - expected).abs() < 1e-12);
    }

    #[test]
    fn criterion_constant_weight_diverges() {
        let report = embedding_criterion(&SlowVaryWeight::constant(), &QuadratureConfig::default());
        assert_eq!(report.verdict, Verdict::Divergent);
        // ∫₁^T dt/t = ln T
        for &(t, v) in &report.partial_integrals {
            assert!((v - t.ln()).abs() < 1e-8 * t.ln(), "{t} {v}");
        }
    }

    #[test]
    fn criterion_log_converges_with_known_antiderivative() {
        let report = embedding_criterion(&SlowVaryWeight::log_power(1.0), &QuadratureConfig::default());
        assert_eq!(report.verdict, Verdict::Convergent);
        // φ = 1 on [1, e], then ∫_e^T dt/(t log² t) = 1 − 1/log T
        for &(t, v) in &report.partial_integrals {
            let oracle = 2.0 - 1.0 / t.ln();
            assert!((v - oracle).abs() < 1e-9, "{t}: {v} vs {oracle}");
        }
    }

    #[test]
    fn criterion_half_log_diverges_like_loglog() {
        let report = embedding_criterion(&SlowVaryWeight::log_power(0.5), &QuadratureConfig::default());
        assert_eq!(report.verdict, Verdict::Divergent);
        for &(t, v) in &report.partial_integrals {
            let oracle = 1.0 + t.ln().ln();
            assert!((v - oracle).abs() < 1e-9, "{t}: {v} vs {oracle}");
        }
        assert_eq!(report.level_exponents.len(), 2);
        assert!((report.level_exponents[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn criterion_bertrand_second_level() {
        // (log t)^{1/2} (log log t)^{1}: ∫ du/(u (ln u)²) converges
        let w = SlowVaryWeight::iterated_log(vec![0.5, 1.0]).unwrap();
        let report = embedding_criterion(&w, &QuadratureConfig::default());
        assert_eq!(report.verdict, Verdict::Convergent, "{:?}", report.level_exponents);
    }

    #[test]
    fn reciprocal_examples() {
        let c = SlowVaryWeight::constant().reciprocal();
        assert_eq!(c.exponents(), &[] as &[f64]);
        assert_eq!(c.eval(123.0).unwrap(), 1.0);

        let log = SlowVaryWeight::log_power(1.0);
        let inv = log.reciprocal();
        assert_eq!(inv.exponents(), &[-1.0]);
        assert!((inv.eval(1e3).unwrap() * log.eval(1e3).unwrap() - 1.0).abs() < 1e-14);

        let w = SlowVaryWeight::iterated_log(vec![2.0, -1.0]).unwrap();
        assert_eq!(w.reciprocal().exponents(), &[-2.0, 1.0]);
        assert_eq!(w.reciprocal().splice_point(), w.splice_point());
    }

    #[test]
    fn companion_single_denominator_for_log_squared() {
        let w = SlowVaryWeight::log_power(2.0);
        let cfg = QuadratureConfig::default();
        let (phi0, report) = companion_weight(&w, CompanionVariant::SingleDenominator, &cfg).unwrap();
        // tail ∫_t^∞ dτ/(τ log² τ) = 1/log t, so φ₀ = (log t)^{3/2}
        for t in [1e2f64, 1e6, 1e11, 1e20, 1e40] {
            let expected = t.ln().powf(1.5);
            let got = phi0.eval(t).unwrap();
            assert!((got / expected - 1.0).abs() < 1e-7, "{t}: {got} vs {expected}");
        }
        let ratio = phi0.eval(1e6).unwrap() / w.eval(1e6).unwrap();
        assert!((ratio - (1e6f64).ln().powf(-0.5)).abs() < 1e-8);
        assert!((ratio - 0.269).abs() < 1e-3);
        assert!(report.ratio_decreasing);
        assert_eq!(report.single_denominator_tail, Verdict::Convergent);
    }

    #[test]
    fn companion_squared_denominator_flags_the_discrepancy() {
        let w = SlowVaryWeight::log_power(2.0);
        let (_, report) =
            companion_weight(&w, CompanionVariant::SquaredDenominator, &QuadratureConfig::default()).unwrap();
        // φ₀ = (log t)^{1/2}/√3: ∫ dt/(t φ₀²) diverges, so the criterion
        // does not transfer to φ₀ with the square-root exponent
        assert_eq!(report.criterion_for_companion, Verdict::Divergent);
        assert!(report.ratio_decreasing);
    }

    #[test]
    fn companion_divergent_tail_is_an_error() {
        let w = SlowVaryWeight::log_power(0.5);
        match companion_weight(&w, CompanionVariant::SquaredDenominator, &QuadratureConfig::default()) {
            Err(Error::DivergentTail { variant }) => assert_eq!(variant, "squared-denominator"),
            other => panic!("expected divergent tail, got {other:?}"),
        }
    }

    #[test]
    fn pseudoconcavity_examples() {
        let grid = geometric_grid(10.0, 1e12, 45);
        assert!(check_pseudoconcavity(&PowerParameter(0.5), &grid, 1e-12).pass);
        let psi = build_interp_parameter(&SlowVaryWeight::log_power(1.0), 1.0, 1.0).unwrap();
        assert!(check_pseudoconcavity(&psi, &grid, 1e-12).pass);
        let convex = check_pseudoconcavity(&|t: f64| t * t, &grid, 1e-12);
        assert!(!convex.pass);
        let (t1, t2) = convex.ratio_witness.unwrap();
        assert!(t1 < t2 && t2 * t2 / t2 > t1 * t1 / t1);
    }

    mod properties {
        use super::super::*;
        use proptest::prelude::*;

        /// Closed-form `φ(λt)/φ(t)` for the iterated-log family, from `ln t`.
        fn oracle_ratio(r: &[f64], ln_t: f64, lambda: f64) -> f64 {
            let mut a = ln_t;
            let mut b = ln_t + lambda.ln();
            let mut ratio = 1.0;
            for &ri in r {
                ratio *= (b / a).powf(ri);
                a = a.ln();
                b = b.ln();
            }
            ratio
        }

        fn family() -> impl Strategy<Value = Vec<f64>> {
            (0.5..2.0f64, prop::bool::ANY, proptest::collection::vec(-0.25..0.25f64, 0..3)).prop_map(|(lead, neg, rest)| {
                let lead = if neg { -lead } else { lead };
                std::iter::once(lead).chain(rest.into_iter().map(|x| x * lead.abs())).collect()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn slow_variation_decays_along_the_tail(r in family()) {
                let w = SlowVaryWeight::iterated_log(r.clone()).unwrap();
                let grid = geometric_grid(1e20, 1e300, 60);
                for lambda in [0.5, 2.0, 10.0] {
                    let report = check_slow_variation(&w, &[lambda], &grid).unwrap();
                    let devs: Vec<f64> = report.profile.iter().map(|p| p.deviation).collect();
                    for (p, &t) in report.profile.iter().zip(&grid) {
                        let oracle = (oracle_ratio(&r, t.ln(), lambda) - 1.0).abs();
                        prop_assert!((p.deviation - oracle).abs() <= 1e-13);
                    }
                    prop_assert!(devs.windows(2).all(|d| d[1] <= d[0] * (1.0 + 1e-12)));
                    // first ln t where the closed form drops below 0.05
                    let (mut lo, mut hi) = (grid[0].ln(), 1e6f64);
                    if (oracle_ratio(&r, lo, lambda) - 1.0).abs() < 0.05 {
                        hi = lo;
                    }
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if (oracle_ratio(&r, mid, lambda) - 1.0).abs() < 0.05 { hi = mid } else { lo = mid }
                    }
                    for (p, &t) in report.profile.iter().zip(&grid) {
                        if t.ln() > hi {
                            prop_assert!(p.deviation < 0.05);
                        }
                    }
                }
            }

            #[test]
            fn reciprocal_is_an_involution(r in proptest::collection::vec(-3.0..3.0f64, 0..4), scale in 0.1..10.0f64) {
                let w = SlowVaryWeight::iterated_log(r).unwrap().scaled(scale).unwrap();
                let back = w.reciprocal().reciprocal();
                prop_assert_eq!(back.exponents(), w.exponents());
                prop_assert_eq!(back.splice_point(), w.splice_point());
                prop_assert!((back.scale() - w.scale()).abs() <= 1e-15 * w.scale());
                let t = 1e5;
                prop_assert!((w.eval(t).unwrap() * w.reciprocal().eval(t).unwrap() - 1.0).abs() < 1e-14);
            }

            #[test]
            fn constant_base_gives_pure_power(eps in 0.05..3.0f64, delta in 0.05..3.0f64, ln_t in 0.0..600.0f64) {
                let psi = build_interp_parameter(&SlowVaryWeight::constant(), eps, delta).unwrap();
                let theta = eps / (eps + delta);
                prop_assert!((psi.ln_value_at_ln(ln_t) - theta * ln_t).abs() <= 1e-15 * ln_t.max(1.0));
            }

            #[test]
            fn criterion_matches_the_single_log_rule(r in -1.5..2.5f64) {
                prop_assume!((r - 0.5).abs() > 0.01 && (r + 0.25).abs() > 0.01);
                let cfg = QuadratureConfig::default();
                let direct = embedding_criterion(&SlowVaryWeight::log_power(r), &cfg).verdict;
                prop_assert_eq!(direct == Verdict::Convergent, r > 0.5);
                prop_assert_ne!(direct, Verdict::Inconclusive);
                let doubled = SlowVaryWeight::log_power(r).reciprocal();
                let doubled = SlowVaryWeight::iterated_log(doubled.exponents().iter().map(|x| 2.0 * x).collect()).unwrap();
                let other = embedding_criterion(&doubled, &cfg).verdict;
                prop_assert_eq!(other == Verdict::Convergent, -2.0 * r > 0.5);
                prop_assert_ne!(other, Verdict::Inconclusive);
            }
        }
    }
}
