//! Interpolation with a function parameter between finite-dimensional
//! Hilbert couples.
//!
//! A couple is a pair of Gram forms `G₀, G₁` on `ℂ^d`. Writing `G₀ = LL*`,
//! the generating operator `J` has the eigen-decomposition of
//! `C = L⁻¹G₁L⁻*`, with `J`-eigenvalues `μ = √λ(C)`. The interpolated form
//! for a parameter `ψ` is `G_ψ = L Q diag(ψ(μ)²) Q* L*`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::spectral::FrequencyLattice;
use crate::weights::{ParameterFunction, SlowVaryWeight};
use crate::Complex64;

/// Largest tolerated Hermitian defect of an input form.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Largest tolerated condition number of an input form.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Two inner products on one finite-dimensional space.
#[derive(Debug, Clone)]
pub struct HilbertPair {
    gram0: CMat,
    gram1: CMat,
    min_generalized_eigenvalue: f64,
}

fn check_form(name: &str, g: &CMat) -> Result<()> {
    if g.nrows() != g.ncols() {
        return Err(Error::Shape(format!("{name} is {}x{}, not square", g.nrows(), g.ncols())));
    }
    let defect = linalg::hermitian_defect(g);
    if defect > HERMITIAN_TOLERANCE {
        return Err(Error::Parameter(format!("{name} is not Hermitian (defect {defect:e})")));
    }
    let (values, _) = linalg::hermitian_eigen(g);
    let (lo, hi) = (values[0], values[values.len() - 1]);
    if !(lo > 0.0) {
        return Err(Error::Decomposition {
            reason: format!("{name} is not positive definite"),
            eigenvalue: lo,
        });
    }
    if hi / lo > CONDITION_LIMIT {
        return Err(Error::Conditioning {
            condition: hi / lo,
            limit: CONDITION_LIMIT,
        });
    }
    Ok(())
}

impl HilbertPair {
    pub fn new(gram0: CMat, gram1: CMat) -> Result<Self> {
        check_form("gram0", &gram0)?;
        check_form("gram1", &gram1)?;
        if gram0.shape() != gram1.shape() {
            return Err(Error::Shape(format!(
                "forms of sizes {} and {}",
                gram0.nrows(),
                gram1.nrows()
            )));
        }
        let gram0 = linalg::symmetrize(&gram0);
        let gram1 = linalg::symmetrize(&gram1);
        let mut pair = Self {
            gram0,
            gram1,
            min_generalized_eigenvalue: 0.0,
        };
        let j = generating_operator(&pair)?;
        pair.min_generalized_eigenvalue = j.mu[0] * j.mu[0];
        Ok(pair)
    }

    /// Diagonal couple from squared-norm weights.
    pub fn diagonal(w0: &[f64], w1: &[f64]) -> Result<Self> {
        if w0.len() != w1.len() {
            return Err(Error::Shape(format!("{} and {} weights", w0.len(), w1.len())));
        }
        let d = |w: &[f64]| CMat::from_diagonal(&nalgebra::DVector::from_iterator(w.len(), w.iter().map(|&x| Complex64::new(x, 0.0))));
        Self::new(d(w0), d(w1))
    }

    /// The Sobolev couple `[H^{s−ε}, H^{s+δ}]` on a lattice, in coefficient
    /// coordinates.
    pub fn sobolev(lattice: &FrequencyLattice, s: f64, eps: f64, delta: f64) -> Result<Self> {
        let one = SlowVaryWeight::constant();
        let c = lattice.quadrature_constant();
        let sq = |p: Vec<f64>| p.into_iter().map(|x| c * x * x).collect::<Vec<_>>();
        Self::diagonal(&sq(lattice.weight_profile(s - eps, &one)), &sq(lattice.weight_profile(s + delta, &one)))
    }

    pub fn dim(&self) -> usize {
        self.gram0.nrows()
    }

    pub fn gram0(&self) -> &CMat {
        &self.gram0
    }

    pub fn gram1(&self) -> &CMat {
        &self.gram1
    }

    /// Best `c²` in `‖u‖²_{X₁} ≥ c²‖u‖²_{X₀}`.
    pub fn min_generalized_eigenvalue(&self) -> f64 {
        self.min_generalized_eigenvalue
    }

    /// The dual couple `[X₁′, X₀′]`, whose forms are the inverses.
    pub fn dual(&self) -> Result<Self> {
        Self::new(linalg::inverse(&self.gram1)?, linalg::inverse(&self.gram0)?)
    }
}

/// Generating operator of a couple in the `X₀`-orthonormal eigenbasis.
#[derive(Debug, Clone)]
pub struct GeneratingOperator {
    /// Cholesky factor of `gram0`.
    l: CMat,
    /// Unitary eigenvectors of `L⁻¹G₁L⁻*`.
    q: CMat,
    /// Eigenvalues of `J`, ascending.
    pub mu: Vec<f64>,
    /// Relative residual of reassembling `gram1`.
    pub reconstruction_residual: f64,
}

impl GeneratingOperator {
    /// `X₀`-orthonormal eigenbasis `L⁻*Q` (columns).
    pub fn basis(&self) -> Result<CMat> {
        Ok(linalg::lower_inverse(&self.l)?.adjoint() * &self.q)
    }

    /// Form with eigen-action `f(μ_i)` in the eigenbasis.
    fn assemble(&self, f: impl Fn(f64) -> f64) -> CMat {
        let lq = &self.l * &self.q;
        let mut scaled = lq.clone();
        for (j, &m) in self.mu.iter().enumerate() {
            let v = f(m);
            scaled.column_mut(j).scale_mut(v);
        }
        linalg::symmetrize(&(scaled * lq.adjoint()))
    }

    /// Coordinates `c` of `u` in the eigenbasis: `c = Q* L* u`.
    pub fn coordinates(&self, u: &nalgebra::DVector<Complex64>) -> nalgebra::DVector<Complex64> {
        self.q.adjoint() * (self.l.adjoint() * u)
    }
}

pub fn generating_operator(pair: &HilbertPair) -> Result<GeneratingOperator> {
    let l = linalg::cholesky(&pair.gram0)?;
    let l_inv = linalg::lower_inverse(&l)?;
    let c = &l_inv * &pair.gram1 * l_inv.adjoint();
    let (lambda, q) = linalg::hermitian_eigen(&c);
    if let Some(&bad) = lambda.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Decomposition {
            reason: "generalized eigenvalue of gram1 against gram0 is not positive".into(),
            eigenvalue: bad,
        });
    }
    let mu: Vec<f64> = lambda.iter().map(|x| x.sqrt()).collect();
    let mut j = GeneratingOperator {
        l,
        q,
        mu,
        reconstruction_residual: 0.0,
    };
    let rebuilt = j.assemble(|m| m * m);
    let residual = linalg::max_abs(&(rebuilt - &pair.gram1)) / linalg::max_abs(&pair.gram1);
    if residual > 1e-10 {
        return Err(Error::Decomposition {
            reason: format!("generating operator reproduces gram1 only to {residual:e}"),
            eigenvalue: j.mu[0],
        });
    }
    j.reconstruction_residual = residual;
    Ok(j)
}

/// Form of `X_ψ`: `‖u‖_{X_ψ} = ‖ψ(J)u‖_{X₀}`.
pub fn interpolate<P: ParameterFunction + ?Sized>(pair: &HilbertPair, psi: &P) -> Result<CMat> {
    let j = generating_operator(pair)?;
    interpolate_with(&j, psi)
}

/// As [`interpolate`], reusing a generating operator.
pub fn interpolate_with<P: ParameterFunction + ?Sized>(j: &GeneratingOperator, psi: &P) -> Result<CMat> {
    for &m in &j.mu {
        let v = psi.value(m);
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Parameter(format!("parameter is {v} at spectrum point {m}")));
        }
    }
    Ok(j.assemble(|m| psi.value(m).powi(2)))
}

/// Operator norm of `T: (ℂ^n, G_X) → (ℂ^m, G_Y)`.
pub fn form_operator_norm(t: &CMat, gx: &CMat, gy: &CMat) -> Result<f64> {
    if t.ncols() != gx.nrows() || t.nrows() != gy.nrows() {
        return Err(Error::Shape(format!(
            "map of shape {}x{} between forms of sizes {} and {}",
            t.nrows(),
            t.ncols(),
            gx.nrows(),
            gy.nrows()
        )));
    }
    let lx = linalg::cholesky(gx)?;
    let ly = linalg::cholesky(gy)?;
    let lx_inv = linalg::lower_inverse(&lx)?;
    Ok(linalg::spectral_norm(&(ly.adjoint() * t * lx_inv.adjoint())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterpolationNorms {
    pub norm0: f64,
    pub norm1: f64,
    pub norm_psi: f64,
    /// `norm_ψ / max(norm₀, norm₁)`.
    pub ratio: f64,
    pub bound_ok: bool,
}

/// Norms of `T` on the two endpoint couples and on the interpolated spaces;
/// `bound_ok` asserts `norm_ψ ≤ constant·max(norm₀, norm₁)`.
pub fn operator_interpolation_check<P: ParameterFunction + ?Sized>(
    t: &CMat,
    pair_x: &HilbertPair,
    pair_y: &HilbertPair,
    psi: &P,
    constant: f64,
) -> Result<InterpolationNorms> {
    let norm0 = form_operator_norm(t, &pair_x.gram0, &pair_y.gram0)?;
    let norm1 = form_operator_norm(t, &pair_x.gram1, &pair_y.gram1)?;
    let gx = interpolate(pair_x, psi)?;
    let gy = interpolate(pair_y, psi)?;
    let norm_psi = form_operator_norm(t, &gx, &gy)?;
    let ratio = norm_psi / norm0.max(norm1);
    Ok(InterpolationNorms {
        norm0,
        norm1,
        norm_psi,
        ratio,
        bound_ok: ratio <= constant * (1.0 + 1e-10),
    })
}

fn block_diagonal(blocks: &[&CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), b.shape()).copy_from(b);
        at += b.nrows();
    }
    out
}

/// Largest entry of `interp(⊕ pairs) − ⊕ interp(pairs)`, relative to the
/// largest entry of the block form.
pub fn direct_sum_check<P: ParameterFunction + ?Sized>(pairs: &[HilbertPair], psi: &P) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Parameter("direct sum of no couples".into()));
    }
    let g0: Vec<&CMat> = pairs.iter().map(|p| &p.gram0).collect();
    let g1: Vec<&CMat> = pairs.iter().map(|p| &p.gram1).collect();
    let sum = HilbertPair::new(block_diagonal(&g0), block_diagonal(&g1))?;
    let whole = interpolate(&sum, psi)?;
    let parts: Vec<CMat> = pairs.iter().map(|p| interpolate(p, psi)).collect::<Result<_>>()?;
    let expected = block_diagonal(&parts.iter().collect::<Vec<_>>());
    Ok(linalg::max_abs(&(whole - &expected)) / linalg::max_abs(&expected))
}

/// `χ(t) = t/ψ(t)`.
pub struct DualParameter<'a, P: ParameterFunction + ?Sized>(pub &'a P);

impl<P: ParameterFunction + ?Sized> ParameterFunction for DualParameter<'_, P> {
    fn value(&self, t: f64) -> f64 {
        t / self.0.value(t)
    }
}

/// Compares `[X₁′, X₀′]_ψ` with the dual of `X_χ`, `χ(t) = t/ψ(t)`; returns
/// the relative form residual.
///
/// The precondition that `ψ(t)/t` stays bounded is probed on a geometric
/// grid from the top of the spectrum out to eight decades beyond it, where
/// the ratio may not grow.
pub fn dual_pair_check<P: ParameterFunction + ?Sized>(pair: &HilbertPair, psi: &P) -> Result<f64> {
    let j = generating_operator(pair)?;
    let top = j.mu[j.mu.len() - 1];
    let start = psi.value(top) / top;
    for i in 1..=64 {
        let t = top * 10f64.powf(8.0 * i as f64 / 64.0);
        let r = psi.value(t) / t;
        if !(r <= start * (1.0 + 1e-9)) {
            return Err(Error::Parameter(format!(
                "psi(t)/t grows beyond the spectrum: {r:e} at t = {t:e} vs {start:e}"
            )));
        }
    }
    let dual = pair.dual()?;
    let lhs = interpolate(&dual, psi)?;
    let chi_form = interpolate_with(&j, &DualParameter(psi))?;
    let rhs = linalg::inverse(&chi_form)?;
    Ok(linalg::max_abs(&(lhs - &rhs)) / linalg::max_abs(&rhs))
}

/// Norm-equivalence constants between the interpolated and a direct form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceConstants {
    /// `min ‖u‖_ψ / ‖u‖_direct`.
    pub c_lower: f64,
    /// `max ‖u‖_ψ / ‖u‖_direct`.
    pub c_upper: f64,
}

/// Interpolates `[G_{s−ε}, G_{s+δ}]` with `ψ` and compares the result with
/// the direct `H^{s,φ}` form through the extreme generalized eigenvalues.
pub fn interpolation_equivalence<P: ParameterFunction + ?Sized>(
    gram_lower: &CMat,
    gram_upper: &CMat,
    gram_direct: &CMat,
    psi: &P,
) -> Result<EquivalenceConstants> {
    let pair = HilbertPair::new(gram_lower.clone(), gram_upper.clone())?;
    let g_psi = interpolate(&pair, psi)?;
    let (lo, hi) = generalized_extremes(&g_psi, gram_direct)?;
    Ok(EquivalenceConstants {
        c_lower: lo.sqrt(),
        c_upper: hi.sqrt(),
    })
}

/// Smallest and largest eigenvalue of `a` against `b`.
pub fn generalized_extremes(a: &CMat, b: &CMat) -> Result<(f64, f64)> {
    if a.shape() != b.shape() {
        return Err(Error::Shape("forms of different size".into()));
    }
    let l = linalg::cholesky(b)?;
    let l_inv = linalg::lower_inverse(&l)?;
    let (values, _) = linalg::hermitian_eigen(&(&l_inv * a * l_inv.adjoint()));
    let lo = values[0];
    if !(lo > 0.0) {
        return Err(Error::Decomposition {
            reason: "interpolated form is singular against the direct form".into(),
            eigenvalue: lo,
        });
    }
    Ok((lo, values[values.len() - 1]))
}

/// Writes a form as `i,j,re,im` rows.
pub fn write_form_csv<W: Write>(g: &CMat, mut out: W) -> Result<()> {
    writeln!(out, "i,j,re,im")?;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            writeln!(out, "{i},{j},{},{}", g[(i, j)].re, g[(i, j)].im)?;
        }
    }
    Ok(())
}

/// Writes the `J` spectrum as `index,mu` rows.
pub fn write_spectrum_csv<W: Write>(j: &GeneratingOperator, mut out: W) -> Result<()> {
    writeln!(out, "index,mu")?;
    for (i, m) in j.mu.iter().enumerate() {
        writeln!(out, "{i},{m}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{hs_phi_norm, SpectralFunction};
    use crate::weights::{build_interp_parameter, PowerParameter};
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    /// `AA* + shift·I`, well conditioned for moderate shifts.
    fn random_form(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> CMat {
        let a = random_matrix(rng, n, n);
        linalg::symmetrize(&(&a * a.adjoint() + CMat::identity(n, n).scale(shift)))
    }

    fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> HilbertPair {
        let g0 = random_form(rng, n, 1.0);
        let extra = random_form(rng, n, 0.5).scale(rng.gen_range(1.0..20.0));
        HilbertPair::new(g0.clone(), g0 + extra).unwrap()
    }

    #[test]
    fn generating_operator_examples() {
        let id = HilbertPair::diagonal(&[1.0; 3], &[1.0; 3]).unwrap();
        assert!(generating_operator(&id).unwrap().mu.iter().all(|&m| (m - 1.0).abs() < 1e-15));
        let diag = HilbertPair::diagonal(&[1.0, 1.0], &[4.0, 9.0]).unwrap();
        let mu = generating_operator(&diag).unwrap().mu;
        assert!((mu[0] - 2.0).abs() < 1e-15 && (mu[1] - 3.0).abs() < 1e-15);

        let lat = FrequencyLattice::torus(1, 16).unwrap();
        let pair = HilbertPair::sobolev(&lat, 0.5, 1.0, 0.75).unwrap();
        let mut expected: Vec<f64> = lat.brackets().iter().map(|b| b.powf(1.75)).collect();
        expected.sort_by(f64::total_cmp);
        for (m, e) in generating_operator(&pair).unwrap().mu.iter().zip(&expected) {
            assert!((m / e - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn non_definite_form_reports_eigenvalue() {
        let g0 = CMat::from_diagonal(&DVector::from_vec(vec![c(1.0), c(-0.5)]));
        match HilbertPair::new(g0, CMat::identity(2, 2)) {
            Err(Error::Decomposition { eigenvalue, .. }) => assert!((eigenvalue + 0.5).abs() < 1e-14),
            other => panic!("unexpected {other:?}"),
        }
        let bad = CMat::from_diagonal(&DVector::from_vec(vec![c(1.0), c(1e-13)]));
        assert!(matches!(HilbertPair::new(bad, CMat::identity(2, 2)), Err(Error::Conditioning { .. })));
    }

    #[test]
    fn endpoints_are_reproduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pair = random_pair(&mut rng, 6);
        let g0 = interpolate(&pair, &|_t: f64| 1.0).unwrap();
        let g1 = interpolate(&pair, &|t: f64| t).unwrap();
        assert!(linalg::max_abs(&(g0 - pair.gram0())) <= 1e-12 * linalg::max_abs(pair.gram0()));
        assert!(linalg::max_abs(&(g1 - pair.gram1())) <= 1e-12 * linalg::max_abs(pair.gram1()));
        assert!(matches!(interpolate(&pair, &|_t: f64| -1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn diagonal_model_gives_the_refined_norm() {
        let lat = Arc::new(FrequencyLattice::torus(1, 32).unwrap());
        let (s, eps, delta) = (0.7, 1.0, 1.0);
        let w = SlowVaryWeight::iterated_log(vec![1.0, 1.0]).unwrap();
        let psi = build_interp_parameter(&w, eps, delta).unwrap();
        let pair = HilbertPair::sobolev(&lat, s, eps, delta).unwrap();
        let g = interpolate(&pair, &psi).unwrap();
        for i in 0..lat.len() {
            let mut e = SpectralFunction::zeros(lat.clone());
            e.coeffs_mut()[i] = c(1.0);
            let direct = hs_phi_norm(&e, s, &w);
            assert!((g[(i, i)].re.sqrt() / direct - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn operator_norm_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pair = random_pair(&mut rng, 5);
        let id = CMat::identity(5, 5);
        let norms = operator_interpolation_check(&id, &pair, &pair, &PowerParameter(0.5), 1.0).unwrap();
        for v in [norms.norm0, norms.norm1, norms.norm_psi] {
            assert!((v - 1.0).abs() < 1e-10);
        }

        // ⟨k⟩^{-1} from [H^0, H^2] to [H^1, H^3]: every ratio of weights is 1
        let lat = FrequencyLattice::torus(1, 8).unwrap();
        let px = HilbertPair::sobolev(&lat, 1.0, 1.0, 1.0).unwrap();
        let py = HilbertPair::sobolev(&lat, 2.0, 1.0, 1.0).unwrap();
        let t = CMat::from_diagonal(&DVector::from_iterator(lat.len(), lat.brackets().iter().map(|b| c(1.0 / b))));
        let norms = operator_interpolation_check(&t, &px, &py, &PowerParameter(0.5), 1.0).unwrap();
        assert!((norms.norm0 - 1.0).abs() < 1e-12 && (norms.norm_psi - 1.0).abs() < 1e-12);
        // from [H^0, H^2] to itself the norm is max ⟨k⟩^{-1} = 1
        let norms = operator_interpolation_check(&t, &px, &px, &PowerParameter(0.5), 1.0).unwrap();
        assert!((norms.norm1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_maps_respect_the_interpolation_bound() {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let px = random_pair(&mut rng, 16);
            let py = random_pair(&mut rng, 16);
            let t = random_matrix(&mut rng, 16, 16);
            let norms = operator_interpolation_check(&t, &px, &py, &PowerParameter(0.5), 1.0).unwrap();
            assert!(norms.bound_ok, "seed {seed}: {norms:?}");
        }
    }

    #[test]
    fn direct_sum_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let single = random_pair(&mut rng, 4);
        assert!(direct_sum_check(std::slice::from_ref(&single), &PowerParameter(0.3)).unwrap() < 1e-13);
        let d1 = HilbertPair::diagonal(&[1.0, 2.0], &[3.0, 50.0]).unwrap();
        let d2 = HilbertPair::diagonal(&[0.5, 1.0, 1.0], &[7.0, 1.0, 2.0]).unwrap();
        assert!(direct_sum_check(&[d1, d2], &PowerParameter(0.5)).unwrap() <= 1e-14);
        let dense: Vec<HilbertPair> = (0..3).map(|_| random_pair(&mut rng, 4)).collect();
        assert!(direct_sum_check(&dense, &PowerParameter(1.0 / 3.0)).unwrap() <= 1e-12);
    }

    #[test]
    fn dual_pair_examples() {
        let diag = HilbertPair::diagonal(&[1.0, 2.0, 0.5], &[4.0, 30.0, 9.0]).unwrap();
        assert!(dual_pair_check(&diag, &PowerParameter(0.5)).unwrap() <= 1e-14);
        assert!(dual_pair_check(&diag, &|_t: f64| 1.0).unwrap() <= 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dense = random_pair(&mut rng, 6);
        assert!(dual_pair_check(&dense, &PowerParameter(0.3)).unwrap() <= 1e-10);
        assert!(matches!(dual_pair_check(&diag, &|t: f64| t * t), Err(Error::Parameter(_))));
    }

    #[test]
    fn dual_of_refined_parameter_matches_reciprocal_weight() {
        // with ε = δ the dual parameter t/ψ(t) is the parameter of 1/φ
        let lat = FrequencyLattice::torus(1, 24).unwrap();
        let w = SlowVaryWeight::log_power(1.0);
        let psi = build_interp_parameter(&w, 1.0, 1.0).unwrap();
        let dual_psi = build_interp_parameter(&w.reciprocal(), 1.0, 1.0).unwrap();
        let pair = HilbertPair::sobolev(&lat, 0.0, 1.0, 1.0).unwrap();
        let j = generating_operator(&pair).unwrap();
        for &m in &j.mu {
            let chi = DualParameter(&psi).value(m);
            assert!((chi / dual_psi.value(m) - 1.0).abs() < 1e-13);
        }
        assert!(dual_pair_check(&pair, &psi).unwrap() <= 1e-10);
    }

    #[test]
    fn equivalence_reduces_to_one_on_the_diagonal_model() {
        let lat = FrequencyLattice::torus(1, 16).unwrap();
        let w = SlowVaryWeight::log_power(0.5);
        let psi = build_interp_parameter(&w, 0.5, 1.5).unwrap();
        let pair = HilbertPair::sobolev(&lat, 1.0, 0.5, 1.5).unwrap();
        let direct: Vec<f64> = lat.weight_profile(1.0, &w).iter().map(|x| x * x).collect();
        let direct = CMat::from_diagonal(&DVector::from_iterator(direct.len(), direct.iter().map(|&x| c(x))));
        let k = interpolation_equivalence(pair.gram0(), pair.gram1(), &direct, &psi).unwrap();
        assert!((k.c_lower - 1.0).abs() < 1e-12 && (k.c_upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_exports() {
        let pair = HilbertPair::diagonal(&[1.0, 1.0], &[4.0, 9.0]).unwrap();
        let mut buf = Vec::new();
        write_form_csv(pair.gram1(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("i,j,re,im\n0,0,4,0\n"));
        let mut buf = Vec::new();
        write_spectrum_csv(&generating_operator(&pair).unwrap(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,mu\n0,2\n1,3\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn product_parameters_compose(seed in 0u64..10_000, a in 0.0..1.0f64, b in 0.0..1.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pair = random_pair(&mut rng, 6);
            let j = generating_operator(&pair).unwrap();
            let product = interpolate_with(&j, &|t: f64| t.powf(a) * (1.0 + t.ln().abs()).powf(b)).unwrap();
            let manual = j.assemble(|m| (m.powf(a) * (1.0 + m.ln().abs()).powf(b)).powi(2));
            prop_assert!(linalg::max_abs(&(product - &manual)) <= 1e-12 * linalg::max_abs(&manual));
        }

        #[test]
        fn embedding_chain_constants(seed in 0u64..10_000, r in -1.0..1.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pair = random_pair(&mut rng, 8);
            let psi = build_interp_parameter(&SlowVaryWeight::log_power(r), 1.0, 1.0).unwrap();
            let j = generating_operator(&pair).unwrap();
            let g = interpolate_with(&j, &psi).unwrap();
            let c1 = j.mu.iter().map(|&m| 1.0 / psi.value(m)).fold(0.0, f64::max);
            let c2 = c1 * j.mu.iter().map(|&m| psi.value(m) / m).fold(0.0, f64::max);
            let u = DVector::from_iterator(8, (0..8).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
            let norm = |form: &CMat| (u.adjoint() * form * &u)[(0, 0)].re.sqrt();
            let (n0, np, n1) = (norm(pair.gram0()), norm(&g), norm(pair.gram1()));
            prop_assert!(n0 <= c1 * np * (1.0 + 1e-10));
            prop_assert!(c1 * np <= c2 * n1 * (1.0 + 1e-10));
        }

        #[test]
        fn refined_parameter_is_exact_interpolation(seed in 0u64..10_000) {
            // Hilbert-space interpolation with t^θ is exact of exponent θ
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let px = random_pair(&mut rng, 6);
            let py = random_pair(&mut rng, 6);
            let t = random_matrix(&mut rng, 6, 6);
            let theta = rng.gen_range(0.05..0.95);
            let n = operator_interpolation_check(&t, &px, &py, &PowerParameter(theta), 1.0).unwrap();
            prop_assert!(n.norm_psi <= n.norm0.powf(1.0 - theta) * n.norm1.powf(theta) * (1.0 + 1e-9));
        }
    }
}
