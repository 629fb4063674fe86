//! Classical pseudodifferential operators on the circle acting on `ℂ^p`
//! valued functions (the trivial bundle with its global frame).
//!
//! A symbol is a finite sum of terms `e^{ijx}·M·f(k − σ)` with `M` a `p×p`
//! matrix and `f` a scalar profile in the frequency. Quantization is on the
//! left, so a term maps the mode `k` to the mode `k + j`; applying an
//! operator to band-limited data is therefore exact, the output band growing
//! by the largest `|j|`.
//!
//! Coefficient vectors are laid out as `(k + N)·p + r` for `|k| ≤ N` and
//! fiber index `r`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bundle::{smooth_step, GlobalSection};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::spectral::{self, FrequencyLattice, SpectralFunction};
use crate::weights::SlowVaryWeight;

/// Singular values below this fraction of the largest are null.
pub const RANK_THRESHOLD: f64 = 1e-8;
/// Required ratio between the smallest kept and largest dropped value.
pub const RANK_GAP: f64 = 1e2;
pub const ADJOINT_TOLERANCE: f64 = 1e-10;
const COMPATIBILITY_TOLERANCE: f64 = 1e-10;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn bracket(k: f64) -> f64 {
    (1.0 + k * k).sqrt()
}

/// Scalar frequency profile of a symbol term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    Constant,
    /// `⟨k⟩^power`.
    Bracket { power: f64 },
    /// `ik`.
    Derivative,
    /// Piecewise constant in the sign of `k`.
    Step { plus: Complex64, minus: Complex64, zero: Complex64 },
}

impl Profile {
    pub fn degree(&self) -> f64 {
        match self {
            Profile::Constant | Profile::Step { .. } => 0.0,
            Profile::Bracket { power } => *power,
            Profile::Derivative => 1.0,
        }
    }

    pub fn value(&self, k: i64) -> Complex64 {
        match self {
            Profile::Constant => c(1.0),
            Profile::Bracket { power } => c(bracket(k as f64).powf(*power)),
            Profile::Derivative => Complex64::new(0.0, k as f64),
            Profile::Step { plus, minus, zero } => match k.signum() {
                1 => *plus,
                -1 => *minus,
                _ => *zero,
            },
        }
    }

    /// Homogeneous principal part at `ξ ≠ 0`.
    pub fn principal(&self, xi: f64) -> Complex64 {
        match self {
            Profile::Constant => c(1.0),
            Profile::Bracket { power } => c(xi.abs().powf(*power)),
            Profile::Derivative => Complex64::new(0.0, xi),
            Profile::Step { plus, minus, .. } => {
                if xi > 0.0 {
                    *plus
                } else {
                    *minus
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTerm {
    /// Fourier mode `j` of the coefficient in `x`.
    pub mode: i64,
    pub matrix: CMat,
    pub profile: Profile,
    /// The profile is evaluated at `k − shift`.
    pub shift: i64,
    pub conjugate: bool,
}

impl SymbolTerm {
    pub fn new(mode: i64, matrix: CMat, profile: Profile) -> Self {
        Self {
            mode,
            matrix,
            profile,
            shift: 0,
            conjugate: false,
        }
    }

    fn value(&self, k: i64) -> Complex64 {
        let v = self.profile.value(k - self.shift);
        if self.conjugate {
            v.conj()
        } else {
            v
        }
    }

    fn principal(&self, xi: f64) -> Complex64 {
        let v = self.profile.principal(xi);
        if self.conjugate {
            v.conj()
        } else {
            v
        }
    }
}

/// Polyhomogeneous `p×p` symbol of order `m`. Terms whose profile has
/// degree `m` make up the principal part.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSymbol {
    order: f64,
    rank: usize,
    terms: Vec<SymbolTerm>,
}

impl MatrixSymbol {
    pub fn new(order: f64, rank: usize, terms: Vec<SymbolTerm>) -> Result<Self> {
        if rank == 0 || !order.is_finite() {
            return Err(Error::Parameter(format!("invalid symbol: order {order}, rank {rank}")));
        }
        for (i, t) in terms.iter().enumerate() {
            if t.matrix.shape() != (rank, rank) {
                return Err(Error::Shape(format!("term {i}: coefficient is not {rank}×{rank}")));
            }
            if t.profile.degree() > order + 1e-12 {
                return Err(Error::Parameter(format!(
                    "term {i} has degree {} above the order {order}",
                    t.profile.degree()
                )));
            }
        }
        Ok(Self { order, rank, terms })
    }

    /// Scalar symbol `Σ_j c_j e^{ijx}·f(k)`.
    pub fn scalar(order: f64, modes: &[(i64, Complex64)], profile: Profile) -> Result<Self> {
        let terms = modes
            .iter()
            .map(|&(j, cj)| SymbolTerm::new(j, CMat::from_element(1, 1, cj), profile.clone()))
            .collect();
        Self::new(order, 1, terms)
    }

    pub fn identity(rank: usize) -> Self {
        Self::new(0.0, rank, vec![SymbolTerm::new(0, CMat::identity(rank, rank), Profile::Constant)])
            .expect("valid identity")
    }

    /// Multiplication by the trigonometric polynomial `Σ_j c_j e^{ijx}`.
    pub fn multiplication(rank: usize, modes: &[(i64, Complex64)]) -> Self {
        let terms = modes
            .iter()
            .map(|&(j, cj)| SymbolTerm::new(j, CMat::identity(rank, rank) * cj, Profile::Constant))
            .collect();
        Self::new(0.0, rank, terms).expect("valid multiplication")
    }

    /// `⟨D⟩^m`.
    pub fn multiplier(order: f64) -> Self {
        Self::scalar(order, &[(0, c(1.0))], Profile::Bracket { power: order }).expect("valid multiplier")
    }

    /// `d/dθ`.
    pub fn derivative() -> Self {
        Self::scalar(1.0, &[(0, c(1.0))], Profile::Derivative).expect("valid derivative")
    }

    /// `d/dθ + cos x`.
    pub fn derivative_plus_cos() -> Self {
        let mut terms = vec![SymbolTerm::new(0, CMat::identity(1, 1), Profile::Derivative)];
        for j in [-1, 1] {
            terms.push(SymbolTerm::new(j, CMat::from_element(1, 1, c(0.5)), Profile::Constant));
        }
        Self::new(1.0, 1, terms).expect("valid symbol")
    }

    /// Order-0 symbol `e^{iwx}` for `k > 0` and `1` for `k ≤ 0`.
    pub fn winding(w: i64) -> Self {
        let plus = Profile::Step {
            plus: c(1.0),
            minus: c(0.0),
            zero: c(0.0),
        };
        let rest = Profile::Step {
            plus: c(0.0),
            minus: c(1.0),
            zero: c(1.0),
        };
        Self::new(
            0.0,
            1,
            vec![
                SymbolTerm::new(w, CMat::identity(1, 1), plus),
                SymbolTerm::new(0, CMat::identity(1, 1), rest),
            ],
        )
        .expect("valid winding symbol")
    }

    /// `(1 + ½cos x)·⟨D⟩`.
    pub fn variable_elliptic() -> Self {
        Self::scalar(1.0, &[(-1, c(0.25)), (0, c(1.0)), (1, c(0.25))], Profile::Bracket { power: 1.0 })
            .expect("valid symbol")
    }

    /// Multiplication by `(1 + cos x)/2 + 1`.
    pub fn variable_order_zero() -> Self {
        Self::scalar(0.0, &[(-1, c(0.25)), (0, c(1.5)), (1, c(0.25))], Profile::Constant).expect("valid symbol")
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn terms(&self) -> &[SymbolTerm] {
        &self.terms
    }

    /// Largest `|j|` among the coefficient modes.
    pub fn bandwidth(&self) -> usize {
        self.terms.iter().map(|t| t.mode.unsigned_abs() as usize).max().unwrap_or(0)
    }

    fn is_principal(&self, t: &SymbolTerm) -> bool {
        (t.profile.degree() - self.order).abs() <= 1e-12
    }

    /// Full symbol `a(x, k)`.
    pub fn full_at(&self, x: f64, k: i64) -> CMat {
        self.terms.iter().fold(CMat::zeros(self.rank, self.rank), |acc, t| {
            acc + &t.matrix * (Complex64::from_polar(1.0, t.mode as f64 * x) * t.value(k))
        })
    }

    /// Principal symbol `a₀(x, ξ)`, or `None` without a principal part.
    pub fn principal_at(&self, x: f64, xi: f64) -> Option<CMat> {
        let mut any = false;
        let mut acc = CMat::zeros(self.rank, self.rank);
        for t in self.terms.iter().filter(|t| self.is_principal(t)) {
            any = true;
            acc += &t.matrix * (Complex64::from_polar(1.0, t.mode as f64 * x) * t.principal(xi));
        }
        any.then_some(acc)
    }

    fn x_grid(&self) -> Vec<f64> {
        let m = 256 + 16 * self.bandwidth();
        (0..m).map(|i| 2.0 * PI * i as f64 / m as f64).collect()
    }

    /// `max ‖a(x,k) − a₀(x,k)‖ / ⟨k⟩^{m−1}` over dyadic shells
    /// `2^j ≤ |k| < 2^{j+1}` up to `cutoff`; bounded values mean the
    /// remainder is one order lower.
    pub fn remainder_profile(&self, cutoff: usize) -> Vec<(i64, f64)> {
        let grid = self.x_grid();
        let mut out = Vec::new();
        let mut lo = 1i64;
        while lo <= cutoff as i64 {
            let hi = (2 * lo).min(cutoff as i64 + 1);
            let mut worst: f64 = 0.0;
            for k in (lo..hi).flat_map(|k| [k, -k]) {
                for &x in &grid {
                    let p = self.principal_at(x, k as f64).unwrap_or_else(|| CMat::zeros(self.rank, self.rank));
                    let diff = linalg::max_abs(&(self.full_at(x, k) - p));
                    worst = worst.max(diff / bracket(k as f64).powf(self.order - 1.0));
                }
            }
            out.push((lo, worst));
            lo *= 2;
        }
        out
    }

    /// Truncated matrix from band `cutoff` to band `cutoff + bandwidth`.
    pub fn assemble(&self, cutoff: usize) -> CMat {
        let p = self.rank;
        let n = cutoff as i64;
        let out = n + self.bandwidth() as i64;
        let mut m = CMat::zeros(p * (2 * out as usize + 1), p * (2 * cutoff + 1));
        for t in &self.terms {
            for k in -n..=n {
                let v = t.value(k);
                if v == c(0.0) {
                    continue;
                }
                let row = ((k + t.mode + out) as usize) * p;
                let col = ((k + n) as usize) * p;
                for r in 0..p {
                    for q in 0..p {
                        m[(row + r, col + q)] += t.matrix[(r, q)] * v;
                    }
                }
            }
        }
        m
    }

    /// Symbol of the formal adjoint, term by term.
    pub fn adjoint_symbol(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| SymbolTerm {
                mode: -t.mode,
                matrix: t.matrix.adjoint(),
                profile: t.profile.clone(),
                shift: t.shift + t.mode,
                conjugate: !t.conjugate,
            })
            .collect();
        Self {
            order: self.order,
            rank: self.rank,
            terms,
        }
    }

    /// Formal adjoint with its pairing residual over a seeded battery of
    /// band-16 pairs.
    pub fn formal_adjoint(&self) -> Result<(Self, f64)> {
        let adj = self.adjoint_symbol();
        let residual = adjoint_residual(self, &adj, 16, 8);
        if !(residual <= ADJOINT_TOLERANCE) {
            return Err(Error::AdjointResidual {
                residual,
                tolerance: ADJOINT_TOLERANCE,
            });
        }
        Ok((adj, residual))
    }

    pub fn ellipticity_check(&self) -> Result<EllipticityReport> {
        let mut report = EllipticityReport {
            elliptic: true,
            min_abs_det: f64::INFINITY,
            witness: None,
        };
        let mut largest: f64 = 0.0;
        for &x in &self.x_grid() {
            for xi in [-1.0, 1.0] {
                let a0 = self
                    .principal_at(x, xi)
                    .ok_or_else(|| Error::Model("symbol has no principal part".into()))?;
                let d = a0.determinant().norm();
                largest = largest.max(d);
                if d < report.min_abs_det {
                    report.min_abs_det = d;
                    report.witness = Some((x, xi));
                }
            }
        }
        report.elliptic = report.min_abs_det > 1e-10 * largest.max(1.0);
        if report.elliptic {
            report.witness = None;
        }
        Ok(report)
    }
}

/// Relative mismatch `|⟨Au, v⟩ − ⟨u, Bv⟩|` over seeded random pairs.
pub fn adjoint_residual(a: &MatrixSymbol, b: &MatrixSymbol, cutoff: usize, pairs: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..pairs {
        let u = TorusSection::random(17, 2 * i, a.rank, cutoff, cutoff, 1.0);
        let v = TorusSection::random(17, 2 * i + 1, a.rank, cutoff, cutoff, 1.0);
        let au = apply_psdo(a, &u);
        let bv = apply_psdo(b, &v);
        let lhs = hermitian_pairing(&au, &v);
        let rhs = hermitian_pairing(&u, &bv);
        let scale = au.l2_norm() * v.l2_norm() + u.l2_norm() * bv.l2_norm();
        worst = worst.max((lhs - rhs).norm() / scale.max(f64::MIN_POSITIVE));
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticityReport {
    pub elliptic: bool,
    /// `min |det a₀(x, ±1)|` over the x grid.
    pub min_abs_det: f64,
    /// `(x, ξ)` where the determinant is smallest, when not elliptic.
    pub witness: Option<(f64, f64)>,
}

/// Operators that can be assembled on truncated lattices.
pub trait LatticeOperator: Sync {
    fn rank(&self) -> usize;
    fn order(&self) -> f64;
    fn bandwidth(&self) -> usize;
    /// Matrix from band `cutoff` to band `cutoff + bandwidth`.
    fn assemble(&self, cutoff: usize) -> CMat;
    /// Matrix of the formal adjoint, same shape convention.
    fn assemble_adjoint(&self, cutoff: usize) -> CMat;
    fn ellipticity(&self) -> Result<EllipticityReport>;
}

impl LatticeOperator for MatrixSymbol {
    fn rank(&self) -> usize {
        self.rank
    }

    fn order(&self) -> f64 {
        self.order
    }

    fn bandwidth(&self) -> usize {
        MatrixSymbol::bandwidth(self)
    }

    fn assemble(&self, cutoff: usize) -> CMat {
        MatrixSymbol::assemble(self, cutoff)
    }

    fn assemble_adjoint(&self, cutoff: usize) -> CMat {
        self.adjoint_symbol().assemble(cutoff)
    }

    fn ellipticity(&self) -> Result<EllipticityReport> {
        self.ellipticity_check()
    }
}

/// `outer ∘ inner`, assembled as a product of exact band maps.
#[derive(Debug, Clone, Copy)]
pub struct Composition<'a> {
    pub outer: &'a MatrixSymbol,
    pub inner: &'a MatrixSymbol,
}

impl<'a> Composition<'a> {
    pub fn new(outer: &'a MatrixSymbol, inner: &'a MatrixSymbol) -> Result<Self> {
        if outer.rank != inner.rank {
            return Err(Error::Shape("composed symbols differ in rank".into()));
        }
        Ok(Self { outer, inner })
    }
}

impl LatticeOperator for Composition<'_> {
    fn rank(&self) -> usize {
        self.inner.rank
    }

    fn order(&self) -> f64 {
        self.outer.order + self.inner.order
    }

    fn bandwidth(&self) -> usize {
        self.outer.bandwidth() + self.inner.bandwidth()
    }

    fn assemble(&self, cutoff: usize) -> CMat {
        self.outer.assemble(cutoff + self.inner.bandwidth()) * self.inner.assemble(cutoff)
    }

    fn assemble_adjoint(&self, cutoff: usize) -> CMat {
        let inner_adj = self.inner.adjoint_symbol();
        let outer_adj = self.outer.adjoint_symbol();
        inner_adj.assemble(cutoff + self.outer.bandwidth()) * outer_adj.assemble(cutoff)
    }

    fn ellipticity(&self) -> Result<EllipticityReport> {
        let a = self.outer.ellipticity_check()?;
        let b = self.inner.ellipticity_check()?;
        Ok(EllipticityReport {
            elliptic: a.elliptic && b.elliptic,
            min_abs_det: a.min_abs_det * b.min_abs_det,
            witness: a.witness.or(b.witness),
        })
    }
}

/// Band-limited `ℂ^p`-valued function on the circle, by Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusSection {
    rank: usize,
    cutoff: usize,
    coeffs: CVec,
}

impl TorusSection {
    pub fn zeros(rank: usize, cutoff: usize) -> Self {
        Self {
            rank,
            cutoff,
            coeffs: CVec::zeros(rank * (2 * cutoff + 1)),
        }
    }

    pub fn from_coeffs(rank: usize, cutoff: usize, coeffs: CVec) -> Result<Self> {
        if coeffs.len() != rank * (2 * cutoff + 1) {
            return Err(Error::Shape(format!(
                "{} coefficients for rank {rank} and band {cutoff}",
                coeffs.len()
            )));
        }
        Ok(Self { rank, cutoff, coeffs })
    }

    pub fn from_fn(rank: usize, cutoff: usize, f: impl Fn(i64, usize) -> Complex64) -> Self {
        let n = cutoff as i64;
        let coeffs = CVec::from_iterator(
            rank * (2 * cutoff + 1),
            (-n..=n).flat_map(|k| (0..rank).map(move |r| (k, r))).map(|(k, r)| f(k, r)),
        );
        Self { rank, cutoff, coeffs }
    }

    /// Seeded random section of band `band ≤ cutoff` with `|û| = ⟨k⟩^{−decay}`;
    /// low modes agree across bands for the same `(seed, sample)`.
    pub fn random(seed: u64, sample: u64, rank: usize, cutoff: usize, band: usize, decay: f64) -> Self {
        let g = GlobalSection::random(seed, sample, rank, band.min(cutoff), decay);
        let b = g.band() as i64;
        Self::from_fn(rank, cutoff, |k, r| {
            if k.abs() <= b {
                g.component(r)[(k + b) as usize]
            } else {
                c(0.0)
            }
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn coeffs(&self) -> &CVec {
        &self.coeffs
    }

    pub fn coefficient(&self, k: i64, r: usize) -> Complex64 {
        if k.unsigned_abs() as usize > self.cutoff {
            return c(0.0);
        }
        self.coeffs[(k + self.cutoff as i64) as usize * self.rank + r]
    }

    /// Same function on a different band; returns the section and the `L²`
    /// mass of dropped modes relative to the whole.
    pub fn rebanded(&self, cutoff: usize) -> (Self, f64) {
        let out = Self::from_fn(self.rank, cutoff, |k, r| self.coefficient(k, r));
        let total = self.l2_norm();
        let kept = out.l2_norm();
        let dropped = (total * total - kept * kept).max(0.0).sqrt();
        (out, if total > 0.0 { dropped / total } else { 0.0 })
    }

    pub fn fiber(&self, r: usize) -> SpectralFunction {
        let lattice = std::sync::Arc::new(FrequencyLattice::torus(1, self.cutoff.max(1)).expect("valid torus"));
        SpectralFunction::from_fn(lattice, |k| self.coefficient(k[0], r))
    }

    /// `(Σ_k |û(k)|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// `(Σ_k ⟨k⟩^{2s} φ²(⟨k⟩) |û(k)|²)^{1/2}`.
    pub fn norm(&self, s: f64, w: &SlowVaryWeight) -> f64 {
        let d = weight_diagonal(self.rank, self.cutoff, s, w);
        let terms: Vec<f64> = self.coeffs.iter().zip(&d).map(|(z, wt)| (z * *wt).norm_sqr()).collect();
        linalg::pairwise_sum(&terms).sqrt()
    }
}

/// `⟨k⟩^s φ(⟨k⟩)` in coefficient layout.
pub fn weight_diagonal(rank: usize, cutoff: usize, s: f64, w: &SlowVaryWeight) -> Vec<f64> {
    let n = cutoff as i64;
    (-n..=n)
        .flat_map(|k| {
            let v = bracket(k as f64).powf(s) * w.value_unchecked(bracket(k as f64));
            std::iter::repeat(v).take(rank)
        })
        .collect()
}

fn weighted(m: &CMat, rows: &[f64], cols: &[f64]) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (rows[i] / cols[j]))
}

/// Exact action on band-limited data; the output band is
/// `cutoff + bandwidth`.
pub fn apply_psdo<A: LatticeOperator + ?Sized>(a: &A, u: &TorusSection) -> TorusSection {
    let out = u.cutoff + a.bandwidth();
    TorusSection {
        rank: u.rank,
        cutoff: out,
        coeffs: a.assemble(u.cutoff) * &u.coeffs,
    }
}

/// Action truncated back to the input band, with the relative `L²` mass
/// pushed outside it.
pub fn apply_truncated<A: LatticeOperator + ?Sized>(a: &A, u: &TorusSection) -> (TorusSection, f64) {
    apply_psdo(a, u).rebanded(u.cutoff)
}

/// `∫₀^{2π} ⟨u(x), v(x)⟩ dx = 2π Σ_k ⟨û(k), v̂(k)⟩` over the common band.
pub fn hermitian_pairing(u: &TorusSection, v: &TorusSection) -> Complex64 {
    let n = u.cutoff.min(v.cutoff) as i64;
    let mut terms = Vec::new();
    for k in -n..=n {
        for r in 0..u.rank.min(v.rank) {
            terms.push(u.coefficient(k, r) * v.coefficient(k, r).conj());
        }
    }
    spectral::pairwise_sum_complex(&terms) * (2.0 * PI)
}

/// Norm of `A: H^{s+m,φ} → H^{s,φ}` on band `cutoff`.
pub fn bounded_operator_norm<A: LatticeOperator + ?Sized>(a: &A, s: f64, w: &SlowVaryWeight, cutoff: usize) -> f64 {
    let m = a.assemble(cutoff);
    let rows = weight_diagonal(a.rank(), cutoff + a.bandwidth(), s, w);
    let cols = weight_diagonal(a.rank(), cutoff, s + a.order(), w);
    linalg::spectral_norm(&weighted(&m, &rows, &cols))
}

/// Kernel, cokernel and index of a truncated elliptic operator.
#[derive(Debug, Clone)]
pub struct FredholmReport {
    pub s: f64,
    pub weight: SlowVaryWeight,
    pub cutoff: usize,
    pub rank: usize,
    /// Orthonormal coefficient columns spanning the kernel.
    pub kernel: CMat,
    /// Orthonormal coefficient columns spanning the kernel of the adjoint.
    pub cokernel: CMat,
    pub index: i64,
    pub singular_values: Vec<f64>,
    pub adjoint_singular_values: Vec<f64>,
    pub gap: f64,
    pub adjoint_gap: f64,
    /// `max |⟨A e, n⁺⟩|` over unit inputs `e` and cokernel vectors `n⁺`,
    /// relative to `‖A‖`.
    pub cokernel_orthogonality: f64,
}

impl FredholmReport {
    pub fn kernel_dim(&self) -> usize {
        self.kernel.ncols()
    }

    pub fn cokernel_dim(&self) -> usize {
        self.cokernel.ncols()
    }

    /// JSON with kernel bases as columnar spectra.
    pub fn to_json(&self) -> serde_json::Value {
        let spectra = |basis: &CMat| -> Vec<serde_json::Value> {
            let n = self.cutoff as i64;
            let p = self.rank;
            (0..basis.ncols())
                .map(|col| {
                    let (mut ks, mut fibers, mut re, mut im) = (vec![], vec![], vec![], vec![]);
                    for k in -n..=n {
                        for r in 0..p {
                            let z = basis[((k + n) as usize * p + r, col)];
                            ks.push(k);
                            fibers.push(r);
                            re.push(z.re);
                            im.push(z.im);
                        }
                    }
                    serde_json::json!({ "k": ks, "fiber": fibers, "re": re, "im": im })
                })
                .collect()
        };
        serde_json::json!({
            "s": self.s,
            "weight": self.weight,
            "cutoff": self.cutoff,
            "index": self.index,
            "kernel_dim": self.kernel_dim(),
            "cokernel_dim": self.cokernel_dim(),
            "gap": finite_or_null(self.gap),
            "adjoint_gap": finite_or_null(self.adjoint_gap),
            "singular_values": self.singular_values,
            "kernel": spectra(&self.kernel),
            "cokernel": spectra(&self.cokernel),
        })
    }
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::Value::Null
    }
}

/// Null space of `m` weighted by `rows`/`cols`, returned in unweighted
/// coefficients.
fn weighted_null_space(m: &CMat, rows: &[f64], cols: &[f64]) -> Result<(CMat, Vec<f64>, f64)> {
    let dec = linalg::svd(&weighted(m, rows, cols));
    let decision = linalg::decide_rank(&dec.singular_values, RANK_THRESHOLD, RANK_GAP)?;
    let n = m.ncols();
    let null = CMat::from_fn(n, n - decision.rank, |i, j| dec.v[(i, decision.rank + j)] / cols[i]);
    Ok((linalg::orthonormal_columns(&null), dec.singular_values, decision.gap))
}

/// Fredholm analysis of `A: H^{s+m,φ} → H^{s,φ}` truncated to band `cutoff`.
///
/// The cokernel is the kernel of the formal adjoint acting
/// `H^{−s,1/φ} → H^{−s−m,1/φ}`, cross-checked by its orthogonality to the
/// range of `A`.
pub fn fredholm_analysis<A: LatticeOperator + ?Sized>(
    a: &A,
    s: f64,
    w: &SlowVaryWeight,
    cutoff: usize,
) -> Result<FredholmReport> {
    let ell = a.ellipticity()?;
    if !ell.elliptic {
        return Err(Error::Model(format!(
            "operator is not elliptic: |det a₀| = {:e} at {:?}",
            ell.min_abs_det, ell.witness
        )));
    }
    let p = a.rank();
    let m = a.order();
    let out = cutoff + a.bandwidth();
    let matrix = a.assemble(cutoff);
    let (kernel, singular_values, gap) = weighted_null_space(
        &matrix,
        &weight_diagonal(p, out, s, w),
        &weight_diagonal(p, cutoff, s + m, w),
    )?;
    let dual = w.reciprocal();
    let adjoint = a.assemble_adjoint(cutoff);
    let (cokernel, adjoint_singular_values, adjoint_gap) = weighted_null_space(
        &adjoint,
        &weight_diagonal(p, out, -s - m, &dual),
        &weight_diagonal(p, cutoff, -s, &dual),
    )?;
    let mut padded = CMat::zeros(matrix.nrows(), cokernel.ncols());
    let offset = a.bandwidth() * p;
    padded.view_mut((offset, 0), (cokernel.nrows(), cokernel.ncols())).copy_from(&cokernel);
    let norm = linalg::max_abs(&matrix).max(f64::MIN_POSITIVE);
    let cokernel_orthogonality = linalg::max_abs(&(matrix.adjoint() * padded)) / norm;
    Ok(FredholmReport {
        s,
        weight: w.clone(),
        cutoff,
        rank: p,
        index: kernel.ncols() as i64 - cokernel.ncols() as i64,
        kernel,
        cokernel,
        singular_values,
        adjoint_singular_values,
        gap,
        adjoint_gap,
        cokernel_orthogonality,
    })
}

/// Projection along a finite-dimensional subspace onto its pairing-orthogonal
/// complement.
#[derive(Debug, Clone)]
pub struct Projector {
    basis: CMat,
    gram_inverse: CMat,
}

impl Projector {
    pub fn new(basis: CMat) -> Result<Self> {
        let n = basis.ncols();
        let gram = (basis.adjoint() * &basis).scale(2.0 * PI);
        let gram_inverse = if n == 0 {
            CMat::zeros(0, 0)
        } else {
            let (values, _) = linalg::hermitian_eigen(&gram);
            let condition = values[n - 1] / values[0].max(f64::MIN_POSITIVE);
            if !(condition <= crate::interp::CONDITION_LIMIT) {
                return Err(Error::Conditioning {
                    condition,
                    limit: crate::interp::CONDITION_LIMIT,
                });
            }
            linalg::inverse(&gram)?
        };
        Ok(Self { basis, gram_inverse })
    }

    pub fn apply(&self, u: &CVec) -> CVec {
        if self.basis.ncols() == 0 {
            return u.clone();
        }
        let pairings = (self.basis.adjoint() * u).scale(2.0 * PI);
        u - &self.basis * (&self.gram_inverse * pairings)
    }

    pub fn apply_section(&self, u: &TorusSection) -> TorusSection {
        TorusSection {
            rank: u.rank,
            cutoff: u.cutoff,
            coeffs: self.apply(&u.coeffs),
        }
    }

    pub fn matrix(&self) -> CMat {
        let n = self.basis.nrows();
        let mut m = CMat::identity(n, n);
        for j in 0..n {
            let col = self.apply(&m.column(j).into_owned());
            m.set_column(j, &col);
        }
        m
    }
}

/// `P` (along the kernel) and `P⁺` (along the cokernel).
pub fn projectors(report: &FredholmReport) -> Result<(Projector, Projector)> {
    Ok((Projector::new(report.kernel.clone())?, Projector::new(report.cokernel.clone())?))
}

#[derive(Debug, Clone)]
pub struct RestrictedSolution {
    pub u: TorusSection,
    /// `‖Au − f‖_{s,φ} / ‖f‖_{s,φ}`.
    pub residual: f64,
    /// Condition number of `A` restricted to `range P` between the weighted
    /// spaces.
    pub condition: f64,
}

/// Solves `Au = f` with `u` pairing-orthogonal to the kernel. `f` must be
/// orthogonal to the cokernel.
pub fn restricted_solve<A: LatticeOperator + ?Sized>(
    a: &A,
    report: &FredholmReport,
    f: &TorusSection,
) -> Result<RestrictedSolution> {
    let p = a.rank();
    let n = report.cutoff;
    if f.rank != p || f.cutoff > n {
        return Err(Error::Shape(format!("right-hand side must have rank {p} and band ≤ {n}")));
    }
    let (f, _) = f.rebanded(n);
    let f_norm = f.l2_norm();
    for j in 0..report.cokernel.ncols() {
        let pairing = (report.cokernel.column(j).adjoint() * &f.coeffs)[(0, 0)].norm();
        let relative = pairing / f_norm.max(f64::MIN_POSITIVE);
        if relative > COMPATIBILITY_TOLERANCE {
            return Err(Error::Compatibility {
                index: j,
                pairing: relative,
            });
        }
    }
    let out = n + a.bandwidth();
    let wd = weight_diagonal(p, n, report.s + a.order(), &report.weight);
    let wt = weight_diagonal(p, out, report.s, &report.weight);
    // weighted matrix between the two spaces; its kernel directions are
    // dropped and the solution is then made orthogonal to the kernel, which
    // leaves Au unchanged
    let weighted = {
        let m = a.assemble(n);
        CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (wt[i] / wd[j]))
    };
    let (f_pad, _) = f.rebanded(out);
    let rhs = CVec::from_iterator(wt.len(), f_pad.coeffs.iter().zip(&wt).map(|(z, w)| z * *w));
    let dec = linalg::svd(&weighted);
    let k = dec.singular_values.len().saturating_sub(report.kernel.ncols());
    let smax = dec.singular_values.first().copied().unwrap_or(0.0);
    let smin = if k > 0 { dec.singular_values[k - 1] } else { 0.0 };
    let condition = smax / smin.max(f64::MIN_POSITIVE);
    let projected = dec.u.columns(0, k).adjoint() * &rhs;
    let y = CVec::from_iterator(k, projected.iter().zip(&dec.singular_values).map(|(z, s)| z / *s));
    let v = dec.v.columns(0, k) * y;
    let mut coeffs = CVec::from_iterator(v.len(), v.iter().zip(&wd).map(|(z, w)| z / *w));
    coeffs -= &report.kernel * (report.kernel.adjoint() * &coeffs);
    let u = TorusSection { rank: p, cutoff: n, coeffs };
    let au = apply_psdo(a, &u);
    let diff = TorusSection {
        rank: p,
        cutoff: out,
        coeffs: &au.coeffs - &f_pad.coeffs,
    };
    let residual = diff.norm(report.s, &report.weight) / f.norm(report.s, &report.weight).max(f64::MIN_POSITIVE);
    Ok(RestrictedSolution { u, residual, condition })
}

/// Smooth cutoff on the circle: 1 within `inner` of `center`, 0 beyond
/// `outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothCutoff {
    pub center: f64,
    pub inner: f64,
    pub outer: f64,
}

impl SmoothCutoff {
    pub fn new(center: f64, inner: f64, outer: f64) -> Result<Self> {
        if !(0.0 <= inner && inner < outer && outer < PI) {
            return Err(Error::Parameter(format!("cutoff radii {inner} < {outer} < π required")));
        }
        Ok(Self { center, inner, outer })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let d = ((x - self.center + PI).rem_euclid(2.0 * PI) - PI).abs();
        if d <= self.inner {
            1.0
        } else if d >= self.outer {
            0.0
        } else {
            smooth_step((self.outer - d) / (self.outer - self.inner))
        }
    }
}

/// `f·u` truncated to band `out`, computed on an oversampled grid.
pub fn multiply_by(f: &dyn Fn(f64) -> f64, u: &TorusSection, out: usize) -> TorusSection {
    let m = spectral::oversampled_points(out.max(u.cutoff));
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    let values: Vec<f64> = (0..m).map(|i| f(2.0 * PI * i as f64 / m as f64)).collect();
    let mut fibers = Vec::with_capacity(u.rank);
    for r in 0..u.rank {
        let mut buf = spectral::sample_on_grid(&u.fiber(r), m);
        for (z, v) in buf.iter_mut().zip(&values) {
            *z *= *v;
        }
        fft.process(&mut buf);
        fibers.push(buf);
    }
    TorusSection::from_fn(u.rank, out, |k, r| fibers[r][k.rem_euclid(m as i64) as usize] / m as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AprioriVariant {
    /// `χ ≡ η ≡ 1`.
    Global,
    /// `η ≡ 1` near the support of `χ`.
    Localized { chi: SmoothCutoff, eta: SmoothCutoff },
    /// `η = χ` with `σ ∈ (s+m−1, s+m)`.
    Sharpened { chi: SmoothCutoff },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriReport {
    pub ratios: Vec<f64>,
    pub c_estimate: f64,
}

/// Ratios `‖χu‖_{s+m,φ} / (‖ηAu‖_{s,φ} + ‖u‖_σ)` over sample sections.
pub fn apriori_estimate_harness(
    a: &MatrixSymbol,
    variant: &AprioriVariant,
    s: f64,
    w: &SlowVaryWeight,
    sigma: f64,
    samples: &[TorusSection],
) -> Result<AprioriReport> {
    let m = a.order();
    if !(sigma < s + m) {
        return Err(Error::Parameter(format!("σ = {sigma} must be below s + m = {}", s + m)));
    }
    let cutoffs = match variant {
        AprioriVariant::Global => None,
        AprioriVariant::Localized { chi, eta } => {
            let grid = 4096;
            let step = 2.0 * PI / grid as f64;
            for i in 0..grid {
                let x = i as f64 * step;
                let near = [x - step, x, x + step];
                if chi.eval(x) > 0.0 && near.iter().any(|&y| eta.eval(y) != 1.0) {
                    return Err(Error::Config(format!("η is not 1 near x = {x:.4} in the support of χ")));
                }
            }
            Some((*chi, *eta))
        }
        AprioriVariant::Sharpened { chi } => {
            if !(sigma > s + m - 1.0) {
                return Err(Error::Parameter(format!("sharpened estimate needs σ > s + m − 1, got {sigma}")));
            }
            Some((*chi, *chi))
        }
    };
    let one = SlowVaryWeight::constant();
    let mut ratios = Vec::with_capacity(samples.len());
    for u in samples {
        let au = apply_psdo(a, u);
        let wide = 4 * u.cutoff;
        let (lhs, eta_au) = match &cutoffs {
            None => (u.norm(s + m, w), au.norm(s, w)),
            Some((chi, eta)) => (
                multiply_by(&|x| chi.eval(x), u, wide).norm(s + m, w),
                multiply_by(&|x| eta.eval(x), &au, wide).norm(s, w),
            ),
        };
        let denom = eta_au + u.norm(sigma, &one);
        if denom > 0.0 {
            ratios.push(lhs / denom);
        }
    }
    let c_estimate = ratios.iter().copied().fold(0.0, f64::max);
    Ok(AprioriReport { ratios, c_estimate })
}

/// Norms of `[A, χ]` restricted to inputs in the shell `N/2 ≤ |k| ≤ N`,
/// into `H^{s,φ}`, from `H^{s+m−1,φ}` and from `H^{s+m,φ}`.
pub fn commutator_shell_norms(
    a: &MatrixSymbol,
    chi: &MatrixSymbol,
    s: f64,
    w: &SlowVaryWeight,
    cutoff: usize,
) -> Result<(f64, f64)> {
    if a.rank != chi.rank {
        return Err(Error::Shape("commutator of symbols of different rank".into()));
    }
    let ac = Composition::new(a, chi)?.assemble(cutoff);
    let ca = Composition::new(chi, a)?.assemble(cutoff);
    let comm = ac - ca;
    let p = a.rank;
    let n = cutoff as i64;
    let out = cutoff + a.bandwidth() + chi.bandwidth();
    let shell: Vec<usize> = (-n..=n)
        .filter(|k| 2 * k.abs() >= n)
        .flat_map(|k| (0..p).map(move |r| (k + n) as usize * p + r))
        .collect();
    let rows = weight_diagonal(p, out, s, w);
    let norm_from = |sigma: f64| {
        let cols = weight_diagonal(p, cutoff, sigma, w);
        let sub = CMat::from_fn(comm.nrows(), shell.len(), |i, j| comm[(i, shell[j])] * (rows[i] / cols[shell[j]]));
        linalg::spectral_norm(&sub)
    };
    Ok((norm_from(s + a.order() - 1.0), norm_from(s + a.order())))
}

/// Right-hand side `f̂(k) = ⟨k⟩^{−s−1/2} / (φ(⟨k⟩)(log⟨k⟩ + 1))` in every
/// fiber: `f ∈ H^{s,φ}` with a logarithmic margin.
pub fn regularity_rhs(rank: usize, cutoff: usize, s: f64, w: &SlowVaryWeight) -> TorusSection {
    TorusSection::from_fn(rank, cutoff, |k, _| {
        let b = bracket(k as f64);
        c(b.powf(-s - 0.5) / (w.value_unchecked(b) * (b.ln() + 1.0)))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityRow {
    pub cutoff: usize,
    /// `‖u‖_{s+m,φ}`.
    pub norm_u: f64,
    /// `‖f‖_{s,φ}`.
    pub norm_f: f64,
    pub ratio: f64,
    /// `(σ, ‖u‖_{σ,φ})` at `σ = s+m−½` and `s+m+½`.
    pub neighbors: Vec<(f64, f64)>,
    /// Sup norm of `u` summed over fibers.
    pub sup_norm: f64,
    pub residual: f64,
}

/// Solves `Au = f` for the prescribed right-hand side at each band and
/// tabulates norms of the solution.
pub fn regularity_experiment(
    a: &MatrixSymbol,
    s: f64,
    w: &SlowVaryWeight,
    cutoffs: &[usize],
) -> Result<Vec<RegularityRow>> {
    let m = a.order();
    cutoffs
        .iter()
        .map(|&n| {
            let report = fredholm_analysis(a, s, w, n)?;
            let (_, pplus) = projectors(&report)?;
            let f = pplus.apply_section(&regularity_rhs(a.rank, n, s, w));
            let sol = restricted_solve(a, &report, &f)?;
            let mut sup_norm = 0.0;
            for r in 0..a.rank {
                sup_norm += spectral::sup_and_cq_seminorms(&sol.u.fiber(r), 0)?;
            }
            let norm_u = sol.u.norm(s + m, w);
            let norm_f = f.norm(s, w);
            Ok(RegularityRow {
                cutoff: n,
                norm_u,
                norm_f,
                ratio: norm_u / norm_f,
                neighbors: [-0.5, 0.5].iter().map(|d| (s + m + d, sol.u.norm(s + m + d, w))).collect(),
                sup_norm,
                residual: sol.residual,
            })
        })
        .collect()
}

/// `û(k) = 1/(k log k)` for `2 ≤ k ≤ K`: bounded in `H^{1/2}` while sup
/// norms grow like `log log K`.
pub fn sharpness_family(top: usize) -> Result<SpectralFunction> {
    let lattice = std::sync::Arc::new(FrequencyLattice::torus(1, top)?);
    Ok(SpectralFunction::from_fn(lattice, |k| {
        let k = k[0];
        if k >= 2 {
            c(1.0 / (k as f64 * (k as f64).ln()))
        } else {
            c(0.0)
        }
    }))
}

/// `(‖u‖_{1/2}, sup |u|)` for the sharpness family at `K`.
pub fn sharpness_norms(top: usize) -> Result<(f64, f64)> {
    let u = sharpness_family(top)?;
    Ok((spectral::hs_norm(&u, 0.5), spectral::sup_and_cq_seminorms(&u, 0)?))
}

/// Symbol families available to experiment configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SymbolSpec {
    Identity {
        #[serde(default = "one")]
        rank: usize,
    },
    Multiplier { order: f64 },
    Derivative,
    DerivativePlusCos,
    Winding { w: i64 },
    VariableElliptic,
    VariableOrderZero,
    /// `Σ_j c_j e^{ijx}·f(k)` with `modes` as `[j, re, im]`.
    Custom { order: f64, profile: Profile, modes: Vec<(i64, f64, f64)> },
}

fn one() -> usize {
    1
}

impl SymbolSpec {
    pub fn build(&self) -> Result<MatrixSymbol> {
        Ok(match self {
            SymbolSpec::Identity { rank } => MatrixSymbol::identity(*rank),
            SymbolSpec::Multiplier { order } => MatrixSymbol::multiplier(*order),
            SymbolSpec::Derivative => MatrixSymbol::derivative(),
            SymbolSpec::DerivativePlusCos => MatrixSymbol::derivative_plus_cos(),
            SymbolSpec::Winding { w } => MatrixSymbol::winding(*w),
            SymbolSpec::VariableElliptic => MatrixSymbol::variable_elliptic(),
            SymbolSpec::VariableOrderZero => MatrixSymbol::variable_order_zero(),
            SymbolSpec::Custom { order, profile, modes } => {
                let modes: Vec<_> = modes.iter().map(|&(j, re, im)| (j, Complex64::new(re, im))).collect();
                MatrixSymbol::scalar(*order, &modes, profile.clone())?
            }
        })
    }

    pub fn label(&self) -> String {
        match self {
            SymbolSpec::Identity { rank } => format!("identity-{rank}"),
            SymbolSpec::Multiplier { order } => format!("multiplier-{order}"),
            SymbolSpec::Derivative => "derivative".into(),
            SymbolSpec::DerivativePlusCos => "derivative-plus-cos".into(),
            SymbolSpec::Winding { w } => format!("winding-{w}"),
            SymbolSpec::VariableElliptic => "variable-elliptic".into(),
            SymbolSpec::VariableOrderZero => "variable-order-zero".into(),
            SymbolSpec::Custom { order, .. } => format!("custom-{order}"),
        }
    }
}
