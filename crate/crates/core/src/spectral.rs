//! Truncated Fourier model of `H^{s,φ}` on the torus `𝕋ⁿ` (`n ∈ {1, 2}`) and
//! on periodization boxes of length `L` standing in for compactly supported
//! functions on the line.
//!
//! Coefficients are normalized as `û(k) = L^{-n} ∫ u e^{-iξ_k·x}` with
//! `ξ_k = 2πk/L`, so `u(x) = Σ û(k) e^{iξ_k·x}`. Lattice sums carry the
//! quadrature constant `(L/2π)ⁿ`, which is 1 on the standard torus.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::weights::SlowVaryWeight;

/// All `k ∈ ℤⁿ` with `|k|_∞ ≤ N`, ordered lexicographically from `(−N, …)`.
/// The order is symmetric: index `i` and `len − 1 − i` hold `k` and `−k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyLattice {
    dim: usize,
    cutoff: usize,
    box_length: f64,
    frequencies: Vec<[i64; 2]>,
    brackets: Vec<f64>,
}

impl FrequencyLattice {
    pub fn new(dim: usize, cutoff: usize, box_length: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Parameter(format!("lattice dimension {dim} not in {{1, 2}}")));
        }
        if cutoff == 0 {
            return Err(Error::Parameter("lattice cutoff must be positive".into()));
        }
        if !(box_length > 0.0) || !box_length.is_finite() {
            return Err(Error::Parameter(format!("box length {box_length} must be positive")));
        }
        let n = cutoff as i64;
        let frequencies: Vec<[i64; 2]> = if dim == 1 {
            (-n..=n).map(|k| [k, 0]).collect()
        } else {
            (-n..=n).flat_map(|a| (-n..=n).map(move |b| [a, b])).collect()
        };
        let scale = 2.0 * std::f64::consts::PI / box_length;
        let brackets = frequencies
            .iter()
            .map(|k| {
                let x = scale * k[0] as f64;
                let y = scale * k[1] as f64;
                (1.0 + x * x + y * y).sqrt()
            })
            .collect();
        Ok(Self {
            dim,
            cutoff,
            box_length,
            frequencies,
            brackets,
        })
    }

    /// Standard torus `ℝⁿ/2πℤⁿ`.
    pub fn torus(dim: usize, cutoff: usize) -> Result<Self> {
        Self::new(dim, cutoff, 2.0 * std::f64::consts::PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn frequencies(&self) -> &[[i64; 2]] {
        &self.frequencies
    }

    pub fn brackets(&self) -> &[f64] {
        &self.brackets
    }

    /// Angular frequency `ξ_k = 2πk/L` per axis.
    pub fn xi(&self, index: usize) -> [f64; 2] {
        let scale = 2.0 * std::f64::consts::PI / self.box_length;
        let k = self.frequencies[index];
        [scale * k[0] as f64, scale * k[1] as f64]
    }

    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        let n = self.cutoff as i64;
        let side = 2 * self.cutoff + 1;
        match (self.dim, k) {
            (1, [a]) | (1, [a, 0]) if a.abs() <= n => Some((a + n) as usize),
            (2, [a, b]) if a.abs() <= n && b.abs() <= n => Some((a + n) as usize * side + (b + n) as usize),
            _ => None,
        }
    }

    /// Index of `−k`.
    pub fn negated(&self, index: usize) -> usize {
        self.len() - 1 - index
    }

    /// `(L/2π)ⁿ`.
    pub fn quadrature_constant(&self) -> f64 {
        (self.box_length / (2.0 * std::f64::consts::PI)).powi(self.dim as i32)
    }

    /// `⟨k⟩^s φ(⟨k⟩)` per lattice point.
    pub fn weight_profile(&self, s: f64, w: &SlowVaryWeight) -> Vec<f64> {
        self.brackets
            .iter()
            .map(|&b| b.powf(s) * w.value_unchecked(b))
            .collect()
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.dim == other.dim && self.cutoff == other.cutoff && self.box_length == other.box_length
    }
}

/// Coefficient vector on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunction {
    lattice: Arc<FrequencyLattice>,
    coeffs: Vec<Complex64>,
    real: bool,
}

impl SpectralFunction {
    pub fn new(lattice: Arc<FrequencyLattice>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != lattice.len() {
            return Err(Error::Shape(format!(
                "{} coefficients for a lattice of {} points",
                coeffs.len(),
                lattice.len()
            )));
        }
        Ok(Self {
            lattice,
            coeffs,
            real: false,
        })
    }

    pub fn zeros(lattice: Arc<FrequencyLattice>) -> Self {
        let n = lattice.len();
        Self {
            lattice,
            coeffs: vec![Complex64::new(0.0, 0.0); n],
            real: false,
        }
    }

    pub fn from_fn(lattice: Arc<FrequencyLattice>, f: impl Fn([i64; 2]) -> Complex64) -> Self {
        let coeffs = lattice.frequencies().iter().map(|&k| f(k)).collect();
        Self {
            lattice,
            coeffs,
            real: false,
        }
    }

    /// Single Fourier mode `value·e^{iξ_k·x}`.
    pub fn mode(lattice: Arc<FrequencyLattice>, k: &[i64], value: Complex64) -> Result<Self> {
        let idx = lattice
            .index_of(k)
            .ok_or_else(|| Error::Shape(format!("frequency {k:?} outside the lattice")))?;
        let mut u = Self::zeros(lattice);
        u.coeffs[idx] = value;
        Ok(u)
    }

    /// Marks the function as real-valued after checking `û(−k) = conj û(k)`.
    pub fn into_real(mut self, tolerance: f64) -> Result<Self> {
        let scale = self.coeffs.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        for i in 0..self.coeffs.len() {
            let j = self.lattice.negated(i);
            if (self.coeffs[i] - self.coeffs[j].conj()).norm() > tolerance * scale.max(1.0) {
                return Err(Error::Consistency(format!(
                    "coefficients at {:?} and its negative are not conjugate",
                    self.lattice.frequencies()[i]
                )));
            }
        }
        self.real = true;
        Ok(self)
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn lattice(&self) -> &Arc<FrequencyLattice> {
        &self.lattice
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        self.real = false;
        &mut self.coeffs
    }

    pub fn coefficient(&self, k: &[i64]) -> Option<Complex64> {
        self.lattice.index_of(k).map(|i| self.coeffs[i])
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            lattice: self.lattice.clone(),
            coeffs: self.coeffs.iter().map(|&c| c * factor).collect(),
            real: self.real && factor.im == 0.0,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_lattices(self, other)?;
        Ok(Self {
            lattice: self.lattice.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
            real: self.real && other.real,
        })
    }

    /// Fourier multiplier `û(k) ↦ m(k)·û(k)`.
    pub fn multiply(&self, m: impl Fn(usize) -> Complex64) -> Self {
        Self {
            lattice: self.lattice.clone(),
            coeffs: self.coeffs.iter().enumerate().map(|(i, &c)| m(i) * c).collect(),
            real: false,
        }
    }
}

fn check_lattices(u: &SpectralFunction, v: &SpectralFunction) -> Result<()> {
    if Arc::ptr_eq(&u.lattice, &v.lattice) || u.lattice.same_shape(&v.lattice) {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "lattices differ: n={} N={} L={} vs n={} N={} L={}",
            u.lattice.dim,
            u.lattice.cutoff,
            u.lattice.box_length,
            v.lattice.dim,
            v.lattice.cutoff,
            v.lattice.box_length
        )))
    }
}

/// Sum of complex terms with the same reduction tree as [`pairwise_sum`].
pub fn pairwise_sum_complex(values: &[Complex64]) -> Complex64 {
    let re: Vec<f64> = values.iter().map(|z| z.re).collect();
    let im: Vec<f64> = values.iter().map(|z| z.im).collect();
    Complex64::new(pairwise_sum(&re), pairwise_sum(&im))
}

/// `(c Σ ⟨k⟩^{2s} φ²(⟨k⟩) |û(k)|²)^{1/2}`.
pub fn hs_phi_norm(u: &SpectralFunction, s: f64, w: &SlowVaryWeight) -> f64 {
    let profile = u.lattice.weight_profile(s, w);
    norm_with_profile(u, &profile)
}

/// Plain Sobolev norm `‖u‖_s`.
pub fn hs_norm(u: &SpectralFunction, s: f64) -> f64 {
    hs_phi_norm(u, s, &SlowVaryWeight::constant())
}

/// Weighted norm with a precomputed `⟨k⟩^s φ(⟨k⟩)` profile.
pub fn norm_with_profile(u: &SpectralFunction, profile: &[f64]) -> f64 {
    let terms: Vec<f64> = u
        .coeffs
        .iter()
        .zip(profile)
        .map(|(c, &p)| (p * c.norm()).powi(2))
        .collect();
    (u.lattice.quadrature_constant() * pairwise_sum(&terms)).sqrt()
}

pub fn inner_product(u: &SpectralFunction, v: &SpectralFunction, s: f64, w: &SlowVaryWeight) -> Result<Complex64> {
    check_lattices(u, v)?;
    let profile = u.lattice.weight_profile(s, w);
    let terms: Vec<Complex64> = u
        .coeffs
        .iter()
        .zip(&v.coeffs)
        .zip(&profile)
        .map(|((a, b), &p)| a * b.conj() * (p * p))
        .collect();
    Ok(pairwise_sum_complex(&terms) * u.lattice.quadrature_constant())
}

/// Sesquilinear `L²` pairing `c Σ û(k) conj v̂(k)`, which extends to the
/// duality between `H^{s,φ}` and `H^{−s,1/φ}`.
pub fn duality_pairing(u: &SpectralFunction, v: &SpectralFunction) -> Result<Complex64> {
    check_lattices(u, v)?;
    let terms: Vec<Complex64> = u.coeffs.iter().zip(&v.coeffs).map(|(a, b)| a * b.conj()).collect();
    Ok(pairwise_sum_complex(&terms) * u.lattice.quadrature_constant())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityReport {
    pub pairing_abs: f64,
    /// `‖u‖_{s,φ}·‖v‖_{−s,1/φ}`.
    pub bound: f64,
    /// `|⟨u,v⟩| / bound`; never above 1 in the lattice model.
    pub ratio: f64,
    pub holds: bool,
}

pub fn duality_bound(u: &SpectralFunction, v: &SpectralFunction, s: f64, w: &SlowVaryWeight) -> Result<DualityReport> {
    let pairing_abs = duality_pairing(u, v)?.norm();
    let bound = hs_phi_norm(u, s, w) * hs_phi_norm(v, -s, &w.reciprocal());
    let ratio = if bound > 0.0 { pairing_abs / bound } else { 0.0 };
    Ok(DualityReport {
        pairing_abs,
        bound,
        ratio,
        holds: pairing_abs <= bound * (1.0 + 1e-13),
    })
}

/// Diagonal data of the identity map `H^{s+ε,φ₁} → H^{s,φ}` on a lattice.
#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingData {
    /// `max_k ρ(k)` over the lattice.
    pub operator_norm: f64,
    /// `ρ(k) = ⟨k⟩^{−ε} φ(⟨k⟩)/φ₁(⟨k⟩)` sorted descending.
    pub profile: Vec<f64>,
    /// Whether `ρ(t)` stays bounded as `t → ∞`; `false` means the lattice
    /// norm grows without limit as `N` grows.
    pub bounded: bool,
}

/// `ln ρ(t)` as a function of `ln t`.
fn ln_rho(eps: f64, source: &SlowVaryWeight, target: &SlowVaryWeight, ln_t: f64) -> f64 {
    -eps * ln_t + target.ln_value_at_ln(ln_t) - source.ln_value_at_ln(ln_t)
}

pub fn embedding_operator_data(
    lattice: &FrequencyLattice,
    eps: f64,
    source_weight: &SlowVaryWeight,
    target_weight: &SlowVaryWeight,
) -> EmbeddingData {
    let mut profile: Vec<f64> = lattice
        .brackets()
        .iter()
        .map(|&b| ln_rho(eps, source_weight, target_weight, b.ln()).exp())
        .collect();
    profile.sort_by(|a, b| b.total_cmp(a));
    let operator_norm = profile[0];
    let bounded = if eps > 0.0 {
        true
    } else {
        // far beyond any lattice: a bounded ratio cannot exceed the
        // lattice maximum by a large factor out there
        let far = [1e3, 1e6, 1e12]
            .iter()
            .map(|&u| ln_rho(eps, source_weight, target_weight, u))
            .fold(f64::NEG_INFINITY, f64::max);
        far <= operator_norm.ln() + 2f64.ln()
    };
    EmbeddingData {
        operator_norm,
        profile,
        bounded,
    }
}

/// Number of samples per axis used for sup-norms: 8× the Nyquist count.
pub fn oversampled_points(cutoff: usize) -> usize {
    8 * (2 * cutoff + 1)
}

/// Samples of `u` on the uniform grid `x_j = jL/M`, row-major for `n = 2`.
pub fn sample_on_grid(u: &SpectralFunction, m: usize) -> Vec<Complex64> {
    sample_with_multiplier(u, m, |_| Complex64::new(1.0, 0.0))
}

fn sample_with_multiplier(u: &SpectralFunction, m: usize, mult: impl Fn(usize) -> Complex64) -> Vec<Complex64> {
    let lat = &u.lattice;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(m);
    let wrap = |k: i64| k.rem_euclid(m as i64) as usize;
    if lat.dim == 1 {
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (i, k) in lat.frequencies.iter().enumerate() {
            buf[wrap(k[0])] += u.coeffs[i] * mult(i);
        }
        fft.process(&mut buf);
        buf
    } else {
        let mut grid = vec![Complex64::new(0.0, 0.0); m * m];
        for (i, k) in lat.frequencies.iter().enumerate() {
            grid[wrap(k[0]) * m + wrap(k[1])] += u.coeffs[i] * mult(i);
        }
        for row in grid.chunks_mut(m) {
            fft.process(row);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); m];
        for c in 0..m {
            for r in 0..m {
                column[r] = grid[r * m + c];
            }
            fft.process(&mut column);
            for r in 0..m {
                grid[r * m + c] = column[r];
            }
        }
        grid
    }
}

/// `Σ_{|μ|≤q} sup |∂^μ u|` with the sup taken over an 8×-oversampled grid.
pub fn sup_and_cq_seminorms(u: &SpectralFunction, q: i32) -> Result<f64> {
    if q < 0 {
        return Err(Error::Parameter(format!("derivative order q = {q} must be nonnegative")));
    }
    let q = q as u32;
    let m = oversampled_points(u.lattice.cutoff);
    let lat = u.lattice.clone();
    let mut total = 0.0;
    let multi_indices: Vec<[u32; 2]> = if lat.dim == 1 {
        (0..=q).map(|a| [a, 0]).collect()
    } else {
        (0..=q).flat_map(|a| (0..=q - a).map(move |b| [a, b])).collect()
    };
    for mu in multi_indices {
        let samples = sample_with_multiplier(u, m, |i| {
            let xi = lat.xi(i);
            Complex64::new(0.0, xi[0]).powu(mu[0]) * Complex64::new(0.0, xi[1]).powu(mu[1])
        });
        total += samples.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    }
    Ok(total)
}

/// Writes `k…, re, im` rows with a header.
pub fn write_csv<W: Write>(u: &SpectralFunction, mut out: W) -> Result<()> {
    if u.lattice.dim == 1 {
        writeln!(out, "k,re,im")?;
    } else {
        writeln!(out, "k1,k2,re,im")?;
    }
    for (k, c) in u.lattice.frequencies.iter().zip(&u.coeffs) {
        if u.lattice.dim == 1 {
            writeln!(out, "{},{},{}", k[0], c.re, c.im)?;
        } else {
            writeln!(out, "{},{},{},{}", k[0], k[1], c.re, c.im)?;
        }
    }
    Ok(())
}

/// Reads rows written by [`write_csv`]; absent frequencies are zero.
pub fn read_csv<R: Read>(lattice: Arc<FrequencyLattice>, input: R) -> Result<SpectralFunction> {
    let mut u = SpectralFunction::zeros(lattice.clone());
    let width = lattice.dim + 2;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    for (n, record) in reader.records().enumerate() {
        let line = n + 2;
        let record = record.map_err(|e| Error::Config(format!("line {line}: {e}")))?;
        if record.len() != width {
            return Err(Error::Config(format!("line {line}: expected {width} columns")));
        }
        let bad = |what: &str| Error::Config(format!("line {line}: invalid {what}"));
        let k: Vec<i64> = (0..lattice.dim)
            .map(|i| record[i].parse::<i64>().map_err(|_| bad("frequency")))
            .collect::<Result<_>>()?;
        let re: f64 = record[lattice.dim].parse().map_err(|_| bad("real part"))?;
        let im: f64 = record[lattice.dim + 1].parse().map_err(|_| bad("imaginary part"))?;
        let idx = lattice
            .index_of(&k)
            .ok_or_else(|| Error::Shape(format!("line {line}: frequency {k:?} outside the lattice")))?;
        u.coeffs[idx] = Complex64::new(re, im);
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn torus1(n: usize) -> Arc<FrequencyLattice> {
        Arc::new(FrequencyLattice::torus(1, n).unwrap())
    }

    #[test]
    fn lattice_layout() {
        let lat = FrequencyLattice::torus(2, 3).unwrap();
        assert_eq!(lat.len(), 49);
        for i in 0..lat.len() {
            let k = lat.frequencies()[i];
            let j = lat.negated(i);
            assert_eq!(lat.frequencies()[j], [-k[0], -k[1]]);
            assert_eq!(lat.index_of(&k), Some(i));
            assert!(lat.brackets()[i] >= 1.0);
        }
        assert_eq!(lat.brackets()[lat.index_of(&[0, 0]).unwrap()], 1.0);
        assert!(FrequencyLattice::torus(3, 4).is_err());
    }

    #[test]
    fn norm_examples() {
        let lat = torus1(8);
        let log = SlowVaryWeight::log_power(1.0);
        let zero_mode = SpectralFunction::mode(lat.clone(), &[0], c(1.0, 0.0)).unwrap();
        assert_eq!(hs_phi_norm(&zero_mode, 3.0, &SlowVaryWeight::constant()), 1.0);
        assert_eq!(hs_phi_norm(&zero_mode, -2.0, &log), log.eval(1.0).unwrap());

        let one = SpectralFunction::mode(lat.clone(), &[1], c(1.0, 0.0)).unwrap();
        assert!((hs_norm(&one, 2.0) - 2.0).abs() < 1e-14);

        let pair = SpectralFunction::from_fn(lat, |k| if k[0].abs() == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let phi = log.eval(2f64.sqrt()).unwrap();
        let expected = (2.0 * 2.0 * phi * phi).sqrt();
        assert!((hs_phi_norm(&pair, 1.0, &log) - expected).abs() < 1e-14);
    }

    #[test]
    fn inner_product_examples() {
        let lat = torus1(6);
        let w = SlowVaryWeight::iterated_log(vec![1.0, 0.5]).unwrap();
        let u = SpectralFunction::mode(lat.clone(), &[2], c(1.0, 1.0)).unwrap();
        let v = SpectralFunction::mode(lat.clone(), &[-3], c(2.0, 0.0)).unwrap();
        assert_eq!(inner_product(&u, &v, 1.0, &w).unwrap(), c(0.0, 0.0));
        let n = hs_phi_norm(&u, 1.3, &w);
        assert!((inner_product(&u, &u, 1.3, &w).unwrap().re / (n * n) - 1.0).abs() < 1e-14);

        let a = SpectralFunction::from_fn(lat.clone(), |k| match k[0] {
            1 => c(1.0, -2.0),
            4 => c(0.5, 0.0),
            _ => c(0.0, 0.0),
        });
        let b = SpectralFunction::from_fn(lat, |k| match k[0] {
            1 => c(0.0, 1.0),
            4 => c(3.0, 1.0),
            _ => c(0.0, 0.0),
        });
        let weight = |k: f64| {
            let t = (1.0 + k * k).sqrt();
            t.powf(1.5) * w.eval(t).unwrap()
        };
        let oracle = c(1.0, -2.0) * c(0.0, -1.0) * weight(1.0).powi(2) + c(0.5, 0.0) * c(3.0, -1.0) * weight(4.0).powi(2);
        let got = inner_product(&a, &b, 1.5, &w).unwrap();
        assert!((got - oracle).norm() < 1e-12 * oracle.norm());
    }

    #[test]
    fn mismatched_lattices_are_rejected() {
        let u = SpectralFunction::zeros(torus1(4));
        let v = SpectralFunction::zeros(torus1(5));
        assert!(matches!(inner_product(&u, &v, 0.0, &SlowVaryWeight::constant()), Err(Error::Shape(_))));
        assert!(matches!(SpectralFunction::new(torus1(2), vec![c(0.0, 0.0); 3]), Err(Error::Shape(_))));
    }

    #[test]
    fn duality_examples() {
        let lat = torus1(64);
        let w = SlowVaryWeight::log_power(1.0);
        let u = SpectralFunction::from_fn(lat.clone(), |k| c(1.0 / (1.0 + k[0].abs() as f64).powi(2), 0.3));
        let flat = duality_bound(&u, &u, 0.0, &SlowVaryWeight::constant()).unwrap();
        assert!((flat.ratio - 1.0).abs() < 1e-14);

        let s = 1.5;
        let profile = lat.weight_profile(s, &w);
        let v = u.multiply(|i| c(profile[i] * profile[i], 0.0));
        let extremal = duality_bound(&u, &v, s, &w).unwrap();
        assert!((extremal.ratio - 1.0).abs() < 1e-12);

        let v = SpectralFunction::from_fn(lat, |k| c((k[0] as f64).sin(), (k[0] as f64 * 0.7).cos()));
        let generic = duality_bound(&u, &v, s, &w).unwrap();
        assert!(generic.holds && generic.ratio < 1.0);
    }

    #[test]
    fn embedding_examples() {
        let lat = FrequencyLattice::torus(1, 4).unwrap();
        let one = SlowVaryWeight::constant();
        let log = SlowVaryWeight::log_power(1.0);
        let same = embedding_operator_data(&lat, 0.5, &log, &log);
        assert_eq!(same.operator_norm, 1.0);
        let flat = embedding_operator_data(&lat, 1.0, &one, &one);
        assert!((flat.profile.last().unwrap() - 1.0 / 17f64.sqrt()).abs() < 1e-15);
        let critical = embedding_operator_data(&FrequencyLattice::torus(1, 64).unwrap(), 0.0, &one, &log);
        assert!(!critical.bounded);
        assert!(embedding_operator_data(&lat, 0.0, &log, &log).bounded);
    }

    #[test]
    fn sup_examples() {
        let lat = torus1(5);
        let one = SpectralFunction::mode(lat.clone(), &[0], c(1.0, 0.0)).unwrap();
        assert!((sup_and_cq_seminorms(&one, 0).unwrap() - 1.0).abs() < 1e-14);
        let cos = SpectralFunction::from_fn(lat.clone(), |k| if k[0].abs() == 1 { c(0.5, 0.0) } else { c(0.0, 0.0) })
            .into_real(1e-15)
            .unwrap();
        assert!((sup_and_cq_seminorms(&cos, 1).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(sup_and_cq_seminorms(&cos, -1), Err(Error::Parameter(_))));

        let lat2 = Arc::new(FrequencyLattice::torus(2, 3).unwrap());
        let wave = SpectralFunction::mode(lat2, &[1, 2], c(1.0, 0.0)).unwrap();
        // |u| = 1, |∂₁u| = 1, |∂₂u| = 2
        assert!((sup_and_cq_seminorms(&wave, 1).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sharpness_family_partial_sums() {
        let seminorms = |kmax: usize| {
            let lat = torus1(kmax);
            let u = SpectralFunction::from_fn(lat, |k| {
                let k = k[0];
                if k >= 2 {
                    c(1.0 / (k as f64 * (k as f64).ln()), 0.0)
                } else {
                    c(0.0, 0.0)
                }
            });
            (hs_norm(&u, 0.5), sup_and_cq_seminorms(&u, 0).unwrap())
        };
        let (h_small, sup_small) = seminorms(1 << 8);
        let (h_large, sup_large) = seminorms(1 << 12);
        let oracle_sup: f64 = (2..=(1 << 12)).map(|k: usize| 1.0 / (k as f64 * (k as f64).ln())).sum();
        assert!((sup_large - oracle_sup).abs() < 1e-10 * oracle_sup);
        assert!(h_large / h_small < 1.02);
        assert!(sup_large / sup_small > 1.1);
    }

    #[test]
    fn csv_round_trip() {
        let lat = Arc::new(FrequencyLattice::torus(2, 2).unwrap());
        let u = SpectralFunction::from_fn(lat.clone(), |k| c(k[0] as f64 / 3.0, -(k[1] as f64) * 0.1));
        let mut buf = Vec::new();
        write_csv(&u, &mut buf).unwrap();
        let back = read_csv(lat, buf.as_slice()).unwrap();
        assert_eq!(back.coeffs(), u.coeffs());
    }

    fn coeffs_strategy(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2 * n + 1)
    }

    proptest! {
        #[test]
        fn norm_monotone_in_s_and_scales_with_phi(raw in coeffs_strategy(12), s in -2.0..2.0f64, ds in 0.0..1.5f64, factor in 0.1..10.0f64) {
            let lat = torus1(12);
            let u = SpectralFunction::new(lat, raw.iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            let w = SlowVaryWeight::iterated_log(vec![0.7, -0.4]).unwrap();
            prop_assert!(hs_phi_norm(&u, s + ds, &w) >= hs_phi_norm(&u, s, &w) * (1.0 - 1e-14));
            let scaled = w.clone().scaled(factor).unwrap();
            let ratio = hs_phi_norm(&u, s, &scaled) / hs_phi_norm(&u, s, &w);
            prop_assert!((ratio / factor - 1.0).abs() < 1e-13);
        }

        #[test]
        fn embedding_chain_with_lattice_constants(raw in coeffs_strategy(16), s in -1.0..2.0f64, eps in 0.05..1.5f64, r in -2.0..2.0f64) {
            let lat = torus1(16);
            let u = SpectralFunction::new(lat.clone(), raw.iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            let w = SlowVaryWeight::log_power(r);
            let one = SlowVaryWeight::constant();
            let c1 = embedding_operator_data(&lat, eps, &one, &w).operator_norm;
            let c2 = embedding_operator_data(&lat, eps, &w, &one).operator_norm;
            prop_assert!(hs_phi_norm(&u, s, &w) <= c1 * hs_norm(&u, s + eps) * (1.0 + 1e-13));
            prop_assert!(hs_norm(&u, s - eps) <= c2 * hs_phi_norm(&u, s, &w) * (1.0 + 1e-13));
        }

        #[test]
        fn parseval_consistency(raw in coeffs_strategy(10)) {
            let u = SpectralFunction::new(torus1(10), raw.iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            let p = duality_pairing(&u, &u).unwrap();
            let n = hs_norm(&u, 0.0);
            prop_assert!((p.re - n * n).abs() <= 1e-14 * n * n.max(1e-300) + 1e-300);
            prop_assert!(p.im.abs() <= 1e-15 * n * n + 1e-300);
        }

        #[test]
        fn compactness_profile(eps in 0.5..1.5f64, r in -1.0..0.45f64) {
            // r < ε keeps ρ decreasing in ⟨k⟩, so ranks are comparable across N
            let phi = SlowVaryWeight::log_power(r);
            let one = SlowVaryWeight::constant();
            let small = embedding_operator_data(&FrequencyLattice::torus(1, 16).unwrap(), eps, &one, &phi);
            let large = embedding_operator_data(&FrequencyLattice::torus(1, 32).unwrap(), eps, &one, &phi);
            prop_assert!(small.profile.windows(2).all(|p| p[1] <= p[0]));
            for rank in 0..small.profile.len() {
                prop_assert!((small.profile[rank] - large.profile[rank]).abs() <= 1e-15 * large.profile[rank]);
            }
            prop_assert!(large.profile.last().unwrap() < small.profile.last().unwrap());
        }
    }
}
