//! Smooth complex vector bundles of rank 1 or 2 over the circle.
//!
//! A bundle is described by a clutching matrix `G`: global sections are
//! quasi-periodic maps `u: ℝ → ℂ^p` with `u(x + 2π) = G·u(x)`. A chart is an
//! arc `(c − h, c + h)` with parameter `t = x − c` and a gauge `h(t) ∈ GL(p)`;
//! its local components are `h(t)·u(c + t)`. Transition matrices on overlaps
//! are then `h_l(t_l)·Gⁿ·h_j(t_j)⁻¹`, which satisfy the cocycle condition by
//! construction.
//!
//! Everything is sampled on one uniform grid of `M` points on the circle;
//! chart centers sit on grid points, so overlap data never needs
//! interpolation. A chart window holds the `2W + 1` grid points strictly
//! inside the arc and is embedded in a periodization box of `B = 4W + 3`
//! points (box length about twice the window).

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::spectral::{self, FrequencyLattice, SpectralFunction};
use crate::weights::SlowVaryWeight;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Global twist of the bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Clutching {
    /// `G = I_p`.
    Trivial { rank: usize },
    /// Rank 1 with `G = −1` (the Möbius line bundle).
    Twisted,
    /// Rank 2 with `G` the rotation by `angle`.
    Rotation { angle: f64 },
}

impl Clutching {
    pub fn rank(&self) -> usize {
        match self {
            Clutching::Trivial { rank } => *rank,
            Clutching::Twisted => 1,
            Clutching::Rotation { .. } => 2,
        }
    }

    pub fn matrix(&self) -> CMat {
        match self {
            Clutching::Trivial { rank } => CMat::identity(*rank, *rank),
            Clutching::Twisted => CMat::from_element(1, 1, Complex64::new(-1.0, 0.0)),
            Clutching::Rotation { angle } => rotation(*angle),
        }
    }

    /// Eigen-angles `γ_r` and unitary eigenvectors `W` with `G = W e^{iγ} W*`.
    fn eigen(&self) -> (Vec<f64>, CMat) {
        match self {
            Clutching::Trivial { rank } => (vec![0.0; *rank], CMat::identity(*rank, *rank)),
            Clutching::Twisted => (vec![std::f64::consts::PI], CMat::identity(1, 1)),
            Clutching::Rotation { angle } => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let w = CMat::from_row_slice(
                    2,
                    2,
                    &[Complex64::new(s, 0.0), Complex64::new(s, 0.0), Complex64::new(0.0, -s), Complex64::new(0.0, s)],
                );
                (vec![*angle, -*angle], w)
            }
        }
    }
}

fn rotation(theta: f64) -> CMat {
    let (s, c) = theta.sin_cos();
    CMat::from_row_slice(
        2,
        2,
        &[Complex64::new(c, 0.0), Complex64::new(-s, 0.0), Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    )
}

/// Chart trivialization `h(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Gauge {
    Identity,
    /// `(1 + a·sin t)·I` with `|a| < 1`.
    Scale { amplitude: f64 },
    /// Rotation by `rate·t` (rank 2 only).
    Rotation { rate: f64 },
}

impl Gauge {
    fn matrix(&self, rank: usize, t: f64) -> CMat {
        match self {
            Gauge::Identity => CMat::identity(rank, rank),
            Gauge::Scale { amplitude } => CMat::identity(rank, rank).scale(1.0 + amplitude * t.sin()),
            Gauge::Rotation { rate } => rotation(rate * t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub center: f64,
    /// Half-width `h < π` of the arc.
    pub half_width: f64,
    /// Half-width of the partition bump; must stay below `half_width`.
    pub bump_half_width: f64,
    #[serde(default = "identity_gauge")]
    pub gauge: Gauge,
}

fn identity_gauge() -> Gauge {
    Gauge::Identity
}

fn default_box_factor() -> f64 {
    2.0
}

/// Structured description of a bundle with its atlas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSpec {
    pub clutching: Clutching,
    pub charts: Vec<ChartSpec>,
    /// Periodization box length over chart window length.
    #[serde(default = "default_box_factor")]
    pub box_factor: f64,
}

impl BundleSpec {
    /// Two charts centered at `offset` and `offset + π`.
    pub fn two_chart(clutching: Clutching, offset: f64, bump_half_width: f64) -> Self {
        let chart = |center| ChartSpec {
            center,
            half_width: 0.8 * std::f64::consts::PI,
            bump_half_width,
            gauge: Gauge::Identity,
        };
        Self {
            clutching,
            charts: vec![chart(offset), chart(offset + std::f64::consts::PI)],
            box_factor: 2.0,
        }
    }

    /// Shipped models by name: `trivial`, `trivial-rank2`, `twisted`,
    /// `rotation`, with a standard two-chart atlas.
    pub fn named(name: &str) -> Result<Self> {
        let bump = 0.65 * std::f64::consts::PI;
        match name {
            "trivial" => Ok(Self::two_chart(Clutching::Trivial { rank: 1 }, 0.0, bump)),
            "trivial-rank2" => Ok(Self::two_chart(Clutching::Trivial { rank: 2 }, 0.0, bump)),
            "twisted" => Ok(Self::two_chart(Clutching::Twisted, 0.0, bump)),
            "rotation" => {
                let mut spec = Self::two_chart(Clutching::Rotation { angle: std::f64::consts::PI / 3.0 }, 0.0, bump);
                spec.charts[1].gauge = Gauge::Rotation { rate: 0.5 };
                spec.charts[0].gauge = Gauge::Scale { amplitude: 0.3 };
                Ok(spec)
            }
            other => Err(Error::Config(format!("unknown bundle model '{other}'"))),
        }
    }

    pub const NAMES: [&'static str; 4] = ["trivial", "trivial-rank2", "twisted", "rotation"];

    /// Same bundle, chart centers shifted by `angle`.
    pub fn rotated(&self, angle: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.charts {
            c.center += angle;
        }
        out
    }

    /// Same bundle, every partition bump narrowed to `bump_half_width`.
    pub fn with_bumps(&self, bump_half_width: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.charts {
            c.bump_half_width = bump_half_width;
        }
        out
    }
}

/// The standard mollifier profile `exp(−1/(1−y²))` on `|y| < 1`.
pub fn mollifier(y: f64) -> f64 {
    if y.abs() < 1.0 {
        (-1.0 / (1.0 - y * y)).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for `x ≤ 0`, 1 for `x ≥ 1`.
pub fn smooth_step(x: f64) -> f64 {
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let a = f(x);
    let b = f(1.0 - x);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Support cutoff: 1 on `|t| ≤ inner`, decaying smoothly to 0 at `outer`.
fn plateau(t: f64, inner: f64, outer: f64) -> f64 {
    let a = t.abs();
    if a <= inner {
        1.0
    } else if a >= outer {
        0.0
    } else {
        smooth_step((outer - a) / (outer - inner))
    }
}

/// Which charts contain a grid point, with local indices and wrap counts.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Membership {
    chart: usize,
    local: i64,
    /// Unreduced coordinate `c_j + t` in grid steps.
    unreduced: i64,
}

/// Discretized bundle with atlas, partition of unity and cutoffs.
#[derive(Debug)]
pub struct BundleModel {
    spec: BundleSpec,
    rank: usize,
    resolution: usize,
    grid_points: usize,
    window: i64,
    box_points: usize,
    center_steps: Vec<i64>,
    /// `χ_j(c_j + t_i)` for `i = −W..=W`.
    chi: Vec<Vec<f64>>,
    /// `η_j(t_i)`.
    eta: Vec<Vec<f64>>,
    gauges: Vec<Vec<CMat>>,
    gauge_inverses: Vec<Vec<CMat>>,
    clutching: CMat,
    clutching_inverse: CMat,
    eigen_angles: Vec<f64>,
    eigen_vectors: CMat,
    members: Vec<Vec<Membership>>,
    lattice: Arc<FrequencyLattice>,
}

impl BundleModel {
    /// Builds the model at resolution `N`: the grid has at least `8(2N+1)`
    /// points, enough for sections of band `≤ N` at 8× oversampling.
    pub fn new(spec: BundleSpec, resolution: usize) -> Result<Arc<Self>> {
        let rank = spec.clutching.rank();
        if !(1..=2).contains(&rank) {
            return Err(Error::Model(format!("rank {rank} not supported")));
        }
        if spec.charts.len() < 2 {
            return Err(Error::Model("an atlas needs at least two charts".into()));
        }
        if resolution == 0 {
            return Err(Error::Parameter("resolution must be positive".into()));
        }
        if !(spec.box_factor >= 1.0) {
            return Err(Error::Model(format!("box factor {} below 1", spec.box_factor)));
        }
        for (j, c) in spec.charts.iter().enumerate() {
            if !(c.half_width > 0.0 && c.half_width < std::f64::consts::PI) {
                return Err(Error::Model(format!("chart {j}: half width {} not in (0, π)", c.half_width)));
            }
            if !(c.bump_half_width > 0.0 && c.bump_half_width < c.half_width) {
                return Err(Error::Model(format!("chart {j}: bump must lie strictly inside the chart")));
            }
            match c.gauge {
                Gauge::Rotation { .. } if rank != 2 => {
                    return Err(Error::Model(format!("chart {j}: rotation gauge needs rank 2")))
                }
                Gauge::Scale { amplitude } if !(amplitude.abs() < 1.0) => {
                    return Err(Error::Model(format!("chart {j}: scale amplitude must be below 1")))
                }
                _ => {}
            }
        }
        let grid_points = aligned_grid(&spec, 8 * (2 * resolution + 1))?;
        let step = TWO_PI / grid_points as f64;
        let center_steps: Vec<i64> = spec.charts.iter().map(|c| (c.center / step).round() as i64).collect();
        let min_half = spec.charts.iter().map(|c| c.half_width).fold(f64::INFINITY, f64::min);
        let window = ((min_half / step).ceil() as i64 - 1).max(1);
        let box_points = {
            let b = (spec.box_factor * (2 * window + 1) as f64).ceil() as usize;
            b + (1 - b % 2)
        };

        // partition of unity from mollifier bumps on the circle
        let raw_bump = |j: usize, m: i64| {
            let c = &spec.charts[j];
            let d = circular_offset(m, center_steps[j], grid_points) as f64 * step;
            mollifier(d / c.bump_half_width)
        };
        let mut sums = vec![0.0; grid_points];
        for (m, sum) in sums.iter_mut().enumerate() {
            *sum = (0..spec.charts.len()).map(|j| raw_bump(j, m as i64)).sum();
        }
        if let Some(m) = sums.iter().position(|&s| !(s > 1e-12)) {
            return Err(Error::Model(format!(
                "partition bumps do not cover the circle near x = {:.4}",
                m as f64 * step
            )));
        }
        let n_charts = spec.charts.len();
        let mut chi = vec![vec![0.0; (2 * window + 1) as usize]; n_charts];
        let mut eta = chi.clone();
        let mut gauges = vec![Vec::with_capacity((2 * window + 1) as usize); n_charts];
        let mut gauge_inverses = gauges.clone();
        let mut members = vec![Vec::new(); grid_points];
        for j in 0..n_charts {
            let c = &spec.charts[j];
            let outer = c.bump_half_width + 0.85 * (c.half_width - c.bump_half_width);
            for i in -window..=window {
                let idx = (i + window) as usize;
                let unreduced = center_steps[j] + i;
                let m = unreduced.rem_euclid(grid_points as i64);
                chi[j][idx] = raw_bump(j, m) / sums[m as usize];
                let t = i as f64 * step;
                eta[j][idx] = plateau(t, c.bump_half_width, outer);
                let g = c.gauge.matrix(rank, t);
                gauge_inverses[j].push(linalg::inverse(&g)?);
                gauges[j].push(g);
                members[m as usize].push(Membership {
                    chart: j,
                    local: i,
                    unreduced,
                });
            }
            // every point of supp χ_j must sit in the window with η_j = 1
            for m in 0..grid_points as i64 {
                if raw_bump(j, m) > 0.0 && !members[m as usize].iter().any(|p| p.chart == j) {
                    return Err(Error::Model(format!("chart {j}: bump support leaves the window")));
                }
            }
        }
        if let Some(m) = members.iter().position(|v| v.is_empty()) {
            return Err(Error::Model(format!("charts do not cover grid point {m}")));
        }
        let clutching = spec.clutching.matrix();
        let clutching_inverse = linalg::inverse(&clutching)?;
        let (eigen_angles, eigen_vectors) = spec.clutching.eigen();
        let lattice = Arc::new(FrequencyLattice::new(1, (box_points - 1) / 2, box_points as f64 * step)?);
        Ok(Arc::new(Self {
            spec,
            rank,
            resolution,
            grid_points,
            window,
            box_points,
            center_steps,
            chi,
            eta,
            gauges,
            gauge_inverses,
            clutching,
            clutching_inverse,
            eigen_angles,
            eigen_vectors,
            members,
            lattice,
        }))
    }

    pub fn spec(&self) -> &BundleSpec {
        &self.spec
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn charts(&self) -> usize {
        self.spec.charts.len()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    pub fn step(&self) -> f64 {
        TWO_PI / self.grid_points as f64
    }

    /// Half-size `W` of the chart windows in grid steps.
    pub fn window(&self) -> i64 {
        self.window
    }

    pub fn window_len(&self) -> usize {
        (2 * self.window + 1) as usize
    }

    pub fn box_lattice(&self) -> &Arc<FrequencyLattice> {
        &self.lattice
    }

    /// Partition function `χ_j` on chart `j`'s window.
    pub fn partition(&self, chart: usize) -> &[f64] {
        &self.chi[chart]
    }

    /// Support cutoff `η_j` on chart `j`'s window.
    pub fn support_cutoff(&self, chart: usize) -> &[f64] {
        &self.eta[chart]
    }

    /// Largest deviation of `Σ_j χ_j` from 1 over the grid.
    pub fn partition_defect(&self) -> f64 {
        self.members
            .iter()
            .map(|ms| {
                let s: f64 = ms.iter().map(|p| self.chi[p.chart][(p.local + self.window) as usize]).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    fn clutching_power(&self, n: i64) -> CMat {
        let base = if n >= 0 { &self.clutching } else { &self.clutching_inverse };
        (0..n.unsigned_abs()).fold(CMat::identity(self.rank, self.rank), |acc, _| acc * base)
    }

    /// Transition matrix from chart `from` to chart `to` at a shared grid
    /// point, or `None` if the point is not in both charts.
    pub fn transition(&self, to: usize, from: usize, grid_index: usize) -> Option<CMat> {
        let ms = &self.members[grid_index];
        let a = ms.iter().find(|p| p.chart == to)?;
        let b = ms.iter().find(|p| p.chart == from)?;
        Some(self.transition_between(a, b))
    }

    fn transition_between(&self, to: &Membership, from: &Membership) -> CMat {
        let wraps = (to.unreduced - from.unreduced).div_euclid(self.grid_points as i64);
        let w = self.window;
        &self.gauges[to.chart][(to.local + w) as usize]
            * self.clutching_power(wraps)
            * &self.gauge_inverses[from.chart][(from.local + w) as usize]
    }

    /// Largest cocycle defect `‖g_lj g_jm − g_lm‖` over triple overlaps.
    pub fn cocycle_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for ms in &self.members {
            for a in ms {
                for b in ms {
                    for c in ms {
                        let lhs = self.transition_between(a, b) * self.transition_between(b, c);
                        worst = worst.max(linalg::max_abs(&(lhs - self.transition_between(a, c))));
                    }
                }
            }
        }
        worst
    }

    /// Fiber value of a global section at the unreduced coordinate `x`.
    pub fn evaluate(&self, u: &GlobalSection, x: f64) -> Vec<Complex64> {
        let mut fiber = vec![Complex64::new(0.0, 0.0); self.rank];
        for r in 0..self.rank {
            let shift = self.eigen_angles[r] / TWO_PI;
            let mut acc = Complex64::new(0.0, 0.0);
            for (idx, c) in u.component(r).iter().enumerate() {
                let k = idx as f64 - u.band as f64;
                acc += c * Complex64::from_polar(1.0, (k + shift) * x);
            }
            for (q, f) in fiber.iter_mut().enumerate() {
                *f += self.eigen_vectors[(q, r)] * acc;
            }
        }
        fiber
    }

    /// Local components of a global section on every chart window.
    pub fn sample(self: &Arc<Self>, u: &GlobalSection) -> Result<BundleSection> {
        if u.rank != self.rank {
            return Err(Error::Model(format!("section of rank {} on a rank-{} bundle", u.rank, self.rank)));
        }
        let step = self.step();
        let mut local = vec![vec![vec![Complex64::new(0.0, 0.0); self.window_len()]; self.rank]; self.charts()];
        for j in 0..self.charts() {
            for i in -self.window..=self.window {
                let idx = (i + self.window) as usize;
                let x = (self.center_steps[j] + i) as f64 * step;
                let fiber = self.evaluate(u, x);
                let g = &self.gauges[j][idx];
                for r in 0..self.rank {
                    local[j][r][idx] = (0..self.rank).map(|q| g[(r, q)] * fiber[q]).sum();
                }
            }
        }
        Ok(BundleSection {
            model: self.clone(),
            local,
        })
    }

    /// Chart function on the periodization box from its samples at the
    /// window points `t_i = iΔ`, `|i| ≤ W`; zero elsewhere in the box.
    pub fn chart_function(&self, window_samples: &[Complex64]) -> Result<SpectralFunction> {
        if window_samples.len() != self.window_len() {
            return Err(Error::Shape(format!(
                "{} samples for a window of {}",
                window_samples.len(),
                self.window_len()
            )));
        }
        Ok(self.to_box(window_samples))
    }

    /// Chart parameters `t_i` of the window points.
    pub fn window_coordinates(&self) -> Vec<f64> {
        (-self.window..=self.window).map(|i| i as f64 * self.step()).collect()
    }

    fn to_box(&self, window_samples: &[Complex64]) -> SpectralFunction {
        let b = self.box_points;
        let offset = (b - 1) / 2 - self.window as usize;
        let mut buf = vec![Complex64::new(0.0, 0.0); b];
        buf[offset..offset + window_samples.len()].copy_from_slice(window_samples);
        let mut planner = FftPlanner::<f64>::new();
        planner.plan_fft_forward(b).process(&mut buf);
        let n = (b - 1) / 2;
        let coeffs = (0..b)
            .map(|idx| {
                let k = idx as i64 - n as i64;
                buf[k.rem_euclid(b as i64) as usize] / b as f64
            })
            .collect();
        SpectralFunction::new(self.lattice.clone(), coeffs).expect("box lattice size")
    }

    /// Box samples of a chart function; returns `(window part, leakage)`.
    fn from_box(&self, w: &SpectralFunction) -> Result<(Vec<Complex64>, f64)> {
        if w.lattice().len() != self.box_points || w.lattice().box_length() != self.lattice.box_length() {
            return Err(Error::Shape("chart function is not on this model's periodization box".into()));
        }
        let samples = spectral::sample_on_grid(w, self.box_points);
        let offset = (self.box_points - 1) / 2 - self.window as usize;
        let window_part = samples[offset..offset + self.window_len()].to_vec();
        let leak = samples[..offset]
            .iter()
            .chain(&samples[offset + self.window_len()..])
            .fold(0.0f64, |a, z| a.max(z.norm()));
        Ok((window_part, leak))
    }

    /// Sewing: `Σ_j` of chart data cut off by `η_j` and carried to every
    /// chart by the transition matrices. Data leaking outside a chart window
    /// is a support error.
    pub fn sew(self: &Arc<Self>, w: &[SpectralFunction]) -> Result<BundleSection> {
        let expected = self.charts() * self.rank;
        if w.len() != expected {
            return Err(Error::Shape(format!("{} chart functions, expected {expected}", w.len())));
        }
        let mut windows = Vec::with_capacity(expected);
        for (idx, f) in w.iter().enumerate() {
            let (part, leak) = self.from_box(f)?;
            let scale = part.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(leak);
            if leak > 1e-10 * scale.max(f64::MIN_POSITIVE) && leak > 0.0 {
                return Err(Error::Support(format!(
                    "chart {} fiber {}: mass {leak:e} outside the chart window",
                    idx / self.rank,
                    idx % self.rank
                )));
            }
            windows.push(part);
        }
        let mut local = vec![vec![vec![Complex64::new(0.0, 0.0); self.window_len()]; self.rank]; self.charts()];
        let wl = self.window;
        for ms in &self.members {
            for target in ms {
                let ti = (target.local + wl) as usize;
                for source in ms {
                    let si = (source.local + wl) as usize;
                    let eta = self.eta[source.chart][si];
                    if eta == 0.0 {
                        continue;
                    }
                    let g = self.transition_between(target, source);
                    for r in 0..self.rank {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for q in 0..self.rank {
                            acc += g[(r, q)] * windows[source.chart * self.rank + q][si];
                        }
                        local[target.chart][r][ti] += acc * eta;
                    }
                }
            }
        }
        Ok(BundleSection {
            model: self.clone(),
            local,
        })
    }

    /// Gram matrix of the `H^{s,φ}` bundle inner product over `basis`.
    pub fn gram_form(self: &Arc<Self>, basis: &[GlobalSection], s: f64, w: &SlowVaryWeight) -> Result<CMat> {
        let profile = self.lattice.weight_profile(s, w);
        let c = self.lattice.quadrature_constant().sqrt();
        let rows = self.charts() * self.rank * self.lattice.len();
        let mut f = CMat::zeros(rows, basis.len());
        for (col, u) in basis.iter().enumerate() {
            let flat = self.sample(u)?.flatten()?;
            for (block, g) in flat.iter().enumerate() {
                for (i, z) in g.coeffs().iter().enumerate() {
                    f[(block * self.lattice.len() + i, col)] = z * (c * profile[i]);
                }
            }
        }
        Ok(linalg::symmetrize(&(f.adjoint() * f)))
    }

    /// Single-mode sections of band `≤ band`, fiber-major.
    pub fn band_limited_basis(&self, band: usize) -> Vec<GlobalSection> {
        let mut out = Vec::with_capacity(self.rank * (2 * band + 1));
        for r in 0..self.rank {
            for k in 0..2 * band + 1 {
                let mut u = GlobalSection::zeros(self.rank, band);
                u.coeffs[r * (2 * band + 1) + k] = Complex64::new(1.0, 0.0);
                out.push(u);
            }
        }
        out
    }
}

/// Signed offset of grid index `m` from `center` on the circle, in steps.
fn circular_offset(m: i64, center: i64, points: usize) -> i64 {
    let n = points as i64;
    let d = (m - center).rem_euclid(n);
    if d > n / 2 {
        d - n
    } else {
        d
    }
}

/// Smallest grid size `≥ minimum` on which every chart center is a grid
/// point.
fn aligned_grid(spec: &BundleSpec, minimum: usize) -> Result<usize> {
    for m in minimum..minimum * 64 {
        let step = TWO_PI / m as f64;
        if spec.charts.iter().all(|c| {
            let q = c.center / step;
            (q - q.round()).abs() < 1e-7
        }) {
            return Ok(m);
        }
    }
    Err(Error::Model("chart centers do not align with any grid near the requested resolution".into()))
}

/// Band-limited global section in the clutching eigenframe:
/// `u(x) = Σ_r Σ_{|k|≤band} c_{r,k} e^{i(k+γ_r/2π)x} W e_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSection {
    rank: usize,
    band: usize,
    coeffs: Vec<Complex64>,
}

impl GlobalSection {
    pub fn zeros(rank: usize, band: usize) -> Self {
        Self {
            rank,
            band,
            coeffs: vec![Complex64::new(0.0, 0.0); rank * (2 * band + 1)],
        }
    }

    /// From coefficients laid out fiber-major, `k = −band..=band`.
    pub fn from_coeffs(rank: usize, band: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != rank * (2 * band + 1) {
            return Err(Error::Shape(format!(
                "{} coefficients for rank {rank} and band {band}",
                coeffs.len()
            )));
        }
        Ok(Self { rank, band, coeffs })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn component(&self, r: usize) -> &[Complex64] {
        let n = 2 * self.band + 1;
        &self.coeffs[r * n..(r + 1) * n]
    }

    pub fn set(&mut self, r: usize, k: i64, value: Complex64) {
        let n = 2 * self.band + 1;
        self.coeffs[r * n + (k + self.band as i64) as usize] = value;
    }

    /// Pseudo-random section with `|c_{r,k}| = ⟨k⟩^{−decay}` and uniform
    /// phases. Phases are drawn in the order `k = 0, 1, −1, 2, −2, …`, so
    /// sections of different bands from the same `(seed, sample)` share
    /// their low modes.
    pub fn random(seed: u64, sample: u64, rank: usize, band: usize, decay: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sample);
        let mut u = Self::zeros(rank, band);
        let order = std::iter::once(0i64).chain((1..=band as i64).flat_map(|k| [k, -k]));
        for k in order {
            for r in 0..rank {
                let phase: f64 = rng.gen_range(0.0..TWO_PI);
                let modulus = (1.0 + (k * k) as f64).powf(-decay / 2.0);
                u.set(r, k, Complex64::from_polar(modulus, phase));
            }
        }
        u
    }
}

/// Per-chart, per-fiber samples of a section on the chart windows.
#[derive(Debug, Clone)]
pub struct BundleSection {
    model: Arc<BundleModel>,
    /// `local[j][r][i + W]`.
    local: Vec<Vec<Vec<Complex64>>>,
}

impl BundleSection {
    pub fn zeros(model: &Arc<BundleModel>) -> Self {
        Self {
            model: model.clone(),
            local: vec![vec![vec![Complex64::new(0.0, 0.0); model.window_len()]; model.rank]; model.charts()],
        }
    }

    pub fn from_local(model: &Arc<BundleModel>, local: Vec<Vec<Vec<Complex64>>>) -> Result<Self> {
        let ok = local.len() == model.charts()
            && local.iter().all(|c| c.len() == model.rank && c.iter().all(|f| f.len() == model.window_len()));
        if !ok {
            return Err(Error::Shape("local data does not match the atlas".into()));
        }
        Ok(Self {
            model: model.clone(),
            local,
        })
    }

    pub fn model(&self) -> &Arc<BundleModel> {
        &self.model
    }

    pub fn local(&self, chart: usize, fiber: usize) -> &[Complex64] {
        &self.local[chart][fiber]
    }

    pub fn max_abs(&self) -> f64 {
        self.local
            .iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |a, z| a.max(z.norm()))
    }

    /// Largest overlap mismatch `|u_l − g_lj u_j|` relative to the section's
    /// size.
    pub fn overlap_defect(&self) -> f64 {
        let m = &self.model;
        let w = m.window;
        let mut worst: f64 = 0.0;
        for ms in &m.members {
            for a in ms {
                for b in ms {
                    if a.chart == b.chart {
                        continue;
                    }
                    let g = m.transition_between(a, b);
                    let bi = (b.local + w) as usize;
                    let ai = (a.local + w) as usize;
                    for r in 0..m.rank {
                        let mapped: Complex64 = (0..m.rank).map(|q| g[(r, q)] * self.local[b.chart][q][bi]).sum();
                        worst = worst.max((mapped - self.local[a.chart][r][ai]).norm());
                    }
                }
            }
        }
        worst / self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Chart functions `u_{j,r} = (χ_j u)_r` on the periodization boxes,
    /// chart-major.
    pub fn flatten(&self) -> Result<Vec<SpectralFunction>> {
        let defect = self.overlap_defect();
        if defect > 1e-10 {
            return Err(Error::Consistency(format!("overlap mismatch {defect:e}")));
        }
        Ok(self.flatten_unchecked())
    }

    fn flatten_unchecked(&self) -> Vec<SpectralFunction> {
        let m = &self.model;
        let mut out = Vec::with_capacity(m.charts() * m.rank);
        for j in 0..m.charts() {
            for r in 0..m.rank {
                let samples: Vec<Complex64> = self.local[j][r].iter().zip(&m.chi[j]).map(|(z, &c)| z * c).collect();
                out.push(m.to_box(&samples));
            }
        }
        out
    }

    /// Largest difference of local samples against another section on the
    /// same model.
    pub fn max_difference(&self, other: &BundleSection) -> Result<f64> {
        same_model(self, other)?;
        Ok(self
            .local
            .iter()
            .flatten()
            .flatten()
            .zip(other.local.iter().flatten().flatten())
            .fold(0.0f64, |a, (x, y)| a.max((x - y).norm())))
    }
}

fn same_model(u: &BundleSection, v: &BundleSection) -> Result<()> {
    if Arc::ptr_eq(&u.model, &v.model) {
        Ok(())
    } else {
        Err(Error::Model("sections live on different bundle models".into()))
    }
}

/// `(Σ_{j,r} ‖w_{j,r}‖²_{s,φ})^{1/2}` over flattened chart functions.
pub fn flattened_norm(flat: &[SpectralFunction], s: f64, w: &SlowVaryWeight) -> f64 {
    let squares: Vec<f64> = flat.iter().map(|f| spectral::hs_phi_norm(f, s, w).powi(2)).collect();
    linalg::pairwise_sum(&squares).sqrt()
}

pub fn bundle_norm(u: &BundleSection, s: f64, w: &SlowVaryWeight) -> Result<f64> {
    Ok(flattened_norm(&u.flatten()?, s, w))
}

pub fn bundle_inner_product(u: &BundleSection, v: &BundleSection, s: f64, w: &SlowVaryWeight) -> Result<Complex64> {
    same_model(u, v)?;
    let (fu, fv) = (u.flatten()?, v.flatten()?);
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in fu.iter().zip(&fv) {
        acc += spectral::inner_product(a, b, s, w)?;
    }
    Ok(acc)
}

/// `∫_{S¹} ⟨u(x), v(x)⟩_x dx` with the fiber metric averaged over the
/// trivializations by the partition of unity.
pub fn hermitian_pairing(u: &BundleSection, v: &BundleSection) -> Result<Complex64> {
    same_model(u, v)?;
    let m = &u.model;
    let mut terms = Vec::new();
    for j in 0..m.charts() {
        for (i, &chi) in m.chi[j].iter().enumerate() {
            if chi == 0.0 {
                continue;
            }
            let dot: Complex64 = (0..m.rank).map(|r| u.local[j][r][i] * v.local[j][r][i].conj()).sum();
            terms.push(dot * chi);
        }
    }
    Ok(spectral::pairwise_sum_complex(&terms) * m.step())
}

/// `Σ_{j,r}` of chart-wise `C^q` seminorms of the flattened components.
pub fn cq_norm(u: &BundleSection, q: i32) -> Result<f64> {
    let mut total = 0.0;
    for f in u.flatten()? {
        total += spectral::sup_and_cq_seminorms(&f, q)?;
    }
    Ok(total)
}

/// Range of `‖u‖_A / ‖u‖_B` over a sample of global sections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioBracket {
    pub ratio_min: f64,
    pub ratio_max: f64,
}

impl RatioBracket {
    pub fn from_ratios(ratios: impl IntoIterator<Item = f64>) -> Self {
        let mut out = Self {
            ratio_min: f64::INFINITY,
            ratio_max: 0.0,
        };
        for r in ratios {
            out.ratio_min = out.ratio_min.min(r);
            out.ratio_max = out.ratio_max.max(r);
        }
        out
    }
}

pub fn atlas_independence_test(
    sections: &[GlobalSection],
    model_a: &Arc<BundleModel>,
    model_b: &Arc<BundleModel>,
    s: f64,
    w: &SlowVaryWeight,
) -> Result<RatioBracket> {
    if model_a.rank != model_b.rank || model_a.spec.clutching != model_b.spec.clutching {
        return Err(Error::Model("atlases describe different bundles".into()));
    }
    let mut ratios = Vec::with_capacity(sections.len());
    for u in sections {
        let a = bundle_norm(&model_a.sample(u)?, s, w)?;
        let b = bundle_norm(&model_b.sample(u)?, s, w)?;
        if b > 0.0 {
            ratios.push(a / b);
        }
    }
    Ok(RatioBracket::from_ratios(ratios))
}
