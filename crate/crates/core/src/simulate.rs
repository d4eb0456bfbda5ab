//! Exact samplers: Poisson, determinantal (spectral algorithm), Gaussian
//! fields by harmonic expansion, thinnings and log-Gaussian Cox processes.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::harmonics::{legendre_sum, HarmonicTable, MAX_DEGREE};
use crate::models::{multiquadric_betas, Model, RadialFunction, Spectrum};
use crate::rng::{SeedTree, Stream};
use crate::sphere::{deterministic_grid, uniform_point, PointPattern, UnitVector};

/// Intensity of a Poisson process.
pub enum Intensity<'a> {
    Constant(f64),
    /// Bounded intensity function; `bound` must dominate `f` everywhere.
    Bounded {
        f: &'a (dyn Fn(&UnitVector) -> f64 + Sync),
        bound: f64,
    },
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<usize> {
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean)
        .map_err(|e| Error::input(format!("bad Poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as usize)
}

/// Poisson process on the sphere.
pub fn sim_poisson<R: Rng + ?Sized>(intensity: &Intensity<'_>, rng: &mut R) -> Result<PointPattern> {
    match intensity {
        Intensity::Constant(rho) => {
            if !(*rho >= 0.0 && rho.is_finite()) {
                return Err(Error::input(format!("intensity must be non-negative, got {rho}")));
            }
            let n = poisson_count(4.0 * PI * rho, rng)?;
            Ok(PointPattern::from_points_unchecked(
                (0..n).map(|_| uniform_point(rng)).collect(),
            ))
        }
        Intensity::Bounded { f, bound } => {
            if !(*bound >= 0.0 && bound.is_finite()) {
                return Err(Error::input(format!("intensity bound must be non-negative, got {bound}")));
            }
            let n = poisson_count(4.0 * PI * bound, rng)?;
            let mut points = Vec::new();
            for _ in 0..n {
                let x = uniform_point(rng);
                let u: f64 = rng.random();
                let value = f(&x);
                if !(value >= 0.0) {
                    return Err(Error::input(format!("negative intensity {value} at {x:?}")));
                }
                if value > bound * (1.0 + 1e-12) {
                    return Err(Error::input(format!(
                        "intensity {value} exceeds the supplied bound {bound}"
                    )));
                }
                if u * bound < value {
                    points.push(x);
                }
            }
            Ok(PointPattern::from_points_unchecked(points))
        }
    }
}

/// Real orthonormal harmonics selected for a projection DPP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EigenSelection {
    indices: Vec<(usize, i64)>,
}

impl EigenSelection {
    pub fn new(mut indices: Vec<(usize, i64)>) -> Result<Self> {
        for &(l, k) in &indices {
            if l > MAX_DEGREE {
                return Err(Error::DegreeTooHigh {
                    degree: l,
                    max: MAX_DEGREE,
                });
            }
            if k.unsigned_abs() as usize > l {
                return Err(Error::input(format!("order {k} exceeds degree {l}")));
            }
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(EigenSelection { indices })
    }

    pub fn indices(&self) -> &[(usize, i64)] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn max_degree(&self) -> usize {
        self.indices.iter().map(|&(l, _)| l).max().unwrap_or(0)
    }

    /// `sum` over degrees with at least one selection of `(2l+1)/(4 pi)`,
    /// which dominates the squared feature norm by the addition formula.
    fn envelope(&self) -> f64 {
        let mut degrees: Vec<usize> = self.indices.iter().map(|&(l, _)| l).collect();
        degrees.dedup();
        degrees.iter().map(|&l| (2 * l + 1) as f64 / (4.0 * PI)).sum()
    }

    fn features(&self, x: &UnitVector, out: &mut [f64]) {
        let table = HarmonicTable::new_unchecked(self.max_degree(), x);
        for (o, &(l, k)) in out.iter_mut().zip(&self.indices) {
            *o = table.real(l, k);
        }
    }
}

/// Includes each eigenfunction `(l, k)` independently with probability
/// `alpha_l`.
pub fn select_eigenfunctions<R: Rng + ?Sized>(spectrum: &Spectrum, rng: &mut R) -> Result<EigenSelection> {
    spectrum.require_dpp()?;
    let mut indices = Vec::new();
    for (l, &alpha) in spectrum.alphas().iter().enumerate() {
        for k in -(l as i64)..=l as i64 {
            if rng.random::<f64>() < alpha {
                indices.push((l, k));
            }
        }
    }
    EigenSelection::new(indices)
}

const REORTHOGONALIZE_EVERY: usize = 32;
const MAX_PROPOSALS: u64 = 10_000_000;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal rows spanning the part of the feature space not yet used
/// by accepted points. The conditional density at `x` is proportional to
/// the squared norm of the coordinates of `v(x)` in this basis.
struct Complement {
    dim: usize,
    rows: usize,
    e: Vec<f64>,
}

impl Complement {
    fn identity(dim: usize) -> Self {
        let mut e = vec![0.0; dim * dim];
        for i in 0..dim {
            e[i * dim + i] = 1.0;
        }
        Complement { dim, rows: dim, e }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.e[i * self.dim..(i + 1) * self.dim]
    }

    fn coordinates(&self, v: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.rows).map(|i| dot(self.row(i), v)));
    }

    /// Removes the direction with coordinates `c` by a Householder
    /// reflection that maps it onto the last row, then drops that row.
    fn remove(&mut self, c: &[f64]) {
        let r = self.rows;
        let norm = dot(c, c).sqrt();
        let mut u: Vec<f64> = c.iter().map(|x| x / norm).collect();
        let sign = if u[r - 1] >= 0.0 { 1.0 } else { -1.0 };
        u[r - 1] += sign;
        let un = dot(&u, &u);
        if un > 0.0 {
            let mut w = vec![0.0; self.dim];
            for (i, &ui) in u.iter().enumerate() {
                if ui != 0.0 {
                    for (wj, ej) in w.iter_mut().zip(self.row(i)) {
                        *wj += ui * ej;
                    }
                }
            }
            let scale = 2.0 / un;
            for (i, &ui) in u.iter().enumerate().take(r - 1) {
                if ui != 0.0 {
                    let f = scale * ui;
                    let row = &mut self.e[i * self.dim..(i + 1) * self.dim];
                    for (ej, wj) in row.iter_mut().zip(&w) {
                        *ej -= f * wj;
                    }
                }
            }
        }
        self.rows -= 1;
        self.e.truncate(self.rows * self.dim);
    }

    /// Modified Gram-Schmidt pass over the rows.
    fn reorthonormalize(&mut self) {
        let d = self.dim;
        for i in 0..self.rows {
            let (done, rest) = self.e.split_at_mut(i * d);
            let row = &mut rest[..d];
            for j in 0..i {
                let prev = &done[j * d..(j + 1) * d];
                let c = dot(prev, row);
                for (x, p) in row.iter_mut().zip(prev) {
                    *x -= c * p;
                }
            }
            let norm = dot(row, row).sqrt();
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
}

/// Projection DPP spanned by the selected real harmonics, sampled point by
/// point from the conditional densities with uniform proposals.
pub fn sample_projection<R: Rng + ?Sized>(selection: &EigenSelection, rng: &mut R) -> Result<PointPattern> {
    let n = selection.len();
    if n == 0 {
        return Ok(PointPattern::empty());
    }
    let bound = selection.envelope();
    let mut complement = Complement::identity(n);
    let mut points = Vec::with_capacity(n);
    let mut v = vec![0.0; n];
    let mut c = Vec::with_capacity(n);
    for j in 0..n {
        let mut proposals = 0u64;
        loop {
            if proposals >= MAX_PROPOSALS {
                return Err(Error::Numeric(format!(
                    "rejection sampler degenerate at point {} of {n}: no acceptance in {proposals} proposals",
                    j + 1
                )));
            }
            proposals += 1;
            let x = uniform_point(rng);
            let u = rng.random::<f64>() * bound;
            selection.features(&x, &mut v);
            if u >= dot(&v, &v) {
                continue;
            }
            complement.coordinates(&v, &mut c);
            if u < dot(&c, &c) {
                complement.remove(&c);
                points.push(x);
                break;
            }
        }
        if (j + 1) % REORTHOGONALIZE_EVERY == 0 {
            complement.reorthonormalize();
        }
    }
    Ok(PointPattern::from_points_unchecked(points))
}

/// DPP with the given spectrum, drawing selection and points from one
/// generator.
pub fn sim_dpp<R: Rng + ?Sized>(spectrum: &Spectrum, rng: &mut R) -> Result<PointPattern> {
    let selection = select_eigenfunctions(spectrum, rng)?;
    sample_projection(&selection, rng)
}

/// Zero-mean isotropic Gaussian field given by its Mercer coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFieldSpec {
    alphas: Vec<f64>,
    kappa: f64,
}

/// Fraction of the variance the truncated expansion must retain.
pub const FIELD_COVERAGE: f64 = 0.99;

impl GaussianFieldSpec {
    /// `kappa` is the untruncated variance `K0(0)`; the truncated
    /// variance must be at least 99% of it.
    pub fn new(spectrum: Spectrum, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::model(format!("kappa must be non-negative, got {kappa}")));
        }
        let field = GaussianFieldSpec {
            alphas: spectrum.alphas().to_vec(),
            kappa,
        };
        let var = field.variance();
        if var < FIELD_COVERAGE * kappa * (1.0 - 1e-12) {
            return Err(Error::model(format!(
                "truncated variance {var} is below {FIELD_COVERAGE} of kappa = {kappa}"
            )));
        }
        if var > kappa * (1.0 + 1e-9) {
            return Err(Error::model(format!(
                "truncated variance {var} exceeds kappa = {kappa}"
            )));
        }
        Ok(field)
    }

    /// Field with covariance `kappa R0(s)`, `R0` the multiquadric
    /// correlation, truncated at the first degree retaining 99% of the
    /// variance.
    pub fn multiquadric(kappa: f64, tau: f64, delta: f64) -> Result<Self> {
        Self::multiquadric_with_coverage(kappa, tau, delta, FIELD_COVERAGE)
    }

    pub fn multiquadric_with_coverage(kappa: f64, tau: f64, delta: f64, coverage: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::model("tau must be positive"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::model("delta must lie in (0,1)"));
        }
        if !(FIELD_COVERAGE..=1.0).contains(&coverage) {
            return Err(Error::model(format!("coverage must lie in [{FIELD_COVERAGE}, 1]")));
        }
        let betas = multiquadric_betas(tau, delta, MAX_DEGREE)?;
        let mut cumulative = 0.0;
        let mut alphas = Vec::new();
        for (l, b) in betas.iter().enumerate() {
            cumulative += b;
            alphas.push(4.0 * PI * kappa * b / (2 * l + 1) as f64);
            if cumulative >= coverage {
                break;
            }
        }
        Self::new(Spectrum::new(alphas)?, kappa)
    }

    /// Identically zero field.
    pub fn zero() -> Self {
        GaussianFieldSpec {
            alphas: vec![0.0],
            kappa: 0.0,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn truncation(&self) -> usize {
        self.alphas.len() - 1
    }

    /// Variance of the truncated field.
    pub fn variance(&self) -> f64 {
        self.alphas
            .iter()
            .enumerate()
            .map(|(l, a)| (2 * l + 1) as f64 * a)
            .sum::<f64>()
            / (4.0 * PI)
    }

    /// Covariance of the truncated field at geodesic distance `s`.
    pub fn covariance(&self, s: f64) -> f64 {
        let c: Vec<f64> = self
            .alphas
            .iter()
            .enumerate()
            .map(|(l, a)| (2 * l + 1) as f64 * a / (4.0 * PI))
            .collect();
        legendre_sum(&c, s.cos())
    }

    /// Correlation of the truncated field; identically zero when the
    /// field vanishes.
    pub fn correlation(&self, s: f64) -> f64 {
        let var = self.variance();
        if var == 0.0 {
            0.0
        } else {
            self.covariance(s) / var
        }
    }
}

/// One draw of a Gaussian field: standard normal coefficients per `(l, k)`.
#[derive(Debug, Clone)]
pub struct GaussianFieldRealization {
    sqrt_alphas: Vec<f64>,
    w1: Vec<f64>,
    w2: Vec<f64>,
}

impl GaussianFieldRealization {
    #[inline]
    fn index(l: usize, k: i64) -> usize {
        ((l * l + l) as i64 + k) as usize
    }

    /// `(W1, W2)` for `(l, k)`.
    pub fn coefficients(&self, l: usize, k: i64) -> (f64, f64) {
        let i = Self::index(l, k);
        (self.w1[i], self.w2[i])
    }

    pub fn eval(&self, x: &UnitVector) -> f64 {
        let l_max = self.sqrt_alphas.len() - 1;
        let table = HarmonicTable::new_unchecked(l_max, x);
        let mut z = 0.0;
        for (l, &sa) in self.sqrt_alphas.iter().enumerate() {
            if sa == 0.0 {
                continue;
            }
            let mut block = 0.0;
            for k in -(l as i64)..=l as i64 {
                let (re, im) = table.re_im(l, k);
                let i = Self::index(l, k);
                block += self.w1[i] * re + self.w2[i] * im;
            }
            z += sa * block;
        }
        z
    }
}

/// Draws the coefficients of the harmonic expansion.
pub fn sim_gaussian_field<R: Rng + ?Sized>(spec: &GaussianFieldSpec, rng: &mut R) -> GaussianFieldRealization {
    let l_max = spec.truncation();
    let size = (l_max + 1) * (l_max + 1);
    let mut w1 = Vec::with_capacity(size);
    let mut w2 = Vec::with_capacity(size);
    for _ in 0..size {
        w1.push(rng.sample(StandardNormal));
        w2.push(rng.sample(StandardNormal));
    }
    GaussianFieldRealization {
        sqrt_alphas: spec.alphas.iter().map(|a| a.sqrt()).collect(),
        w1,
        w2,
    }
}

/// Mean retention probability `(1 + kappa)^{-1/2}` of the chi-square
/// thinning.
pub fn retention_probability(kappa: f64) -> f64 {
    (1.0 + kappa).powf(-0.5)
}

/// Keeps `x` when `exp(-Z(x)^2 / 2) >= U(x)` for one field draw `Z`
/// and independent uniforms `U`. Field coefficients and uniforms come from
/// separate generators.
pub fn pi_thinning_chi2_streams<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    pattern: &PointPattern,
    field: &GaussianFieldSpec,
    field_rng: &mut R1,
    uniform_rng: &mut R2,
) -> PointPattern {
    let z = sim_gaussian_field(field, field_rng);
    let kept = pattern
        .iter()
        .filter(|x| {
            let u: f64 = uniform_rng.random();
            (-0.5 * z.eval(x).powi(2)).exp() >= u
        })
        .copied()
        .collect();
    PointPattern::from_points_unchecked(kept)
}

pub fn pi_thinning_chi2<R: Rng + ?Sized>(
    pattern: &PointPattern,
    field: &GaussianFieldSpec,
    rng: &mut R,
) -> PointPattern {
    let z = sim_gaussian_field(field, rng);
    let kept = pattern
        .iter()
        .filter(|x| {
            let u: f64 = rng.random();
            (-0.5 * z.eval(x).powi(2)).exp() >= u
        })
        .copied()
        .collect();
    PointPattern::from_points_unchecked(kept)
}

/// Keeps each point independently with probability `p(x)`.
pub fn independent_thinning<R, P>(pattern: &PointPattern, p: P, rng: &mut R) -> Result<PointPattern>
where
    R: Rng + ?Sized,
    P: Fn(&UnitVector) -> f64,
{
    let mut kept = Vec::new();
    for x in pattern.iter() {
        let px = p(x);
        if !(0.0..=1.0).contains(&px) {
            return Err(Error::input(format!("retention probability {px} outside [0, 1]")));
        }
        let u: f64 = rng.random();
        if u < px {
            kept.push(*x);
        }
    }
    Ok(PointPattern::from_points_unchecked(kept))
}

/// Pair correlation of the chi-square thinning of `Y` at distance `s`:
/// `M0(s) g_Y(s)` with `M0 = [1 - R0(s)^2 / (1 + 1/kappa)^2]^{-1/2}`.
pub fn thinned_pcf(kappa: f64, r0_z: &RadialFunction, g0_y: &RadialFunction, s: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::input(format!("kappa must be positive, got {kappa}")));
    }
    let r = r0_z.eval(s);
    if r.abs() > 1.0 + 1e-12 {
        return Err(Error::input(format!("|R0({s})| = {} exceeds 1", r.abs())));
    }
    let ratio = r * r / (1.0 + 1.0 / kappa).powi(2);
    assert!(ratio < 1.0, "R0^2/(1+1/kappa)^2 must be below 1 for finite kappa");
    Ok((1.0 - ratio).powf(-0.5) * g0_y.eval(s))
}

const LGCP_GRID: usize = 4096;
const LGCP_SAFETY: f64 = 1.2;

/// Log-Gaussian Cox process with log-intensity `xi(x) + Z(x)`.
///
/// The dominating rate is the maximum of `exp(Y)` over a Fibonacci grid
/// times a safety factor; points where `exp(Y)` still exceeds it are kept
/// with probability one and reported through `log::warn`.
pub fn sim_lgcp<R, M>(mean: M, field: &GaussianFieldSpec, rng: &mut R) -> Result<PointPattern>
where
    R: Rng + ?Sized,
    M: Fn(&UnitVector) -> f64,
{
    let z = sim_gaussian_field(field, rng);
    let log_intensity = |x: &UnitVector| mean(x) + z.eval(x);
    let mut sup = f64::NEG_INFINITY;
    for g in deterministic_grid(LGCP_GRID) {
        let m = mean(&g);
        if !m.is_finite() {
            return Err(Error::input(format!("mean function is not finite at {g:?}")));
        }
        sup = sup.max(m + z.eval(&g));
    }
    let bound = LGCP_SAFETY * sup.exp();
    if !bound.is_finite() {
        return Err(Error::Numeric("dominating intensity overflows".into()));
    }
    let n = poisson_count(4.0 * PI * bound, rng)?;
    let mut points = Vec::new();
    let mut exceeded = 0usize;
    for _ in 0..n {
        let x = uniform_point(rng);
        let u: f64 = rng.random();
        let lam = log_intensity(&x).exp();
        if lam > bound {
            exceeded += 1;
        }
        if u * bound < lam {
            points.push(x);
        }
    }
    if exceeded > 0 {
        log::warn!("LGCP intensity exceeded the dominating rate at {exceeded} proposals");
    }
    Ok(PointPattern::from_points_unchecked(points))
}

/// Simulates one replicate of a parametric model from its seed tree.
/// DPPs draw the eigenfunction selection and the point proposals from
/// separate streams.
pub fn simulate_model(model: &Model, seeds: &SeedTree) -> Result<PointPattern> {
    match model.spectrum() {
        None => {
            let mut rng = seeds.stream(Stream::Proposals);
            sim_poisson(&Intensity::Constant(model.intensity()), &mut rng)
        }
        Some(spectrum) => {
            let selection = select_eigenfunctions(spectrum, &mut seeds.stream(Stream::EigenSelection))?;
            sample_projection(&selection, &mut seeds.stream(Stream::Proposals))
        }
    }
}

/// Replicates `0..n` of `model` under master seed `seed`, in parallel.
/// Results are ordered by replicate index and independent of scheduling.
pub fn simulate_replicates(model: &Model, seed: u64, n: usize) -> Vec<Result<PointPattern>> {
    use rayon::prelude::*;
    (0..n)
        .into_par_iter()
        .map(|i| simulate_model(model, &SeedTree::replicate(seed, i as u64)))
        .collect()
}
