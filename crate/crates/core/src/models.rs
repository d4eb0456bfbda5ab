//! Isotropic DPP models through their Mercer spectra.
//!
//! An isotropic kernel has radial part
//! `C0(s) = sum_l (2l+1)/(4 pi) alpha_l P_l(cos s)` and the DPP exists iff
//! every `alpha_l` lies in `[0, 1]`. This module builds spectra for the
//! parametric families, evaluates kernel, pair correlation and K-function
//! (closed form where one exists, adaptive quadrature otherwise) and the
//! log-density with respect to the unit rate Poisson process.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{legendre_series, legendre_sum, MAX_DEGREE};
use crate::quadrature::{AdaptiveIntegrator, GaussLegendre};
use crate::sphere::PointPattern;

/// Default truncation degree for spectra without finite support.
pub const DEFAULT_TRUNCATION: usize = MAX_DEGREE;

/// Absolute tolerance of the numeric K-function.
pub const K_ABS_TOL: f64 = 1e-9;

const EXISTENCE_TOL: f64 = 1e-9;
const NEGATIVE_TOL: f64 = 1e-9;

/// A parametric point process model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Poisson {
        rho: f64,
    },
    /// `R0(s) = (1-delta)^{2 tau} / (1 + delta^2 - 2 delta cos s)^tau`.
    Multiquadric {
        tau: f64,
        delta: f64,
        eta: f64,
    },
    /// The multiquadric family at `tau = 1/2`.
    InverseMultiquadric {
        delta: f64,
        eta: f64,
    },
    /// `alpha_l = 1` for `l <= m`, zero beyond; exactly `(m+1)^2` points.
    MostRepulsive {
        m: usize,
    },
    /// `alpha_l = 1 / (1 + b exp((l/a)^kappa))`.
    FlexibleSpectrum {
        a: f64,
        b: f64,
        kappa: f64,
    },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Poisson { .. } => "poisson",
            ModelSpec::Multiquadric { .. } => "multiquadric",
            ModelSpec::InverseMultiquadric { .. } => "inverse_multiquadric",
            ModelSpec::MostRepulsive { .. } => "most_repulsive",
            ModelSpec::FlexibleSpectrum { .. } => "flexible_spectrum",
        }
    }

    /// Parameter range checks. Existence (`eta <= eta_max`) is checked when
    /// the spectrum is built.
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::model(format!("{name} must be positive, got {v}")))
            }
        }
        fn unit_open(v: f64) -> Result<()> {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::model("delta must lie in (0,1)"))
            }
        }
        match *self {
            ModelSpec::Poisson { rho } => {
                if rho.is_finite() && rho >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::model(format!("rho must be non-negative, got {rho}")))
                }
            }
            ModelSpec::Multiquadric { tau, delta, eta } => {
                positive("tau", tau)?;
                unit_open(delta)?;
                positive("eta", eta)
            }
            ModelSpec::InverseMultiquadric { delta, eta } => {
                unit_open(delta)?;
                positive("eta", eta)
            }
            ModelSpec::MostRepulsive { m } => {
                if m > MAX_DEGREE {
                    Err(Error::DegreeTooHigh {
                        degree: m,
                        max: MAX_DEGREE,
                    })
                } else {
                    Ok(())
                }
            }
            ModelSpec::FlexibleSpectrum { a, b, kappa } => {
                positive("a", a)?;
                positive("b", b)?;
                positive("kappa", kappa)
            }
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Poisson { rho } => write!(f, "poisson(rho={rho})"),
            ModelSpec::Multiquadric { tau, delta, eta } => {
                write!(f, "multiquadric(tau={tau}, delta={delta}, eta={eta})")
            }
            ModelSpec::InverseMultiquadric { delta, eta } => {
                write!(f, "inverse_multiquadric(delta={delta}, eta={eta})")
            }
            ModelSpec::MostRepulsive { m } => write!(f, "most_repulsive(m={m})"),
            ModelSpec::FlexibleSpectrum { a, b, kappa } => {
                write!(f, "flexible_spectrum(a={a}, b={b}, kappa={kappa})")
            }
        }
    }
}

/// Mercer coefficients `alpha_0..=alpha_L` of an isotropic kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    alphas: Vec<f64>,
    eta: f64,
}

impl Spectrum {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::input("a spectrum needs at least alpha_0"));
        }
        if alphas.len() > MAX_DEGREE + 1 {
            return Err(Error::DegreeTooHigh {
                degree: alphas.len() - 1,
                max: MAX_DEGREE,
            });
        }
        if let Some((l, a)) = alphas
            .iter()
            .enumerate()
            .find(|(_, a)| !a.is_finite() || **a < 0.0)
        {
            return Err(Error::input(format!(
                "Mercer coefficient alpha_{l} = {a} must be finite and non-negative"
            )));
        }
        let eta = alphas
            .iter()
            .enumerate()
            .map(|(l, a)| (2 * l + 1) as f64 * a)
            .sum();
        Ok(Spectrum { alphas, eta })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Truncation degree `L`.
    pub fn truncation(&self) -> usize {
        self.alphas.len() - 1
    }

    /// `sum_l (2l+1) alpha_l`, the expected number of points.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn intensity(&self) -> f64 {
        self.eta / (4.0 * PI)
    }

    /// Valid as a DPP spectrum: all coefficients at most one.
    pub fn is_dpp(&self) -> bool {
        self.alphas.iter().all(|&a| a <= 1.0)
    }

    pub fn require_dpp(&self) -> Result<()> {
        match self.alphas.iter().enumerate().find(|(_, a)| **a > 1.0) {
            Some((ell, &alpha)) => Err(Error::NotADpp { ell, alpha }),
            None => Ok(()),
        }
    }

    /// `beta_l = (2l+1) alpha_l / eta`, the Legendre coefficients of `R0`.
    pub fn betas(&self) -> Vec<f64> {
        self.alphas
            .iter()
            .enumerate()
            .map(|(l, a)| (2 * l + 1) as f64 * a / self.eta)
            .collect()
    }

    /// Variance of the point count: a DPP count is a sum of independent
    /// Bernoulli(alpha_l) variables, `2l+1` per degree.
    pub fn count_variance(&self) -> f64 {
        self.alphas
            .iter()
            .enumerate()
            .map(|(l, a)| (2 * l + 1) as f64 * a * (1.0 - a))
            .sum()
    }

    fn kernel_coefficients(&self) -> Vec<f64> {
        self.alphas
            .iter()
            .enumerate()
            .map(|(l, a)| (2 * l + 1) as f64 / (4.0 * PI) * a)
            .collect()
    }
}

/// Builds the Mercer spectrum of a kernel model, truncated at degree
/// `truncation` (most repulsive spectra are exact at degree `m`).
pub fn spectrum_from_model(model: &ModelSpec, truncation: usize) -> Result<Spectrum> {
    model.validate()?;
    if truncation > MAX_DEGREE {
        return Err(Error::DegreeTooHigh {
            degree: truncation,
            max: MAX_DEGREE,
        });
    }
    let alphas = match *model {
        ModelSpec::Poisson { .. } => {
            return Err(Error::model(
                "the Poisson model has no continuous kernel and no Mercer spectrum",
            ))
        }
        ModelSpec::InverseMultiquadric { delta, eta } => {
            let eta_max = 1.0 / (1.0 - delta);
            check_eta(eta, eta_max)?;
            (0..=truncation)
                .map(|l| eta * delta.powi(l as i32) * (1.0 - delta) / (2 * l + 1) as f64)
                .collect()
        }
        ModelSpec::Multiquadric { tau, delta, eta } => {
            let betas = multiquadric_betas(tau, delta, truncation)?;
            let max = eta_max_unchecked(&betas);
            check_eta(eta, max)?;
            betas
                .iter()
                .enumerate()
                .map(|(l, b)| eta * b / (2 * l + 1) as f64)
                .collect()
        }
        ModelSpec::MostRepulsive { m } => vec![1.0; m + 1],
        ModelSpec::FlexibleSpectrum { a, b, kappa } => (0..=truncation)
            .map(|l| 1.0 / (1.0 + b * ((l as f64 / a).powf(kappa)).exp()))
            .collect(),
    };
    let alphas = clamp_existence(alphas)?;
    Spectrum::new(alphas)
}

fn check_eta(eta: f64, eta_max: f64) -> Result<()> {
    if eta > eta_max * (1.0 + EXISTENCE_TOL) {
        return Err(Error::model(format!(
            "eta = {eta} exceeds eta_max = {eta_max:.6}; the DPP does not exist"
        )));
    }
    Ok(())
}

fn clamp_existence(alphas: Vec<f64>) -> Result<Vec<f64>> {
    alphas
        .into_iter()
        .enumerate()
        .map(|(ell, a)| {
            if a > 1.0 + EXISTENCE_TOL {
                Err(Error::NotADpp { ell, alpha: a })
            } else {
                Ok(a.min(1.0))
            }
        })
        .collect()
}

/// Multiquadric correlation function `R0(s)`.
pub fn multiquadric_correlation(tau: f64, delta: f64, s: f64) -> f64 {
    let d = 1.0 + delta * delta - 2.0 * delta * s.cos();
    ((1.0 - delta) * (1.0 - delta) / d).powf(tau)
}

/// Legendre coefficients `beta_l` of the multiquadric correlation function,
/// `beta_l = (2l+1)/2 int_{-1}^{1} R0(arccos u) P_l(u) du`, by Gauss-Legendre
/// quadrature with `4 L` nodes (at least 64). Tiny negative results are
/// clamped to zero; larger ones signal an insufficient truncation.
pub fn multiquadric_betas(tau: f64, delta: f64, truncation: usize) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::model(format!("tau must be positive, got {tau}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::model("delta must lie in (0,1)"));
    }
    let rule = GaussLegendre::new((4 * truncation).max(64));
    let mut betas = vec![0.0; truncation + 1];
    let scale = (1.0 - delta) * (1.0 - delta);
    for (&u, &w) in rule.nodes().iter().zip(rule.weights()) {
        let r0 = (scale / (1.0 + delta * delta - 2.0 * delta * u)).powf(tau);
        for (b, p) in betas.iter_mut().zip(legendre_series(truncation, u)) {
            *b += w * r0 * p;
        }
    }
    for (l, b) in betas.iter_mut().enumerate() {
        *b *= (2 * l + 1) as f64 / 2.0;
        if *b < 0.0 {
            if *b < -NEGATIVE_TOL {
                return Err(Error::Numeric(format!(
                    "negative Legendre coefficient beta_{l} = {b}; truncation too small"
                )));
            }
            *b = 0.0;
        }
    }
    Ok(betas)
}

/// `eta_max = min_l (2l+1)/beta_l` over the available degrees, zero
/// coefficients skipped. `betas` must be a probability vector up to 1e-6.
pub fn eta_max(betas: &[f64]) -> Result<f64> {
    if betas.iter().any(|b| !b.is_finite() || *b < 0.0) {
        return Err(Error::input("correlation coefficients must be non-negative"));
    }
    if betas.iter().all(|&b| b == 0.0) {
        return Err(Error::input("all correlation coefficients are zero"));
    }
    let total: f64 = betas.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::input(format!(
            "correlation coefficients sum to {total}, not 1"
        )));
    }
    Ok(eta_max_unchecked(betas))
}

fn eta_max_unchecked(betas: &[f64]) -> f64 {
    betas
        .iter()
        .enumerate()
        .filter(|(_, b)| **b > 0.0)
        .map(|(l, b)| (2 * l + 1) as f64 / b)
        .fold(f64::INFINITY, f64::min)
}

/// `sum_l (2l+1) alpha_l`.
pub fn eta(spectrum: &Spectrum) -> f64 {
    spectrum.eta()
}

/// Truncated series value of the radial kernel `C0(s)`.
pub fn radial_kernel(spectrum: &Spectrum, s: f64) -> f64 {
    legendre_sum(&spectrum.kernel_coefficients(), s.cos())
}

/// DPP pair correlation `1 - (C0(s)/C0(0))^2`.
pub fn pcf(spectrum: &Spectrum, s: f64) -> Result<f64> {
    if spectrum.eta() <= 0.0 {
        return Err(Error::input("pair correlation undefined for eta = 0"));
    }
    let r = radial_kernel(spectrum, s) / (spectrum.eta() / (4.0 * PI));
    Ok(1.0 - r * r)
}

/// `K(pi) = 4 pi + (Var N / E N - 1) / rho` with the DPP count variance.
pub fn k_pi_identity_check(spectrum: &Spectrum) -> Result<f64> {
    let eta = spectrum.eta();
    if eta <= 0.0 {
        return Err(Error::input("K(pi) identity needs eta > 0"));
    }
    let rho = eta / (4.0 * PI);
    Ok(4.0 * PI + (spectrum.count_variance() / eta - 1.0) / rho)
}

/// `K(t) = 2 pi int_0^t g0(s) sin s ds` by adaptive quadrature.
pub fn k_from_pcf<G: Fn(f64) -> f64>(g0: G, t: f64) -> Result<f64> {
    let t = check_t(t)?;
    let integral =
        AdaptiveIntegrator::new(K_ABS_TOL / (2.0 * PI)).integrate(0.0, t, |s| g0(s) * s.sin())?;
    Ok(2.0 * PI * integral)
}

fn check_t(t: f64) -> Result<f64> {
    if !(0.0..=PI + 1e-12).contains(&t) {
        return Err(Error::input(format!("t = {t} outside [0, pi]")));
    }
    Ok(t.min(PI))
}

pub fn k_poisson(t: f64) -> f64 {
    2.0 * PI * (1.0 - t.cos())
}

/// Closed-form multiquadric K-function, `tau != 1/2`:
/// `K_pois(t) - 2 pi (1-delta)^2 / (2 delta (1 - 2 tau)) ((D0/Dt)^{2 tau - 1} - 1)`
/// with `D0 = (1-delta)^2` and `Dt = 1 + delta^2 - 2 delta cos t`.
pub fn k_multiquadric(tau: f64, delta: f64, t: f64) -> f64 {
    if (tau - 0.5).abs() < 1e-12 {
        return k_inverse_multiquadric(delta, t);
    }
    let d0 = (1.0 - delta) * (1.0 - delta);
    let dt = 1.0 + delta * delta - 2.0 * delta * t.cos();
    let c = d0 / (2.0 * delta * (1.0 - 2.0 * tau));
    k_poisson(t) - 2.0 * PI * c * ((d0 / dt).powf(2.0 * tau - 1.0) - 1.0)
}

/// Closed-form inverse multiquadric K-function:
/// `K_pois(t) - 2 pi (1-delta)^2 / (2 delta) ln(Dt / D0)`.
pub fn k_inverse_multiquadric(delta: f64, t: f64) -> f64 {
    let d0 = (1.0 - delta) * (1.0 - delta);
    let dt = 1.0 + delta * delta - 2.0 * delta * t.cos();
    k_poisson(t) - 2.0 * PI * d0 / (2.0 * delta) * (dt / d0).ln()
}

/// What a [`RadialFunction`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialKind {
    Kernel,
    Correlation,
    PairCorrelation,
    KFunction,
}

/// A function of geodesic distance `s` in `[0, pi]`.
#[derive(Clone)]
pub struct RadialFunction {
    kind: RadialKind,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl RadialFunction {
    pub fn new(kind: RadialKind, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        RadialFunction {
            kind,
            f: Arc::new(f),
        }
    }

    pub fn kind(&self) -> RadialKind {
        self.kind
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }
}

impl fmt::Debug for RadialFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialFunction")
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

/// A validated model together with its spectrum (none for Poisson).
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    spectrum: Option<Spectrum>,
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        Self::with_truncation(spec, DEFAULT_TRUNCATION)
    }

    pub fn with_truncation(spec: ModelSpec, truncation: usize) -> Result<Self> {
        spec.validate()?;
        let spectrum = match spec {
            ModelSpec::Poisson { .. } => None,
            _ => Some(spectrum_from_model(&spec, truncation)?),
        };
        Ok(Model { spec, spectrum })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn spectrum(&self) -> Option<&Spectrum> {
        self.spectrum.as_ref()
    }

    pub fn intensity(&self) -> f64 {
        match (&self.spec, &self.spectrum) {
            (ModelSpec::Poisson { rho }, _) => *rho,
            (_, Some(s)) => s.intensity(),
            _ => unreachable!("kernel models always carry a spectrum"),
        }
    }

    /// Expected number of points.
    pub fn eta(&self) -> f64 {
        4.0 * PI * self.intensity()
    }

    pub fn count_variance(&self) -> f64 {
        match &self.spectrum {
            None => self.eta(),
            Some(s) => s.count_variance(),
        }
    }

    /// Correlation function `R0(s)`, closed form for the multiquadric
    /// families and the normalized series otherwise; zero for Poisson.
    pub fn correlation(&self, s: f64) -> f64 {
        match (&self.spec, &self.spectrum) {
            (ModelSpec::Poisson { .. }, _) => {
                if s == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            (ModelSpec::Multiquadric { tau, delta, .. }, _) => {
                multiquadric_correlation(*tau, *delta, s)
            }
            (ModelSpec::InverseMultiquadric { delta, .. }, _) => {
                multiquadric_correlation(0.5, *delta, s)
            }
            (_, Some(spec)) => radial_kernel(spec, s) / spec.intensity(),
            _ => unreachable!(),
        }
    }

    /// Radial kernel `C0(s) = rho R0(s)`.
    pub fn radial_kernel(&self, s: f64) -> f64 {
        self.intensity() * self.correlation(s)
    }

    /// Pair correlation; identically one for Poisson.
    pub fn pcf(&self, s: f64) -> f64 {
        match self.spec {
            ModelSpec::Poisson { .. } => 1.0,
            _ => {
                let r = self.correlation(s);
                1.0 - r * r
            }
        }
    }

    /// Pair correlation from the truncated spectrum alone.
    pub fn pcf_series(&self, s: f64) -> f64 {
        match &self.spectrum {
            None => 1.0,
            Some(spec) => pcf(spec, s).unwrap_or(1.0),
        }
    }

    /// K-function: closed form for Poisson and the multiquadric families,
    /// adaptive quadrature of the pair correlation for everything else.
    pub fn k_function(&self, t: f64) -> Result<f64> {
        let t = check_t(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        match self.spec {
            ModelSpec::Poisson { .. } => Ok(k_poisson(t)),
            ModelSpec::Multiquadric { tau, delta, .. } => Ok(k_multiquadric(tau, delta, t)),
            ModelSpec::InverseMultiquadric { delta, .. } => Ok(k_inverse_multiquadric(delta, t)),
            _ => self.k_function_numeric(t),
        }
    }

    /// K-function by quadrature of the model pair correlation.
    pub fn k_function_numeric(&self, t: f64) -> Result<f64> {
        k_from_pcf(|s| self.pcf(s), t)
    }

    /// `K(pi)` from the count-variance identity.
    pub fn k_pi_identity(&self) -> Result<f64> {
        match &self.spectrum {
            None => Ok(4.0 * PI),
            Some(s) => k_pi_identity_check(s),
        }
    }

    pub fn radial(&self, kind: RadialKind) -> RadialFunction {
        let m = self.clone();
        match kind {
            RadialKind::Kernel => RadialFunction::new(kind, move |s| m.radial_kernel(s)),
            RadialKind::Correlation => RadialFunction::new(kind, move |s| m.correlation(s)),
            RadialKind::PairCorrelation => RadialFunction::new(kind, move |s| m.pcf(s)),
            RadialKind::KFunction => {
                RadialFunction::new(kind, move |t| m.k_function(t).unwrap_or(f64::NAN))
            }
        }
    }
}

/// `K(t)` for any model.
pub fn k_function(model: &Model, t: f64) -> Result<f64> {
    model.k_function(t)
}

/// Log-density of the DPP with respect to the unit rate Poisson process:
/// `4 pi - D + log det(C~(x_i, x_j))`, where `C~` has Mercer coefficients
/// `alpha_l / (1 - alpha_l)` and `D = sum_l (2l+1) log(1 + alpha_l/(1-alpha_l))`.
/// Returns `-inf` when the matrix is numerically singular.
pub fn log_density(spectrum: &Spectrum, pattern: &PointPattern) -> Result<f64> {
    if let Some((l, a)) = spectrum.alphas().iter().enumerate().find(|(_, a)| **a >= 1.0) {
        return Err(Error::input(format!(
            "spectrum not in [0,1): alpha_{l} = {a}"
        )));
    }
    if !pattern.is_simple() {
        return Err(Error::input("pattern contains duplicate points"));
    }
    let d: f64 = spectrum
        .alphas()
        .iter()
        .enumerate()
        .map(|(l, a)| -((2 * l + 1) as f64) * (-a).ln_1p())
        .sum();
    let coeffs: Vec<f64> = spectrum
        .alphas()
        .iter()
        .enumerate()
        .map(|(l, a)| (2 * l + 1) as f64 / (4.0 * PI) * a / (1.0 - a))
        .collect();
    let n = pattern.len();
    let mut matrix = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = legendre_sum(&coeffs, pattern[i].dot(&pattern[j]).clamp(-1.0, 1.0));
            matrix[i * n + j] = v;
            matrix[j * n + i] = v;
        }
    }
    let log_det = cholesky_log_det(&mut matrix, n);
    Ok(4.0 * PI - d + log_det)
}

/// In-place Cholesky; `-inf` if a pivot is not positive relative to the
/// largest diagonal entry.
fn cholesky_log_det(a: &mut [f64], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let scale = (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max);
    if scale <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut log_det = 0.0;
    for j in 0..n {
        let mut pivot = a[j * n + j];
        for k in 0..j {
            pivot -= a[j * n + k] * a[j * n + k];
        }
        if pivot <= 1e-13 * scale {
            return f64::NEG_INFINITY;
        }
        let l_jj = pivot.sqrt();
        a[j * n + j] = l_jj;
        log_det += 2.0 * l_jj.ln();
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / l_jj;
        }
    }
    log_det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::HarmonicTable;
    use crate::sphere::{sample_uniform, UnitVector};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mr(m: usize) -> Spectrum {
        spectrum_from_model(&ModelSpec::MostRepulsive { m }, DEFAULT_TRUNCATION).unwrap()
    }

    #[test]
    fn most_repulsive_spectrum() {
        let s = mr(14);
        assert_eq!(s.alphas(), &[1.0; 15][..]);
        assert_eq!(s.eta(), 225.0);
        assert_eq!(s.count_variance(), 0.0);
    }

    #[test]
    fn inverse_multiquadric_spectrum() {
        let s = spectrum_from_model(
            &ModelSpec::InverseMultiquadric { delta: 0.5, eta: 2.0 },
            DEFAULT_TRUNCATION,
        )
        .unwrap();
        assert_abs_diff_eq!(s.alphas()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.alphas()[1], 2.0 * 0.25 / 3.0, epsilon = 1e-15);
        let too_big = ModelSpec::InverseMultiquadric { delta: 0.5, eta: 2.1 };
        assert!(matches!(
            spectrum_from_model(&too_big, 50),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn multiquadric_at_half_matches_inverse_closed_form() {
        let betas = multiquadric_betas(0.5, 0.5, 100).unwrap();
        for (l, b) in betas.iter().enumerate() {
            assert_abs_diff_eq!(*b, 0.5f64.powi(l as i32) * 0.5, epsilon = 1e-12);
        }
        let q = spectrum_from_model(
            &ModelSpec::Multiquadric { tau: 0.5, delta: 0.5, eta: 1.0 },
            100,
        )
        .unwrap();
        for (l, a) in q.alphas().iter().enumerate() {
            let closed = 0.5f64.powi(l as i32) * 0.5 / (2 * l + 1) as f64;
            assert_abs_diff_eq!(*a, closed, epsilon = 1e-8);
        }
    }

    #[test]
    fn parameter_validation_messages() {
        let err = ModelSpec::Multiquadric { tau: 1.0, delta: 1.5, eta: 10.0 }
            .validate()
            .unwrap_err();
        assert!(err.to_string().contains("delta must lie in (0,1)"));
        assert!(ModelSpec::Poisson { rho: -1.0 }.validate().is_err());
        assert!(ModelSpec::FlexibleSpectrum { a: 0.0, b: 1.0, kappa: 1.0 }
            .validate()
            .is_err());
        assert!(ModelSpec::MostRepulsive { m: MAX_DEGREE + 1 }.validate().is_err());
        assert!(spectrum_from_model(&ModelSpec::Poisson { rho: 1.0 }, 10).is_err());
    }

    #[test]
    fn eta_examples() {
        assert_eq!(Spectrum::new(vec![0.0; 5]).unwrap().eta(), 0.0);
        assert_eq!(eta(&mr(14)), 225.0);
        let s = spectrum_from_model(
            &ModelSpec::InverseMultiquadric { delta: 0.9, eta: 5.0 },
            200,
        )
        .unwrap();
        // Tail beyond L = 200 is eta * 0.9^201.
        assert!((s.eta() - 5.0).abs() <= 5.0 * 0.9f64.powi(201) + 1e-12);
    }

    #[test]
    fn eta_max_examples() {
        let betas: Vec<f64> = (0..=200).map(|l| 0.9f64.powi(l) * 0.1).collect();
        assert_abs_diff_eq!(eta_max(&betas).unwrap(), 10.0, epsilon = 1e-12);
        assert_eq!(eta_max(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert!(eta_max(&[0.0, 0.0]).is_err());
        assert!(eta_max(&[0.5, 0.2]).is_err());
        let mq = multiquadric_betas(10.0, 0.68, 200).unwrap();
        let max = eta_max(&mq).unwrap();
        assert!(max >= 225.0, "eta_max = {max}");
    }

    #[test]
    fn betas_sum_to_one() {
        let models = [
            ModelSpec::Multiquadric { tau: 10.0, delta: 0.68, eta: 225.0 },
            ModelSpec::Multiquadric { tau: 1.0, delta: 0.5, eta: 3.0 },
            ModelSpec::Multiquadric { tau: 0.25, delta: 0.8, eta: 2.0 },
            ModelSpec::InverseMultiquadric { delta: 0.9, eta: 5.0 },
            ModelSpec::MostRepulsive { m: 14 },
        ];
        for m in models {
            let s = spectrum_from_model(&m, 200).unwrap();
            let total: f64 = s.betas().iter().sum();
            assert!((total - 1.0).abs() < 1e-6, "{m}: {total}");
        }
    }

    #[test]
    fn radial_kernel_examples() {
        assert_abs_diff_eq!(radial_kernel(&mr(14), 0.0), 225.0 / (4.0 * PI), epsilon = 1e-12);
        let zero = Spectrum::new(vec![0.0; 10]).unwrap();
        assert_eq!(radial_kernel(&zero, 1.0), 0.0);
        let imq = spectrum_from_model(
            &ModelSpec::InverseMultiquadric { delta: 0.5, eta: 1.0 },
            200,
        )
        .unwrap();
        let s = PI / 3.0;
        let closed = 1.0 / (4.0 * PI) * multiquadric_correlation(0.5, 0.5, s);
        assert_abs_diff_eq!(radial_kernel(&imq, s), closed, epsilon = 1e-8);
    }

    #[test]
    fn radial_kernel_equals_mercer_double_sum() {
        let spec = spectrum_from_model(
            &ModelSpec::Multiquadric { tau: 2.0, delta: 0.6, eta: 12.0 },
            40,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts = sample_uniform(20, &mut rng);
        for pair in pts.points().chunks(2) {
            let (t1, t2) = (
                HarmonicTable::new(40, &pair[0]).unwrap(),
                HarmonicTable::new(40, &pair[1]).unwrap(),
            );
            let mut direct = num_complex::Complex64::new(0.0, 0.0);
            for (l, a) in spec.alphas().iter().enumerate() {
                for k in -(l as i64)..=l as i64 {
                    direct += t1.y(l, k) * t2.y(l, k).conj() * *a;
                }
            }
            let s = crate::sphere::geodesic_distance(&pair[0], &pair[1]);
            assert!((direct.re - radial_kernel(&spec, s)).abs() < 1e-9);
            assert!(direct.im.abs() < 1e-9);
        }
    }

    #[test]
    fn pcf_examples() {
        let s14 = mr(14);
        assert_abs_diff_eq!(pcf(&s14, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        let c_pi: f64 = (0..=14)
            .map(|l| (2 * l + 1) as f64 * if l % 2 == 0 { 1.0 } else { -1.0 } / (4.0 * PI))
            .sum();
        let c0 = 225.0 / (4.0 * PI);
        assert_abs_diff_eq!(pcf(&s14, PI).unwrap(), 1.0 - (c_pi / c0).powi(2), epsilon = 1e-12);
        assert!(pcf(&Spectrum::new(vec![0.0]).unwrap(), 0.3).is_err());
        let poisson = Model::new(ModelSpec::Poisson { rho: 2.0 }).unwrap();
        assert_eq!(poisson.pcf(0.5), 1.0);
    }

    #[test]
    fn pcf_is_in_unit_interval() {
        let models = [
            ModelSpec::Multiquadric { tau: 10.0, delta: 0.68, eta: 225.0 },
            ModelSpec::InverseMultiquadric { delta: 0.5, eta: 2.0 },
            ModelSpec::MostRepulsive { m: 14 },
            ModelSpec::FlexibleSpectrum { a: 5.0, b: 0.5, kappa: 2.0 },
        ];
        for spec in models {
            let m = Model::new(spec).unwrap();
            for i in 0..=200 {
                let s = PI * i as f64 / 200.0;
                let g = m.pcf_series(s);
                assert!((-1e-12..=1.0 + 1e-12).contains(&g), "{spec} at {s}: {g}");
            }
        }
    }

    #[test]
    fn k_function_examples() {
        let poisson = Model::new(ModelSpec::Poisson { rho: 1.0 }).unwrap();
        assert_abs_diff_eq!(poisson.k_function(PI).unwrap(), 4.0 * PI, epsilon = 1e-14);
        let mq = Model::new(ModelSpec::Multiquadric { tau: 10.0, delta: 0.68, eta: 225.0 }).unwrap();
        assert_eq!(mq.k_function(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            mq.k_function(0.5).unwrap(),
            mq.k_function_numeric(0.5).unwrap(),
            epsilon = 1e-8
        );
        assert!(mq.k_function(4.0).is_err());
    }

    #[test]
    fn k_is_monotone() {
        let m = Model::new(ModelSpec::MostRepulsive { m: 4 }).unwrap();
        let mut prev = 0.0;
        for i in 0..=40 {
            let k = m.k_function(PI * i as f64 / 40.0).unwrap();
            assert!(k >= prev - 1e-12);
            prev = k;
        }
    }

    #[test]
    fn k_pi_identity_examples() {
        let v = k_pi_identity_check(&mr(4)).unwrap();
        assert_abs_diff_eq!(v, 4.0 * PI - 4.0 * PI / 25.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 12.063715789784807, epsilon = 1e-12);
        let poisson = Model::new(ModelSpec::Poisson { rho: 3.0 }).unwrap();
        assert_eq!(poisson.k_pi_identity().unwrap(), 4.0 * PI);
        let imq = Model::new(ModelSpec::InverseMultiquadric { delta: 0.5, eta: 2.0 }).unwrap();
        assert_abs_diff_eq!(
            imq.k_pi_identity().unwrap(),
            imq.k_function_numeric(PI).unwrap(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn log_density_small_patterns() {
        let spec = spectrum_from_model(
            &ModelSpec::InverseMultiquadric { delta: 0.5, eta: 1.5 },
            60,
        )
        .unwrap();
        let alphas = spec.alphas();
        let d: f64 = alphas
            .iter()
            .enumerate()
            .map(|(l, a)| (2 * l + 1) as f64 * (1.0 + a / (1.0 - a)).ln())
            .sum();
        let coeffs: Vec<f64> = alphas
            .iter()
            .enumerate()
            .map(|(l, a)| (2 * l + 1) as f64 / (4.0 * PI) * a / (1.0 - a))
            .collect();
        let ct = |s: f64| legendre_sum(&coeffs, s.cos());

        let empty = log_density(&spec, &PointPattern::empty()).unwrap();
        assert_abs_diff_eq!(empty, 4.0 * PI - d, epsilon = 1e-12);

        let x = UnitVector::from_polar(0.4, 1.0);
        let one = log_density(&spec, &PointPattern::new(vec![x]).unwrap()).unwrap();
        assert_abs_diff_eq!(one, 4.0 * PI - d + ct(0.0).ln(), epsilon = 1e-12);

        let y = UnitVector::from_polar(1.1, 2.0);
        let s = crate::sphere::geodesic_distance(&x, &y);
        let two = log_density(&spec, &PointPattern::new(vec![x, y]).unwrap()).unwrap();
        let det = ct(0.0).powi(2) - ct(s).powi(2);
        assert_abs_diff_eq!(two, 4.0 * PI - d + det.ln(), epsilon = 1e-10);
    }

    #[test]
    fn log_density_diverges_for_close_pairs() {
        let spec = spectrum_from_model(
            &ModelSpec::Multiquadric { tau: 2.0, delta: 0.6, eta: 12.0 },
            60,
        )
        .unwrap();
        let x = UnitVector::from_polar(1.0, 1.0);
        let mut prev = f64::INFINITY;
        for s in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
            let y = UnitVector::from_polar(1.0 + s, 1.0);
            let v = log_density(&spec, &PointPattern::new(vec![x, y]).unwrap()).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let y = UnitVector::from_polar(1.0 + 1e-9, 1.0);
        let v = log_density(&spec, &PointPattern::new(vec![x, y]).unwrap()).unwrap();
        assert_eq!(v, f64::NEG_INFINITY);
    }

    #[test]
    fn log_density_rejects_projection_spectra() {
        assert!(log_density(&mr(3), &PointPattern::empty()).is_err());
    }

    #[test]
    fn model_json_shape() {
        let m: ModelSpec =
            serde_json::from_str(r#"{"model": "multiquadric", "tau": 10, "delta": 0.68, "eta": 225}"#)
                .unwrap();
        assert_eq!(m, ModelSpec::Multiquadric { tau: 10.0, delta: 0.68, eta: 225.0 });
        let s = serde_json::to_string(&ModelSpec::MostRepulsive { m: 14 }).unwrap();
        assert_eq!(s, r#"{"model":"most_repulsive","m":14}"#);
    }
}
