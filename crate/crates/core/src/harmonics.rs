//! Legendre polynomials, associated Legendre functions and complex surface
//! spherical harmonics `Y_{l,k}` (Condon-Shortley phase included).
//!
//! Associated functions are evaluated through the fully normalized
//! recurrence in `l` at fixed order, which never forms factorials; the
//! unnormalized values are recovered with log-space normalization.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sphere::UnitVector;

/// Largest supported harmonic degree.
pub const MAX_DEGREE: usize = 200;

/// Index pair `(l, k)` with `|k| <= l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DegreeOrder {
    pub degree: usize,
    pub order: i64,
}

impl DegreeOrder {
    pub fn new(degree: usize, order: i64) -> Result<Self> {
        check_order(degree, order)?;
        Ok(DegreeOrder { degree, order })
    }
}

fn check_order(l: usize, k: i64) -> Result<()> {
    if k.unsigned_abs() as usize > l {
        return Err(Error::input(format!("order {k} exceeds degree {l}")));
    }
    check_degree(l)
}

fn check_degree(l: usize) -> Result<()> {
    if l > MAX_DEGREE {
        return Err(Error::DegreeTooHigh {
            degree: l,
            max: MAX_DEGREE,
        });
    }
    Ok(())
}

/// `P_l(x)` by the three-term recurrence.
pub fn legendre(l: usize, x: f64) -> f64 {
    if l == 0 {
        return 1.0;
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for n in 1..l {
        let p2 = ((2 * n + 1) as f64 * x * p1 - n as f64 * p0) / (n + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// `P_0(x), ..., P_l_max(x)`.
pub fn legendre_series(l_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(l_max + 1);
    out.push(1.0);
    if l_max == 0 {
        return out;
    }
    out.push(x);
    for n in 1..l_max {
        let p = ((2 * n + 1) as f64 * x * out[n] - n as f64 * out[n - 1]) / (n + 1) as f64;
        out.push(p);
    }
    out
}

/// `sum_l c_l P_l(x)` accumulated alongside the recurrence.
pub fn legendre_sum(coefficients: &[f64], x: f64) -> f64 {
    let mut sum = 0.0;
    let (mut p0, mut p1) = (1.0, x);
    for (l, &c) in coefficients.iter().enumerate() {
        let p = match l {
            0 => 1.0,
            1 => x,
            _ => {
                let n = (l - 1) as f64;
                let p2 = ((2.0 * n + 1.0) * x * p1 - n * p0) / (n + 1.0);
                p0 = p1;
                p1 = p2;
                p2
            }
        };
        sum += c * p;
    }
    sum
}

fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(2 * MAX_DEGREE + 2);
        t.push(0.0);
        for i in 1..=2 * MAX_DEGREE + 1 {
            t.push(t[i - 1] + (i as f64).ln());
        }
        t
    });
    table[n]
}

/// `ln sqrt((2l+1)/(4 pi) (l-k)!/(l+k)!)` for `0 <= k <= l`.
fn ln_norm(l: usize, k: usize) -> f64 {
    0.5 * (((2 * l + 1) as f64).ln() - (4.0 * PI).ln() + ln_factorial(l - k)
        - ln_factorial(l + k))
}

#[inline]
fn tri(l: usize, k: usize) -> usize {
    l * (l + 1) / 2 + k
}

/// Fully normalized associated Legendre values
/// `sqrt((2l+1)/(4 pi) (l-k)!/(l+k)!) P_l^{(k)}(x)` for `0 <= k <= l <= l_max`,
/// stored in triangular order `l (l+1)/2 + k`.
#[derive(Debug, Clone)]
pub struct NormalizedLegendre {
    l_max: usize,
    values: Vec<f64>,
}

impl NormalizedLegendre {
    pub fn new(l_max: usize, x: f64) -> Self {
        let mut values = vec![0.0; tri(l_max, l_max) + 1];
        let sin_t = (1.0 - x * x).max(0.0).sqrt();
        let mut diag = 1.0 / (4.0 * PI).sqrt();
        for m in 0..=l_max {
            if m > 0 {
                diag *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * sin_t;
            }
            values[tri(m, m)] = diag;
            if m == l_max {
                break;
            }
            let mut prev2 = diag;
            let mut prev1 = x * ((2 * m + 3) as f64).sqrt() * diag;
            values[tri(m + 1, m)] = prev1;
            for l in m + 2..=l_max {
                let (lf, mf) = (l as f64, m as f64);
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
                let cur = a * (x * prev1 - b * prev2);
                values[tri(l, m)] = cur;
                prev2 = prev1;
                prev1 = cur;
            }
        }
        NormalizedLegendre { l_max, values }
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    #[inline]
    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.values[tri(l, k)]
    }
}

/// `P_l^{(k)}(x)` with the Condon-Shortley factor and the negative-order
/// relation `P_l^{(-k)} = (-1)^k (l-k)!/(l+k)! P_l^{(k)}`.
pub fn associated_legendre(l: usize, k: i64, x: f64) -> Result<f64> {
    check_order(l, k)?;
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::input(format!("x = {x} outside [-1, 1]")));
    }
    let j = k.unsigned_abs() as usize;
    let table = NormalizedLegendre::new(l, x);
    let normalized = table.get(l, j);
    if k >= 0 {
        Ok(normalized * (-ln_norm(l, j)).exp())
    } else {
        // (-1)^j (l-j)!/(l+j)! / N_{l,j}, combined in log space.
        let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        let ln_scale = ln_factorial(l - j) - ln_factorial(l + j) - ln_norm(l, j);
        Ok(sign * normalized * ln_scale.exp())
    }
}

/// All harmonics `Y_{l,k}(x)` with `l <= l_max` at one point.
#[derive(Debug, Clone)]
pub struct HarmonicTable {
    legendre: NormalizedLegendre,
    cos_k: Vec<f64>,
    sin_k: Vec<f64>,
}

impl HarmonicTable {
    pub fn new(l_max: usize, x: &UnitVector) -> Result<Self> {
        check_degree(l_max)?;
        Ok(Self::new_unchecked(l_max, x))
    }

    pub(crate) fn new_unchecked(l_max: usize, x: &UnitVector) -> Self {
        let (theta, phi) = x.polar();
        let legendre = NormalizedLegendre::new(l_max, theta.cos());
        let (s1, c1) = phi.sin_cos();
        let mut cos_k = Vec::with_capacity(l_max + 1);
        let mut sin_k = Vec::with_capacity(l_max + 1);
        let (mut c, mut s) = (1.0, 0.0);
        for k in 0..=l_max {
            // Angle addition drifts slowly; refresh from libm every 16 steps.
            if k % 16 == 0 {
                let (sk, ck) = (k as f64 * phi).sin_cos();
                c = ck;
                s = sk;
            }
            cos_k.push(c);
            sin_k.push(s);
            let next_c = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = next_c;
        }
        HarmonicTable {
            legendre,
            cos_k,
            sin_k,
        }
    }

    pub fn l_max(&self) -> usize {
        self.legendre.l_max()
    }

    /// `(Re Y_{l,k}, Im Y_{l,k})` for `|k| <= l <= l_max`.
    #[inline]
    pub fn re_im(&self, l: usize, k: i64) -> (f64, f64) {
        let j = k.unsigned_abs() as usize;
        let p = self.legendre.get(l, j);
        let (re, im) = (p * self.cos_k[j], p * self.sin_k[j]);
        if k >= 0 {
            (re, im)
        } else if j.is_multiple_of(2) {
            (re, -im)
        } else {
            (-re, im)
        }
    }

    pub fn y(&self, l: usize, k: i64) -> Complex64 {
        let (re, im) = self.re_im(l, k);
        Complex64::new(re, im)
    }

    /// Real orthonormal harmonic: `Y_{l,0}`, `sqrt 2 Re Y_{l,k}` for `k > 0`
    /// and `sqrt 2 Im Y_{l,|k|}` for `k < 0`. Spans the same degree-`l`
    /// eigenspace as the complex family.
    #[inline]
    pub fn real(&self, l: usize, k: i64) -> f64 {
        let j = k.unsigned_abs() as usize;
        let p = self.legendre.get(l, j);
        match k {
            0 => p,
            k if k > 0 => std::f64::consts::SQRT_2 * p * self.cos_k[j],
            _ => std::f64::consts::SQRT_2 * p * self.sin_k[j],
        }
    }
}

/// `Y_{l,k}(x)`.
pub fn spherical_harmonic(l: usize, k: i64, x: &UnitVector) -> Result<Complex64> {
    check_order(l, k)?;
    Ok(HarmonicTable::new_unchecked(l, x).y(l, k))
}

/// `sum_k Y_{l,k}(x1) conj(Y_{l,k}(x2))`; by the addition formula this is
/// `(2l+1)/(4 pi) P_l(x1 . x2)`.
pub fn degree_block_sum(l: usize, x1: &UnitVector, x2: &UnitVector) -> Result<Complex64> {
    check_degree(l)?;
    let t1 = HarmonicTable::new_unchecked(l, x1);
    let t2 = HarmonicTable::new_unchecked(l, x2);
    Ok((-(l as i64)..=l as i64)
        .map(|k| t1.y(l, k) * t2.y(l, k).conj())
        .sum())
}
