//! Functional summary statistics: empty space `F`, nearest neighbour `G`,
//! `J = (1 - G)/(1 - F)`, Ripley's `K` and its intensity-reweighted form,
//! plus the Poisson reference curves.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{geodesic_distance, PointPattern, UnitVector, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    F,
    G,
    J,
    K,
    #[serde(rename = "K_inhom")]
    KInhom,
}

impl Statistic {
    pub fn tag(&self) -> &'static str {
        match self {
            Statistic::F => "F",
            Statistic::G => "G",
            Statistic::J => "J",
            Statistic::K => "K",
            Statistic::KInhom => "K_inhom",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" => Ok(Statistic::F),
            "G" => Ok(Statistic::G),
            "J" => Ok(Statistic::J),
            "K" => Ok(Statistic::K),
            "K_inhom" | "Kinhom" => Ok(Statistic::KInhom),
            _ => Err(Error::input(format!("unknown statistic {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    FullSphere,
    MinusSampling,
    Theoretical,
}

impl Estimator {
    pub fn tag(&self) -> &'static str {
        match self {
            Estimator::FullSphere => "full_sphere",
            Estimator::MinusSampling => "minus_sampling",
            Estimator::Theoretical => "theoretical",
        }
    }

    fn for_window(window: &Window) -> Self {
        match window {
            Window::FullSphere => Estimator::FullSphere,
            _ => Estimator::MinusSampling,
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_sphere" => Ok(Estimator::FullSphere),
            "minus_sampling" => Ok(Estimator::MinusSampling),
            "theoretical" => Ok(Estimator::Theoretical),
            _ => Err(Error::input(format!("unknown estimator {s:?}"))),
        }
    }
}

/// Estimate of `rho^2` used by `K`: `N(N-1)/nu^2`, unbiased for Poisson,
/// or `N^2/nu^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    PoisUnbiased,
    FixedN,
}

impl Normalization {
    pub fn tag(&self) -> &'static str {
        match self {
            Normalization::PoisUnbiased => "pois_unbiased",
            Normalization::FixedN => "fixed_n",
        }
    }

    fn pairs(&self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            Normalization::PoisUnbiased => n * (n - 1.0),
            Normalization::FixedN => n * n,
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pois_unbiased" => Ok(Normalization::PoisUnbiased),
            "fixed_n" => Ok(Normalization::FixedN),
            _ => Err(Error::input(format!("unknown normalization {s:?}"))),
        }
    }
}

/// Values of one summary function on a grid of distances. `None` marks
/// grid points where the estimate is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub t: Vec<f64>,
    pub values: Vec<Option<f64>>,
    pub statistic: Statistic,
    pub estimator: Estimator,
    pub normalization: Option<Normalization>,
}

impl SummaryTable {
    pub fn new(
        t: Vec<f64>,
        values: Vec<Option<f64>>,
        statistic: Statistic,
        estimator: Estimator,
        normalization: Option<Normalization>,
    ) -> Result<Self> {
        if t.len() != values.len() {
            return Err(Error::input(format!(
                "grid has {} points but {} values",
                t.len(),
                values.len()
            )));
        }
        Ok(SummaryTable {
            t,
            values,
            statistic,
            estimator,
            normalization,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Values with undefined entries as NaN.
    pub fn values_or_nan(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect()
    }

    pub fn same_grid(&self, other: &SummaryTable) -> bool {
        self.t.len() == other.t.len() && self.t.iter().zip(&other.t).all(|(a, b)| a == b)
    }
}

/// `n` equally spaced distances from 0 to `t_max` inclusive.
pub fn uniform_t_grid(t_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0 && t_max <= PI + 1e-12) {
        return Err(Error::input(format!("t_max = {t_max} outside (0, pi]")));
    }
    if n < 2 {
        return Err(Error::input("a distance grid needs at least two points"));
    }
    Ok((0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect())
}

fn check_t_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::input("empty distance grid"));
    }
    for w in t_grid.windows(2) {
        if !(w[0] <= w[1]) {
            return Err(Error::input("distance grid must be non-decreasing"));
        }
    }
    if let Some(&t) = t_grid.iter().find(|t| !(0.0..=PI + 1e-12).contains(*t)) {
        return Err(Error::input(format!("distance {t} outside [0, pi]")));
    }
    Ok(())
}

/// Distance from `x` to the nearest point of `points`, skipping index
/// `skip`; infinite when there is none.
fn nearest_distance(x: &UnitVector, points: &[UnitVector], skip: Option<usize>) -> f64 {
    let mut best = -2.0;
    let mut arg = None;
    for (i, p) in points.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let d = x.dot(p);
        if d > best {
            best = d;
            arg = Some(i);
        }
    }
    arg.map_or(f64::INFINITY, |i| geodesic_distance(x, &points[i]))
}

/// Empty space function from a grid of reference locations. For caps only
/// grid points in the eroded window are used at each distance.
pub fn estimate_f(
    pattern: &PointPattern,
    grid: &[UnitVector],
    window: &Window,
    t_grid: &[f64],
) -> Result<SummaryTable> {
    check_t_grid(t_grid)?;
    if grid.is_empty() {
        return Err(Error::input("empty reference grid"));
    }
    let observed = pattern.restrict(window);
    let distances: Vec<f64> = grid
        .iter()
        .map(|g| nearest_distance(g, observed.points(), None))
        .collect();
    let values = t_grid
        .iter()
        .map(|&t| {
            let eroded = window.erode(t.min(PI));
            let mut admissible = 0usize;
            let mut hit = 0usize;
            for (g, &d) in grid.iter().zip(&distances) {
                if eroded.contains(g) {
                    admissible += 1;
                    if d <= t {
                        hit += 1;
                    }
                }
            }
            (admissible > 0).then(|| hit as f64 / admissible as f64)
        })
        .collect();
    SummaryTable::new(
        t_grid.to_vec(),
        values,
        Statistic::F,
        Estimator::for_window(window),
        None,
    )
}

/// Nearest neighbour distance distribution. With a cap window, only points
/// in the eroded window serve as reference points (minus sampling); their
/// neighbours range over all observed points.
pub fn estimate_g(pattern: &PointPattern, window: &Window, t_grid: &[f64]) -> Result<SummaryTable> {
    check_t_grid(t_grid)?;
    let observed = pattern.restrict(window);
    if observed.is_empty() {
        return Err(Error::input("G needs at least one observed point"));
    }
    let pts = observed.points();
    let nn: Vec<f64> = pts
        .iter()
        .enumerate()
        .map(|(i, x)| nearest_distance(x, pts, Some(i)))
        .collect();
    let depth: Vec<f64> = pts.iter().map(|x| window.depth(x)).collect();
    let values = t_grid
        .iter()
        .map(|&t| {
            let mut reference = 0usize;
            let mut hit = 0usize;
            for (&d, &dep) in nn.iter().zip(&depth) {
                if dep >= t {
                    reference += 1;
                    if d <= t {
                        hit += 1;
                    }
                }
            }
            (reference > 0).then(|| hit as f64 / reference as f64)
        })
        .collect();
    SummaryTable::new(
        t_grid.to_vec(),
        values,
        Statistic::G,
        Estimator::for_window(window),
        None,
    )
}

/// Weighted pair counts `sum_{x != y} w(x, y) 1[s(x,y) <= t]`, where for
/// caps `y` must lie in the window eroded by `t`.
///
/// Each pair is binned at the first grid index it counts for (and, in caps,
/// removed at the first index past the depth of `y`); rows are computed in
/// parallel and summed in index order, so results do not depend on the
/// thread count.
fn pair_sums<W: Fn(usize, usize) -> f64 + Sync>(
    pts: &[UnitVector],
    window: &Window,
    t_grid: &[f64],
    weight: W,
) -> Vec<f64> {
    use rayon::prelude::*;
    let m = t_grid.len();
    let first_at_least = |d: f64| t_grid.partition_point(|&t| t < d);
    let rows: Vec<Vec<f64>> = match window {
        Window::FullSphere => (0..pts.len())
            .into_par_iter()
            .map(|i| {
                let mut bins = vec![0.0; m + 1];
                for j in i + 1..pts.len() {
                    let k = first_at_least(geodesic_distance(&pts[i], &pts[j]));
                    bins[k] += weight(i, j) + weight(j, i);
                }
                bins
            })
            .collect(),
        _ => {
            let depth: Vec<f64> = pts.iter().map(|y| window.depth(y)).collect();
            (0..pts.len())
                .into_par_iter()
                .map(|i| {
                    let mut bins = vec![0.0; m + 1];
                    for j in (0..pts.len()).filter(|&j| j != i) {
                        let lo = first_at_least(geodesic_distance(&pts[i], &pts[j]));
                        let hi = t_grid.partition_point(|&t| t <= depth[j]);
                        if lo < hi {
                            let w = weight(i, j);
                            bins[lo] += w;
                            bins[hi] -= w;
                        }
                    }
                    bins
                })
                .collect()
        }
    };
    let mut total = vec![0.0; m + 1];
    for row in &rows {
        for (t, b) in total.iter_mut().zip(row) {
            *t += b;
        }
    }
    let mut acc = 0.0;
    total[..m]
        .iter()
        .map(|b| {
            acc += b;
            acc
        })
        .collect()
}

/// Ripley's `K`. On the full sphere the pair count is scaled by
/// `4 pi / N(N-1)` or `4 pi / N^2`; in a cap by `nu(A)/N(A)(N(A)-1)` (or
/// `nu(A)/N(A)^2`) with the second point restricted to the eroded cap.
pub fn estimate_k(
    pattern: &PointPattern,
    window: &Window,
    t_grid: &[f64],
    normalization: Normalization,
) -> Result<SummaryTable> {
    check_t_grid(t_grid)?;
    let observed = pattern.restrict(window);
    let n = observed.len();
    if n < 2 {
        return Err(Error::input(format!("K needs at least two observed points, got {n}")));
    }
    let scale = window.area() / normalization.pairs(n);
    let sums = pair_sums(observed.points(), window, t_grid, |_, _| 1.0);
    SummaryTable::new(
        t_grid.to_vec(),
        sums.into_iter().map(|s| Some(scale * s)).collect(),
        Statistic::K,
        Estimator::for_window(window),
        Some(normalization),
    )
}

/// Inhomogeneous `K` with a known intensity function: pairs weighted by
/// `1 / (nu(A) rho(x) rho(y))`.
pub fn estimate_k_inhom<I: Fn(&UnitVector) -> f64>(
    pattern: &PointPattern,
    intensity: I,
    window: &Window,
    t_grid: &[f64],
) -> Result<SummaryTable> {
    check_t_grid(t_grid)?;
    let observed = pattern.restrict(window);
    let rho: Vec<f64> = observed.iter().map(&intensity).collect();
    if let Some((x, r)) = observed.iter().zip(&rho).find(|(_, r)| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::input(format!(
            "intensity must be positive at observed points, got {r} at {x:?}"
        )));
    }
    let area = window.area();
    let sums = pair_sums(observed.points(), window, t_grid, |i, j| 1.0 / (rho[i] * rho[j]));
    SummaryTable::new(
        t_grid.to_vec(),
        sums.into_iter().map(|s| Some(s / area)).collect(),
        Statistic::KInhom,
        Estimator::for_window(window),
        None,
    )
}

/// Kernel intensity estimate with von Mises-Fisher kernels of angular
/// bandwidth `h` (concentration `1/h^2`).
#[derive(Debug, Clone)]
pub struct KernelIntensity {
    points: Vec<UnitVector>,
    concentration: f64,
    scale: f64,
}

impl KernelIntensity {
    pub fn new(pattern: &PointPattern, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::input(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let kappa = bandwidth.powi(-2);
        Ok(KernelIntensity {
            points: pattern.points().to_vec(),
            concentration: kappa,
            scale: kappa / (2.0 * PI * -(-2.0 * kappa).exp_m1()),
        })
    }

    pub fn eval(&self, x: &UnitVector) -> f64 {
        self.points
            .iter()
            .map(|y| (self.concentration * (x.dot(y) - 1.0)).exp())
            .sum::<f64>()
            * self.scale
    }
}

/// `J = (1 - G)/(1 - F)`, undefined where either input is undefined or
/// `F = 1`.
pub fn estimate_j(f: &SummaryTable, g: &SummaryTable) -> Result<SummaryTable> {
    if !f.same_grid(g) {
        return Err(Error::input("F and G tables are on different grids"));
    }
    let values = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(fv, gv)| match (fv, gv) {
            (Some(fv), Some(gv)) if *fv < 1.0 => Some((1.0 - gv) / (1.0 - fv)),
            _ => None,
        })
        .collect();
    let estimator = if f.estimator == g.estimator {
        f.estimator
    } else {
        Estimator::MinusSampling
    };
    SummaryTable::new(f.t.clone(), values, Statistic::J, estimator, None)
}

/// Reference curves for a Poisson process of intensity `rho`.
pub fn theoretical_poisson(statistic: Statistic, rho: f64, t_grid: &[f64]) -> Result<SummaryTable> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::input(format!("intensity must be positive, got {rho}")));
    }
    check_t_grid(t_grid)?;
    let value = |t: f64| match statistic {
        Statistic::K | Statistic::KInhom => 4.0 * PI * (0.5 * t).sin().powi(2),
        Statistic::F | Statistic::G => -(-4.0 * PI * rho * (0.5 * t).sin().powi(2)).exp_m1(),
        Statistic::J => 1.0,
    };
    SummaryTable::new(
        t_grid.to_vec(),
        t_grid.iter().map(|&t| Some(value(t))).collect(),
        statistic,
        Estimator::Theoretical,
        None,
    )
}

/// Pointwise mean and standard error over replicate tables.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledTable {
    pub mean: SummaryTable,
    pub standard_error: Vec<Option<f64>>,
    /// Replicates with a defined value at each grid point.
    pub count: Vec<usize>,
}

pub fn pool(tables: &[SummaryTable]) -> Result<PooledTable> {
    let first = tables
        .first()
        .ok_or_else(|| Error::input("nothing to pool"))?;
    if let Some(bad) = tables.iter().find(|t| !t.same_grid(first) || t.statistic != first.statistic) {
        return Err(Error::input(format!(
            "cannot pool {} with {} on a different grid",
            bad.statistic, first.statistic
        )));
    }
    let m = first.len();
    let mut mean = Vec::with_capacity(m);
    let mut se = Vec::with_capacity(m);
    let mut count = Vec::with_capacity(m);
    for i in 0..m {
        let vals: Vec<f64> = tables.iter().filter_map(|t| t.values[i]).collect();
        let n = vals.len();
        count.push(n);
        if n == 0 {
            mean.push(None);
            se.push(None);
            continue;
        }
        let mu = vals.iter().sum::<f64>() / n as f64;
        mean.push(Some(mu));
        se.push((n > 1).then(|| {
            let var = vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        }));
    }
    Ok(PooledTable {
        mean: SummaryTable::new(
            first.t.clone(),
            mean,
            first.statistic,
            first.estimator,
            first.normalization,
        )?,
        standard_error: se,
        count,
    })
}
