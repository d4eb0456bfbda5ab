//! Monte Carlo envelopes: pointwise envelopes and global rank envelopes
//! over one or several concatenated summary functions.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Model;
use crate::rng::SeedTree;
use crate::simulate::simulate_model;
use crate::sphere::{deterministic_grid, PointPattern, Window};
use crate::summaries::{
    estimate_f, estimate_g, estimate_j, estimate_k, uniform_t_grid, Normalization, Statistic,
    SummaryTable,
};

/// Curve values on a grid; `None` where undefined.
pub type Curve = Vec<Option<f64>>;

/// Default number of Fibonacci reference points for `F`.
pub const DEFAULT_F_GRID: usize = 1024;

/// A summary function to evaluate on every pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticSpec {
    pub statistic: Statistic,
    pub t_grid: Vec<f64>,
    pub window: Window,
    pub normalization: Normalization,
    pub f_grid: usize,
}

impl StatisticSpec {
    pub fn new(statistic: Statistic, t_grid: Vec<f64>) -> Result<Self> {
        if statistic == Statistic::KInhom {
            return Err(Error::input(
                "the inhomogeneous K needs an intensity and is not available for envelopes",
            ));
        }
        Ok(StatisticSpec {
            statistic,
            t_grid,
            window: Window::FullSphere,
            normalization: Normalization::PoisUnbiased,
            f_grid: DEFAULT_F_GRID,
        })
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = window;
        self
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// `K` and `G` on a shared 64-point grid over `[0, pi/3]`.
    pub fn default_pair() -> Vec<StatisticSpec> {
        let t = uniform_t_grid(PI / 3.0, 64).expect("valid default grid");
        vec![
            StatisticSpec::new(Statistic::K, t.clone()).expect("K is supported"),
            StatisticSpec::new(Statistic::G, t).expect("G is supported"),
        ]
    }

    pub fn evaluate(&self, pattern: &PointPattern) -> Result<SummaryTable> {
        let f = || {
            let grid = deterministic_grid(self.f_grid);
            estimate_f(pattern, &grid, &self.window, &self.t_grid)
        };
        match self.statistic {
            Statistic::F => f(),
            Statistic::G => estimate_g(pattern, &self.window, &self.t_grid),
            Statistic::J => estimate_j(&f()?, &estimate_g(pattern, &self.window, &self.t_grid)?),
            Statistic::K => estimate_k(pattern, &self.window, &self.t_grid, self.normalization),
            Statistic::KInhom => Err(Error::input("K_inhom is not available for envelopes")),
        }
    }

    /// Values on the grid; estimator failures give an all-undefined curve.
    fn curve(&self, pattern: &PointPattern) -> Vec<Option<f64>> {
        match self.evaluate(pattern) {
            Ok(table) => table.values,
            Err(e) => {
                log::warn!("{} undefined for a simulated pattern: {e}", self.statistic);
                vec![None; self.t_grid.len()]
            }
        }
    }
}

/// Concatenated values of several statistics.
pub fn concatenated_curve(specs: &[StatisticSpec], pattern: &PointPattern) -> Vec<Option<f64>> {
    specs.iter().flat_map(|s| s.curve(pattern)).collect()
}

/// Evaluates the statistics on `nsim` patterns drawn by `sampler(i)`,
/// `i = 0..nsim`, in parallel. Each pattern is simulated once and shared
/// across statistics.
pub fn simulate_curves<S>(sampler: S, specs: &[StatisticSpec], nsim: usize) -> Result<Vec<Vec<Option<f64>>>>
where
    S: Fn(usize) -> Result<PointPattern> + Sync,
{
    (0..nsim)
        .into_par_iter()
        .map(|i| sampler(i).map(|p| concatenated_curve(specs, &p)))
        .collect()
}

/// Null sampler for a parametric model: simulation `i` uses the child
/// seed tree `i` of `seeds`.
pub fn model_sampler<'a>(model: &'a Model, seeds: SeedTree) -> impl Fn(usize) -> Result<PointPattern> + Sync + 'a {
    move |i| simulate_model(model, &seeds.child(i as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMethod {
    Pointwise,
    GlobalRank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitPoint {
    pub statistic: Statistic,
    pub t: f64,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    /// Comma-separated statistic tags, in concatenation order.
    pub statistic: String,
    pub method: EnvelopeMethod,
    pub nsim: usize,
    /// Pointwise two-sided level, or the global level the hull is drawn at.
    pub alpha: f64,
    pub p_lower: f64,
    pub p_upper: f64,
    pub grid: Vec<f64>,
    /// Statistic of each grid coordinate.
    pub segments: Vec<Statistic>,
    pub data: Vec<Option<f64>>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    pub exit_points: Vec<ExitPoint>,
}

impl EnvelopeResult {
    pub fn data_inside(&self) -> bool {
        self.exit_points.is_empty()
    }
}

fn layout(specs: &[StatisticSpec]) -> Result<(String, Vec<f64>, Vec<Statistic>)> {
    if specs.is_empty() {
        return Err(Error::input("no statistics requested"));
    }
    let name = specs
        .iter()
        .map(|s| s.statistic.tag())
        .collect::<Vec<_>>()
        .join(",");
    let grid = specs.iter().flat_map(|s| s.t_grid.iter().copied()).collect();
    let segments = specs
        .iter()
        .flat_map(|s| std::iter::repeat_n(s.statistic, s.t_grid.len()))
        .collect();
    Ok((name, grid, segments))
}

fn exit_points(
    data: &[Option<f64>],
    lower: &[Option<f64>],
    upper: &[Option<f64>],
    grid: &[f64],
    segments: &[Statistic],
) -> Vec<ExitPoint> {
    let mut out = Vec::new();
    for i in 0..data.len() {
        if let (Some(d), Some(lo), Some(hi)) = (data[i], lower[i], upper[i]) {
            let side = if d < lo {
                Side::Below
            } else if d > hi {
                Side::Above
            } else {
                continue;
            };
            out.push(ExitPoint {
                statistic: segments[i],
                t: grid[i],
                side,
            });
        }
    }
    out
}

/// Pointwise envelope from precomputed curves: at each coordinate the
/// `k`-th smallest and `k`-th largest simulated values. Coordinates where
/// any curve is undefined are gapped.
pub fn pointwise_from_curves(
    data: &[Option<f64>],
    sims: &[Vec<Option<f64>>],
    k: usize,
) -> Result<(Curve, Curve)> {
    let nsim = sims.len();
    if nsim == 0 {
        return Err(Error::input("nsim must be at least 1"));
    }
    if k == 0 || 2 * k > nsim.max(2) {
        return Err(Error::input(format!("rank k = {k} must lie in [1, nsim/2]")));
    }
    if sims.iter().any(|s| s.len() != data.len()) {
        return Err(Error::input("simulated curves are on a different grid"));
    }
    let mut lower = Vec::with_capacity(data.len());
    let mut upper = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let column: Option<Vec<f64>> = sims.iter().map(|s| s[i]).collect();
        match column {
            Some(mut c) if data[i].is_some() => {
                c.sort_by(f64::total_cmp);
                lower.push(Some(c[k - 1]));
                upper.push(Some(c[nsim - k]));
            }
            _ => {
                lower.push(None);
                upper.push(None);
            }
        }
    }
    Ok((lower, upper))
}

/// Pointwise envelope test of `data` against `nsim` null simulations. The
/// two-sided pointwise level is `2k/(nsim+1)`.
pub fn pointwise_envelope<S>(
    data: &PointPattern,
    sampler: S,
    specs: &[StatisticSpec],
    nsim: usize,
    k: usize,
) -> Result<EnvelopeResult>
where
    S: Fn(usize) -> Result<PointPattern> + Sync,
{
    let (statistic, grid, segments) = layout(specs)?;
    let data_curve = evaluate_data(specs, data)?;
    let sims = simulate_curves(sampler, specs, nsim)?;
    let (lower, upper) = pointwise_from_curves(&data_curve, &sims, k)?;
    let level = 2.0 * k as f64 / (nsim + 1) as f64;
    let exits = exit_points(&data_curve, &lower, &upper, &grid, &segments);
    Ok(EnvelopeResult {
        statistic,
        method: EnvelopeMethod::Pointwise,
        nsim,
        alpha: level,
        p_lower: level,
        p_upper: level,
        grid,
        segments,
        data: data_curve,
        lower,
        upper,
        exit_points: exits,
    })
}

fn evaluate_data(specs: &[StatisticSpec], data: &PointPattern) -> Result<Vec<Option<f64>>> {
    let mut out = Vec::new();
    for s in specs {
        out.extend(s.evaluate(data)?.values);
    }
    Ok(out)
}

/// Outcome of a global rank test on complete curves.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTest {
    /// Extreme rank of each curve, data first.
    pub extreme_ranks: Vec<usize>,
    pub p_lower: f64,
    pub p_upper: f64,
    /// Conservative p-value of each curve.
    pub p_values: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Two-sided pointwise ranks with ties given the maximal rank:
/// `min(#{v <= v_j}, #{v >= v_j})`.
fn pointwise_ranks(curves: &[Vec<f64>], coordinate: usize, out: &mut [Vec<usize>]) {
    let mut column: Vec<f64> = curves.iter().map(|c| c[coordinate]).collect();
    column.sort_by(f64::total_cmp);
    let n = column.len();
    for (j, c) in curves.iter().enumerate() {
        let v = c[coordinate];
        let at_most = column.partition_point(|x| x.total_cmp(&v) != Ordering::Greater);
        let below = column.partition_point(|x| x.total_cmp(&v) == Ordering::Less);
        out[j].push(at_most.min(n - below));
    }
}

/// Global rank test. `curves[0]` is the data curve, the rest are null
/// simulations; all must be defined on the same coordinates.
///
/// Curves are ordered by their extreme rank (the minimum pointwise rank)
/// with ties broken by comparing the ascending sorted rank vectors
/// lexicographically. `p_upper` counts the curves at least as extreme as
/// the data (including itself), `p_lower` those strictly more extreme plus
/// the data; both are multiples of `1/(nsim+1)`. The hull is taken over
/// the curves whose conservative p-value exceeds `alpha`.
pub fn global_rank_test(curves: &[Vec<f64>], alpha: f64) -> Result<RankTest> {
    let total = curves.len();
    if total < 2 {
        return Err(Error::input("need the data curve and at least one simulation"));
    }
    let d = curves[0].len();
    if d == 0 {
        return Err(Error::input("curves have no coordinates"));
    }
    if curves.iter().any(|c| c.len() != d) {
        return Err(Error::input("curves are on different grids"));
    }
    if curves.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::input("curves contain undefined values"));
    }
    let mut ranks: Vec<Vec<usize>> = vec![Vec::with_capacity(d); total];
    for i in 0..d {
        pointwise_ranks(curves, i, &mut ranks);
    }
    for r in ranks.iter_mut() {
        r.sort_unstable();
    }
    let extreme_ranks: Vec<usize> = ranks.iter().map(|r| r[0]).collect();
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| ranks[a].cmp(&ranks[b]));
    // Conservative p-value of each curve: share of curves at least as
    // extreme, walking groups of equal rank vectors.
    let mut p_values = vec![0.0; total];
    let mut start = 0;
    while start < total {
        let mut end = start + 1;
        while end < total && ranks[order[end]] == ranks[order[start]] {
            end += 1;
        }
        for &j in &order[start..end] {
            p_values[j] = end as f64 / total as f64;
        }
        start = end;
    }
    let strictly_more = (1..total)
        .filter(|&j| ranks[j].cmp(&ranks[0]) == Ordering::Less)
        .count();
    let p_lower = (1 + strictly_more) as f64 / total as f64;
    let p_upper = p_values[0];
    let mut lower = vec![f64::INFINITY; d];
    let mut upper = vec![f64::NEG_INFINITY; d];
    let mut any = false;
    for (c, &p) in curves.iter().zip(&p_values) {
        if p > alpha {
            any = true;
            for i in 0..d {
                lower[i] = lower[i].min(c[i]);
                upper[i] = upper[i].max(c[i]);
            }
        }
    }
    if !any {
        return Err(Error::input(format!("no curve has p-value above alpha = {alpha}")));
    }
    Ok(RankTest {
        extreme_ranks,
        p_lower,
        p_upper,
        p_values,
        lower,
        upper,
    })
}

/// Global rank envelope test of `data` against `nsim` null simulations,
/// on the concatenation of the requested statistics.
pub fn global_rank_envelope<S>(
    data: &PointPattern,
    sampler: S,
    specs: &[StatisticSpec],
    nsim: usize,
    alpha: f64,
) -> Result<EnvelopeResult>
where
    S: Fn(usize) -> Result<PointPattern> + Sync,
{
    if nsim < 99 {
        return Err(Error::input(format!("the global rank test needs nsim >= 99, got {nsim}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::input(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let (statistic, grid, segments) = layout(specs)?;
    let data_curve = evaluate_data(specs, data)?;
    let sims = simulate_curves(sampler, specs, nsim)?;
    global_from_curves(statistic, grid, segments, data_curve, &sims, alpha)
}

/// Global rank envelope from precomputed curves. Coordinates undefined for
/// any curve are dropped with a warning.
pub fn global_from_curves(
    statistic: String,
    grid: Vec<f64>,
    segments: Vec<Statistic>,
    data: Vec<Option<f64>>,
    sims: &[Vec<Option<f64>>],
    alpha: f64,
) -> Result<EnvelopeResult> {
    if sims.iter().any(|s| s.len() != data.len()) || grid.len() != data.len() {
        return Err(Error::input("simulated curves are on a different grid"));
    }
    let keep: Vec<usize> = (0..data.len())
        .filter(|&i| data[i].is_some() && sims.iter().all(|s| s[i].is_some()))
        .collect();
    let dropped = data.len() - keep.len();
    if dropped > 0 {
        log::warn!("dropping {dropped} coordinates with undefined values from the rank test");
    }
    if keep.is_empty() {
        return Err(Error::Numeric("every coordinate is undefined for some curve".into()));
    }
    let curves: Vec<Vec<f64>> = std::iter::once(&data)
        .chain(sims)
        .map(|c| keep.iter().map(|&i| c[i].unwrap()).collect())
        .collect();
    let test = global_rank_test(&curves, alpha)?;
    let mut lower = vec![None; data.len()];
    let mut upper = vec![None; data.len()];
    for (j, &i) in keep.iter().enumerate() {
        lower[i] = Some(test.lower[j]);
        upper[i] = Some(test.upper[j]);
    }
    let exits = exit_points(&data, &lower, &upper, &grid, &segments);
    Ok(EnvelopeResult {
        statistic,
        method: EnvelopeMethod::GlobalRank,
        nsim: sims.len(),
        alpha,
        p_lower: test.p_lower,
        p_upper: test.p_upper,
        grid,
        segments,
        data,
        lower,
        upper,
        exit_points: exits,
    })
}

impl fmt::Display for EnvelopeResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} envelope of {} with {} simulations: p in [{}, {}], {} exit points",
            self.method,
            self.statistic,
            self.nsim,
            self.p_lower,
            self.p_upper,
            self.exit_points.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_curves(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
            .collect()
    }

    #[test]
    fn most_extreme_data_gets_minimal_p() {
        let mut curves = random_curves(1, 1000, 20);
        curves[0] = vec![2.0; 20];
        let t = global_rank_test(&curves, 0.05).unwrap();
        assert_eq!(t.p_upper, 0.001);
        assert_eq!(t.p_lower, 0.001);
        assert_eq!(t.extreme_ranks[0], 1);
        let mut curves = random_curves(2, 2500, 20);
        curves[0] = vec![-1.0; 20];
        assert_eq!(global_rank_test(&curves, 0.05).unwrap().p_upper, 0.0004);
    }

    #[test]
    fn identical_curves_tie() {
        let curves = vec![vec![1.0, 2.0]; 100];
        let t = global_rank_test(&curves, 0.05).unwrap();
        assert_eq!(t.p_upper, 1.0);
        assert_eq!(t.p_lower, 0.01);
        assert_eq!(t.lower, vec![1.0, 2.0]);
    }

    #[test]
    fn pointwise_examples() {
        let data = vec![Some(0.5), Some(0.5)];
        let sims: Vec<Vec<Option<f64>>> = (0..199).map(|i| vec![Some(i as f64), None]).collect();
        let (lo, hi) = pointwise_from_curves(&data, &sims, 1).unwrap();
        assert_eq!(lo, vec![Some(0.0), None]);
        assert_eq!(hi, vec![Some(198.0), None]);
        let (lo, hi) = pointwise_from_curves(&data, &sims, 5).unwrap();
        assert_eq!((lo[0], hi[0]), (Some(4.0), Some(194.0)));
        assert!(pointwise_from_curves(&data, &sims, 0).is_err());
        assert!(pointwise_from_curves(&data, &sims, 100).is_err());
        let constant = vec![vec![Some(3.0)]; 10];
        let (lo, hi) = pointwise_from_curves(&[Some(3.0)], &constant, 1).unwrap();
        assert_eq!((lo[0], hi[0]), (Some(3.0), Some(3.0)));
    }

    #[test]
    fn undefined_coordinates_are_dropped() {
        let curves = random_curves(3, 100, 5);
        let mut sims: Vec<Vec<Option<f64>>> = curves[1..]
            .iter()
            .map(|c| c.iter().map(|&v| Some(v)).collect())
            .collect();
        sims[7][2] = None;
        let data: Vec<Option<f64>> = curves[0].iter().map(|&v| Some(v)).collect();
        let r = global_from_curves(
            "K".into(),
            vec![0.0, 0.1, 0.2, 0.3, 0.4],
            vec![Statistic::K; 5],
            data,
            &sims,
            0.05,
        )
        .unwrap();
        assert_eq!(r.lower[2], None);
        assert!(r.lower[1].is_some());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn rank_test_is_invariant_under_monotone_maps(seed in 0u64..10_000) {
            let curves = random_curves(seed, 120, 8);
            let mapped: Vec<Vec<f64>> = curves
                .iter()
                .map(|c| c.iter().map(|v| (3.0 * v).exp() - 7.0).collect())
                .collect();
            let a = global_rank_test(&curves, 0.05).unwrap();
            let b = global_rank_test(&mapped, 0.05).unwrap();
            prop_assert_eq!(a.p_lower, b.p_lower);
            prop_assert_eq!(a.p_upper, b.p_upper);
            prop_assert_eq!(a.extreme_ranks, b.extreme_ranks);
        }

        #[test]
        fn hull_contains_data_iff_not_significant(seed in 0u64..10_000, shift in -0.6f64..0.6, d in 1usize..12) {
            let mut curves = random_curves(seed, 200, d);
            for v in curves[0].iter_mut() {
                *v += shift;
            }
            let t = global_rank_test(&curves, 0.05).unwrap();
            prop_assert!(t.p_lower <= t.p_upper);
            prop_assert!(t.p_lower >= 1.0 / 200.0);
            let k = (t.p_upper * 200.0).round();
            prop_assert!((t.p_upper * 200.0 - k).abs() < 1e-9);
            let inside = curves[0]
                .iter()
                .enumerate()
                .all(|(i, v)| *v >= t.lower[i] && *v <= t.upper[i]);
            prop_assert!(t.lower.iter().zip(&t.upper).all(|(l, u)| l <= u));
            prop_assert_eq!(inside, t.p_upper > 0.05);
        }
    }
}
