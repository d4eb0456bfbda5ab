use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use rayon::prelude::*;

use spherepp::envelopes::{global_rank_envelope, model_sampler, pointwise_envelope, StatisticSpec};
use spherepp::io::{
    read_pattern, write_envelope_csv, write_envelope_json, write_manifest, write_pattern, write_pooled_csv,
    write_spectrum_csv, write_summary_csv, ReplicateRecord, RunManifest,
};
use spherepp::rng::{SeedTree, Stream};
use spherepp::simulate::{pi_thinning_chi2_streams, simulate_model, GaussianFieldSpec};
use spherepp::sphere::{deterministic_grid, equal_area_projection};
use spherepp::summaries::{
    estimate_f, estimate_g, estimate_j, estimate_k, estimate_k_inhom, pool, uniform_t_grid, KernelIntensity,
    Normalization, PooledTable, Statistic,
};
use spherepp::{Error, Model, ModelSpec, PointPattern, SummaryTable, Window};

use crate::{EnvelopeArgs, GridArgs, Method, ProjectArgs, SimulateArgs, SummaryArgs, TheoryArgs, TheoryStat};

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidInput(msg.into()).into()
}

fn load_pattern(path: &Path) -> anyhow::Result<PointPattern> {
    let file = File::open(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    read_pattern(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Runs `write` against `path`, or standard output when `path` is `None`.
fn with_output<F>(path: Option<&Path>, write: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut dyn Write) -> spherepp::Result<()>,
{
    match path {
        Some(p) => {
            let mut w = create(p)?;
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
        }
    }
    Ok(())
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        let seed = nanos ^ (u64::from(std::process::id()) << 32);
        eprintln!("seed: {seed}");
        seed
    })
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

impl GridArgs {
    fn t_grid(&self) -> anyhow::Result<Vec<f64>> {
        if !(self.tmax > 0.0 && self.tmax <= 180.0) {
            return Err(invalid(format!("--tmax must lie in (0, 180] degrees, got {}", self.tmax)));
        }
        Ok(uniform_t_grid(self.tmax.to_radians().min(std::f64::consts::PI), self.grid_size)?)
    }

    fn normalization(&self) -> anyhow::Result<Normalization> {
        Ok(self.normalization.parse()?)
    }

    fn check_f_grid(&self) -> anyhow::Result<()> {
        if self.f_grid == 0 {
            return Err(invalid("--f-grid must be positive"));
        }
        Ok(())
    }
}

fn parse_stats(names: &[String]) -> anyhow::Result<Vec<Statistic>> {
    let mut out = Vec::new();
    for name in names {
        let s: Statistic = name.trim().parse()?;
        if out.contains(&s) {
            return Err(invalid(format!("statistic {s} requested twice")));
        }
        out.push(s);
    }
    if out.is_empty() {
        return Err(invalid("no statistics requested"));
    }
    Ok(out)
}

pub fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let spec = args.model.require()?;
    let model = Model::new(spec)?;
    if args.n_reps == 0 {
        return Err(invalid("--n-reps must be at least 1"));
    }
    let field = match args.thin_kappa {
        Some(kappa) => Some(GaussianFieldSpec::multiquadric(kappa, args.field_tau, args.field_delta)?),
        None => None,
    };
    let seed = resolve_seed(args.seed);

    let patterns: Vec<PointPattern> = (0..args.n_reps)
        .into_par_iter()
        .map(|r| {
            let seeds = SeedTree::replicate(seed, r as u64);
            let pattern = simulate_model(&model, &seeds)?;
            Ok(match &field {
                Some(f) => pi_thinning_chi2_streams(
                    &pattern,
                    f,
                    &mut seeds.stream(Stream::FieldCoefficients),
                    &mut seeds.stream(Stream::Uniforms),
                ),
                None => pattern,
            })
        })
        .collect::<spherepp::Result<_>>()?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut manifest = RunManifest::new(command_line(), Some(spec), seed, args.n_reps);
    for (r, pattern) in patterns.iter().enumerate() {
        let name = format!("replicate_{r:04}.json");
        let mut w = create(&args.out.join(&name))?;
        write_pattern(&mut w, pattern)?;
        w.flush()?;
        manifest.realized.push(ReplicateRecord {
            replicate: r as u64,
            n: pattern.len(),
            path: name.clone(),
        });
        manifest.outputs.push(name);
    }
    let mut w = create(&args.out.join("manifest.json"))?;
    write_manifest(&mut w, &manifest)?;
    w.flush()?;
    log::info!("wrote {} replicates to {}", args.n_reps, args.out.display());
    Ok(())
}

struct SummaryJob<'a> {
    t_grid: &'a [f64],
    window: &'a Window,
    normalization: Normalization,
    f_grid: usize,
    bandwidth: Option<f64>,
}

impl SummaryJob<'_> {
    fn evaluate(&self, stat: Statistic, pattern: &PointPattern) -> spherepp::Result<SummaryTable> {
        let f = || estimate_f(pattern, &deterministic_grid(self.f_grid), self.window, self.t_grid);
        match stat {
            Statistic::F => f(),
            Statistic::G => estimate_g(pattern, self.window, self.t_grid),
            Statistic::J => estimate_j(&f()?, &estimate_g(pattern, self.window, self.t_grid)?),
            Statistic::K => estimate_k(pattern, self.window, self.t_grid, self.normalization),
            Statistic::KInhom => match self.bandwidth {
                Some(h) => {
                    let intensity = KernelIntensity::new(pattern, h)?;
                    estimate_k_inhom(pattern, |x| intensity.eval(x), self.window, self.t_grid)
                }
                None => {
                    let rho = pattern.restrict(self.window).len() as f64 / self.window.area();
                    estimate_k_inhom(pattern, |_| rho, self.window, self.t_grid)
                }
            },
        }
    }
}

pub fn summary(args: SummaryArgs) -> anyhow::Result<()> {
    let stats = parse_stats(&args.stat)?;
    let t_grid = args.grid.t_grid()?;
    let normalization = args.grid.normalization()?;
    args.grid.check_f_grid()?;
    let bandwidth = match args.bandwidth {
        Some(h) if !(h > 0.0 && h <= 180.0) => {
            return Err(invalid(format!("--bandwidth must lie in (0, 180] degrees, got {h}")))
        }
        h => h.map(f64::to_radians),
    };
    let mut stems = HashSet::new();
    let mut inputs = Vec::with_capacity(args.patterns.len());
    for path in &args.patterns {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| invalid(format!("{} has no file name", path.display())))?;
        if !stems.insert(stem.clone()) {
            return Err(invalid(format!("two input files share the name {stem:?}")));
        }
        inputs.push((stem, load_pattern(path)?));
    }

    let job = SummaryJob {
        t_grid: &t_grid,
        window: &args.grid.window.0,
        normalization,
        f_grid: args.grid.f_grid,
        bandwidth,
    };
    // tables[i][s] for input i and statistic s.
    let tables: Vec<Vec<Option<SummaryTable>>> = inputs
        .par_iter()
        .map(|(stem, pattern)| {
            stats
                .iter()
                .map(|&s| match job.evaluate(s, pattern) {
                    Ok(t) => Some(t),
                    Err(e) => {
                        log::warn!("{stem}: {s} failed: {e}");
                        None
                    }
                })
                .collect()
        })
        .collect();

    let mut pooled: Vec<PooledTable> = Vec::with_capacity(stats.len());
    for (s, stat) in stats.iter().enumerate() {
        let ok: Vec<SummaryTable> = tables.iter().filter_map(|row| row[s].clone()).collect();
        if ok.is_empty() {
            return Err(invalid(format!("{stat} failed for every input pattern")));
        }
        pooled.push(pool(&ok)?);
    }

    let out = &args.out;
    let degrees = args.grid.angle_degrees;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    if args.long {
        let all: Vec<SummaryTable> = tables.iter().flatten().flatten().cloned().collect();
        let mut w = create(&out.join("summaries.csv"))?;
        write_summary_csv(&mut w, &all, degrees)?;
        w.flush()?;
        let mut w = create(&out.join("pooled.csv"))?;
        write_pooled_csv(&mut w, &pooled, degrees)?;
        w.flush()?;
    } else {
        for ((stem, _), row) in inputs.iter().zip(&tables) {
            for table in row.iter().flatten() {
                let mut w = create(&out.join(format!("{stem}.{}.csv", table.statistic.tag())))?;
                write_summary_csv(&mut w, std::slice::from_ref(table), degrees)?;
                w.flush()?;
            }
        }
        for p in &pooled {
            let mut w = create(&out.join(format!("pooled.{}.csv", p.mean.statistic.tag())))?;
            write_pooled_csv(&mut w, std::slice::from_ref(p), degrees)?;
            w.flush()?;
        }
    }
    Ok(())
}

pub fn envelope(args: EnvelopeArgs) -> anyhow::Result<()> {
    let method = if args.pointwise {
        Method::Pointwise
    } else if args.global {
        Method::Global
    } else {
        args.method
    };
    let data = load_pattern(&args.data)?;
    let window = args.grid.window.0;
    let null_spec = match args.null.resolve()? {
        Some(spec) => spec,
        None => ModelSpec::Poisson {
            rho: data.restrict(&window).len() as f64 / window.area(),
        },
    };
    let null = Model::new(null_spec).context("null model")?;
    let t_grid = args.grid.t_grid()?;
    let normalization = args.grid.normalization()?;
    args.grid.check_f_grid()?;
    let specs = parse_stats(&args.stats)?
        .into_iter()
        .map(|s| {
            let mut spec = StatisticSpec::new(s, t_grid.clone())?
                .with_window(window)
                .with_normalization(normalization);
            spec.f_grid = args.grid.f_grid;
            Ok(spec)
        })
        .collect::<spherepp::Result<Vec<_>>>()?;
    let seed = resolve_seed(args.seed);

    let sampler = model_sampler(&null, SeedTree::new(seed));
    let result = match method {
        Method::Global => global_rank_envelope(&data, sampler, &specs, args.nsim, args.alpha)?,
        Method::Pointwise => pointwise_envelope(&data, sampler, &specs, args.nsim, args.rank)?,
    };

    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = create(&out.join("envelope.json"))?;
    write_envelope_json(&mut w, &result)?;
    w.flush()?;
    let mut w = create(&out.join("envelope.csv"))?;
    write_envelope_csv(&mut w, &result, args.grid.angle_degrees)?;
    w.flush()?;
    let mut manifest = RunManifest::new(command_line(), Some(null_spec), seed, args.nsim);
    manifest.outputs = vec!["envelope.json".into(), "envelope.csv".into()];
    let mut w = create(&out.join("manifest.json"))?;
    write_manifest(&mut w, &manifest)?;
    w.flush()?;
    println!("{result}");
    Ok(())
}

fn write_curve(w: &mut dyn Write, name: &str, t: &[f64], values: &[f64], degrees: bool) -> spherepp::Result<()> {
    writeln!(w, "{}", spherepp::io::SUMMARY_HEADER)?;
    for (t, v) in t.iter().zip(values) {
        let t = if degrees { t.to_degrees() } else { *t };
        writeln!(w, "{t},{v},{name},theoretical,NA")?;
    }
    Ok(())
}

pub fn theory(args: TheoryArgs) -> anyhow::Result<()> {
    let model = Model::new(args.model.require()?)?;
    let out = args.out.as_deref();
    if args.stat == TheoryStat::Spectrum {
        let spectrum = model
            .spectrum()
            .ok_or_else(|| invalid("the Poisson model has no spectrum"))?
            .clone();
        return with_output(out, |w| write_spectrum_csv(w, &spectrum));
    }
    if !(args.tmax > 0.0 && args.tmax <= 180.0) {
        return Err(invalid(format!("--tmax must lie in (0, 180] degrees, got {}", args.tmax)));
    }
    let t = uniform_t_grid(args.tmax.to_radians().min(std::f64::consts::PI), args.grid_size)?;
    let (name, values): (&str, Vec<f64>) = match args.stat {
        TheoryStat::K => {
            let k = |s: f64| {
                if args.numeric {
                    model.k_function_numeric(s)
                } else {
                    model.k_function(s)
                }
            };
            ("K", t.iter().map(|&s| k(s)).collect::<spherepp::Result<_>>()?)
        }
        TheoryStat::Pcf => ("pcf", t.iter().map(|&s| model.pcf(s)).collect()),
        TheoryStat::Kernel => ("kernel", t.iter().map(|&s| model.radial_kernel(s)).collect()),
        TheoryStat::Correlation => ("correlation", t.iter().map(|&s| model.correlation(s)).collect()),
        TheoryStat::Spectrum => unreachable!("handled above"),
    };
    with_output(out, |w| write_curve(w, name, &t, &values, args.angle_degrees))
}

pub fn project(args: ProjectArgs) -> anyhow::Result<()> {
    let pattern = load_pattern(&args.pattern)?;
    with_output(args.out.as_deref(), |w| {
        writeln!(w, "hemisphere,u,v")?;
        for p in pattern.iter() {
            let (h, [u, v]) = equal_area_projection(p);
            writeln!(w, "{},{u},{v}", h.tag())?;
        }
        Ok(())
    })
}
