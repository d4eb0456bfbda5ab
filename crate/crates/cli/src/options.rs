use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde_json::{Map, Value};

use spherepp::io::read_model;
use spherepp::{Error, ModelSpec, UnitVector, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Family {
    Poisson,
    Multiquadric,
    InverseMultiquadric,
    MostRepulsive,
    FlexibleSpectrum,
}

/// A model given either as a JSON file or inline.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model spec JSON file.
    #[arg(long, value_name = "FILE", conflicts_with = "model")]
    pub spec: Option<PathBuf>,
    /// Model family, with its parameters as flags.
    #[arg(long, value_enum)]
    pub model: Option<Family>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
}

impl ModelArgs {
    /// The validated model, or `None` when neither a file nor a family
    /// was given.
    pub fn resolve(&self) -> anyhow::Result<Option<ModelSpec>> {
        if let Some(path) = &self.spec {
            let file = File::open(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
            return Ok(Some(read_model(BufReader::new(file))?));
        }
        let Some(family) = self.model else {
            let inline = [self.rho, self.tau, self.delta, self.eta, self.a, self.b, self.kappa];
            if inline.iter().any(Option::is_some) || self.m.is_some() {
                return Err(Error::InvalidInput("model parameters given without --model".into()).into());
            }
            return Ok(None);
        };
        let mut obj = Map::new();
        let name = family.to_possible_value().expect("no skipped variants");
        obj.insert("model".into(), Value::from(name.get_name()));
        let params = [
            ("rho", self.rho),
            ("tau", self.tau),
            ("delta", self.delta),
            ("eta", self.eta),
            ("a", self.a),
            ("b", self.b),
            ("kappa", self.kappa),
        ];
        for (key, v) in params {
            if let Some(v) = v {
                obj.insert(key.into(), Value::from(v));
            }
        }
        if let Some(m) = self.m {
            obj.insert("m".into(), Value::from(m));
        }
        let spec: ModelSpec = serde_json::from_value(Value::Object(obj)).map_err(Error::from)?;
        spec.validate()?;
        Ok(Some(spec))
    }

    pub fn require(&self) -> anyhow::Result<ModelSpec> {
        self.resolve()?
            .ok_or_else(|| Error::InvalidInput("a model is required: use --spec FILE or --model NAME".into()).into())
    }
}

/// Observation window: `full` or `cap:LON,LAT,RADIUS` in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowArg(pub Window);

impl FromStr for WindowArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "full" {
            return Ok(WindowArg(Window::FullSphere));
        }
        let rest = s
            .strip_prefix("cap:")
            .ok_or_else(|| format!("expected `full` or `cap:LON,LAT,RADIUS`, got {s:?}"))?;
        let parts: Vec<f64> = rest
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<_, _>>()?;
        let [lon, lat, radius] = parts[..] else {
            return Err(format!("cap needs three numbers, got {}", parts.len()));
        };
        let center = UnitVector::from_lonlat_degrees(lon, lat).map_err(|e| e.to_string())?;
        Window::cap(center, radius.to_radians())
            .map(WindowArg)
            .map_err(|e| e.to_string())
    }
}
