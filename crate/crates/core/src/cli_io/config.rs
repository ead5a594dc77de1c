//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eos::EosSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Family,
    Profile,
    Spectrum,
    Phase,
    Asymptotics,
    Evolve,
    Critical,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Family => "family",
            Command::Profile => "profile",
            Command::Spectrum => "spectrum",
            Command::Phase => "phase",
            Command::Asymptotics => "asymptotics",
            Command::Evolve => "evolve",
            Command::Critical => "critical",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "family" => Command::Family,
            "profile" => Command::Profile,
            "spectrum" => Command::Spectrum,
            "phase" => Command::Phase,
            "asymptotics" => Command::Asymptotics,
            "evolve" => Command::Evolve,
            "critical" => Command::Critical,
            _ => return Err(Error::Usage(format!("unknown command {s:?}"))),
        })
    }

    /// Kappa list used when none is configured.
    pub fn default_kappas(&self) -> Vec<f64> {
        match self {
            Command::Family => vec![0.01, 0.1, 1.0, 5.0, 12.0],
            Command::Asymptotics => vec![8.0, 10.0, 12.0, 14.0],
            _ => vec![0.01, 0.05, 0.1, 8.0, 10.0, 12.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedKind {
    /// The computed bottom eigenvector.
    Mode,
    /// Pseudorandom vector from `seed`.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub eos: EosSpec,
    pub kappa: Option<f64>,
    pub kappa_list: Vec<f64>,
    pub grid_size: usize,
    pub boundary_tol: f64,
    pub marginal_tol: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub eps: f64,
    pub tau_max: f64,
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub tol_kappa: f64,
    pub seed: u64,
    pub evolve_grid: usize,
    pub evolve_seed: SeedKind,
    /// 0 selects the stability-limited default.
    pub dt: f64,
    /// 0 selects five e-folds (unstable) or 100 periods (stable).
    pub t_end: f64,
    pub delta: f64,
    pub theta0: f64,
    pub output_dir: String,
    pub plot: bool,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            eos: EosSpec::hard_phase(),
            kappa: None,
            kappa_list: Vec::new(),
            grid_size: 4096,
            boundary_tol: 1e-12,
            marginal_tol: 1e-8,
            alpha1: 0.1,
            alpha2: 0.2,
            eps: 1e-8,
            tau_max: 30.0,
            kappa_lo: 0.01,
            kappa_hi: 12.0,
            tol_kappa: 1e-4,
            seed: 20_240_917,
            evolve_grid: 512,
            evolve_seed: SeedKind::Mode,
            dt: 0.0,
            t_end: 0.0,
            delta: 1e-6,
            theta0: 1e-2,
            output_dir: "out".into(),
            plot: false,
        }
    }

    pub fn kappa_or(&self, default: f64) -> f64 {
        self.kappa.unwrap_or(default)
    }

    /// Single kappa if given, else the configured or default list.
    pub fn kappas(&self) -> Vec<f64> {
        if let Some(k) = self.kappa {
            vec![k]
        } else if self.kappa_list.is_empty() {
            self.command.default_kappas()
        } else {
            self.kappa_list.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("boundary_tol", self.boundary_tol),
            ("marginal_tol", self.marginal_tol),
            ("eps", self.eps),
            ("tau_max", self.tau_max),
            ("tol_kappa", self.tol_kappa),
            ("delta", self.delta),
            ("theta0", self.theta0),
        ];
        for (k, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Usage(format!("{k} = {v} must be positive")));
            }
        }
        for (k, v) in [("dt", self.dt), ("t_end", self.t_end)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Usage(format!("{k} = {v} must be >= 0")));
            }
        }
        if self.grid_size < 64 || self.evolve_grid < 64 {
            return Err(Error::Usage("grid sizes must be at least 64".into()));
        }
        EosSpec::new(self.eos.cs2, self.eos.rho0).map_err(|e| Error::Usage(e.to_string()))?;
        for k in self.kappa.iter().chain(&self.kappa_list).chain([&self.kappa_lo, &self.kappa_hi]) {
            if !(*k > 0.0 && k.is_finite()) {
                return Err(Error::Usage(format!("kappa = {k} must be positive")));
            }
        }
        if !self.kappa_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Usage("kappa_list must be strictly ascending".into()));
        }
        if !(self.kappa_lo < self.kappa_hi) {
            return Err(Error::Usage("kappa_lo must be below kappa_hi".into()));
        }
        if !(0.0 < self.alpha1 && self.alpha1 < self.alpha2 && self.alpha2 < 0.25) {
            return Err(Error::Usage("need 0 < alpha1 < alpha2 < 1/4".into()));
        }
        if !(self.delta < self.theta0) {
            return Err(Error::Usage("delta must be below theta0".into()));
        }
        Ok(())
    }

    /// One `key = value` line per field, floats in shortest round-trip form.
    pub fn render(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("command", self.command.name().into());
        kv("cs2", self.eos.cs2.to_string());
        kv("rho0", self.eos.rho0.to_string());
        kv("kappa", self.kappa.map(|k| k.to_string()).unwrap_or_default());
        kv("kappa_list", list(&self.kappa_list));
        kv("grid_size", self.grid_size.to_string());
        kv("boundary_tol", self.boundary_tol.to_string());
        kv("marginal_tol", self.marginal_tol.to_string());
        kv("alpha1", self.alpha1.to_string());
        kv("alpha2", self.alpha2.to_string());
        kv("eps", self.eps.to_string());
        kv("tau_max", self.tau_max.to_string());
        kv("kappa_lo", self.kappa_lo.to_string());
        kv("kappa_hi", self.kappa_hi.to_string());
        kv("tol_kappa", self.tol_kappa.to_string());
        kv("seed", self.seed.to_string());
        kv("evolve_grid", self.evolve_grid.to_string());
        kv(
            "evolve_seed",
            match self.evolve_seed {
                SeedKind::Mode => "mode".into(),
                SeedKind::Random => "random".into(),
            },
        );
        kv("dt", self.dt.to_string());
        kv("t_end", self.t_end.to_string());
        kv("delta", self.delta.to_string());
        kv("theta0", self.theta0.to_string());
        kv("output_dir", self.output_dir.clone());
        kv("plot", self.plot.to_string());
        s
    }

    /// Apply `key = value` pairs on top of `self`.
    pub fn apply(&mut self, pairs: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let f = |v: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|_| Error::Usage(format!("{key}: {v:?} is not a number")))
        };
        let u = |v: &str| -> Result<u64> {
            v.parse::<u64>()
                .map_err(|_| Error::Usage(format!("{key}: {v:?} is not an unsigned integer")))
        };
        match key {
            "command" => self.command = Command::parse(v)?,
            "cs2" => self.eos.cs2 = f(v)?,
            "rho0" => self.eos.rho0 = f(v)?,
            "kappa" => self.kappa = if v.is_empty() { None } else { Some(f(v)?) },
            "kappa_list" => {
                self.kappa_list = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',').map(|x| f(x.trim())).collect::<Result<_>>()?
                }
            }
            "grid_size" => self.grid_size = u(v)? as usize,
            "boundary_tol" => self.boundary_tol = f(v)?,
            "marginal_tol" => self.marginal_tol = f(v)?,
            "alpha1" => self.alpha1 = f(v)?,
            "alpha2" => self.alpha2 = f(v)?,
            "eps" => self.eps = f(v)?,
            "tau_max" => self.tau_max = f(v)?,
            "kappa_lo" => self.kappa_lo = f(v)?,
            "kappa_hi" => self.kappa_hi = f(v)?,
            "tol_kappa" => self.tol_kappa = f(v)?,
            "seed" => self.seed = u(v)?,
            "evolve_grid" => self.evolve_grid = u(v)? as usize,
            "evolve_seed" => {
                self.evolve_seed = match v {
                    "mode" => SeedKind::Mode,
                    "random" => SeedKind::Random,
                    _ => return Err(Error::Usage(format!("evolve_seed: {v:?} is not mode|random"))),
                }
            }
            "dt" => self.dt = f(v)?,
            "t_end" => self.t_end = f(v)?,
            "delta" => self.delta = f(v)?,
            "theta0" => self.theta0 = f(v)?,
            "output_dir" => self.output_dir = v.to_string(),
            "plot" => {
                self.plot = v
                    .parse::<bool>()
                    .map_err(|_| Error::Usage(format!("plot: {v:?} is not true|false")))?
            }
            _ => return Err(Error::Usage(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let cmd = pairs
            .get("command")
            .ok_or_else(|| Error::Usage("config has no command".into()))?;
        let mut cfg = RunConfig::new(Command::parse(cmd.trim())?);
        cfg.apply(&pairs)?;
        Ok(cfg)
    }
}

/// `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("line {}: expected key = value", n + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_pairs(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_pairs(&text)
}
