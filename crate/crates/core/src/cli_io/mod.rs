//! Command-line front end: configuration, deterministic output files, plots.
//!
//! Exit codes: 0 success, 1 numerical failure (with `error.json`), 2 usage.

pub mod config;
pub mod csv;
pub mod svg;

use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::evolution::{
    energy_drift, evolve_linear, first_crossing, growth_rate_fit, random_seed_vector,
    stability_bound, EvolveConfig,
};
use crate::family_analysis::{
    asymptotic_ladder, ladder_monotone, scaling_defect, AsymptoticConfig, Deviations,
    MasslessConfig,
};
use crate::phase_plane::{
    containment, decay_fit, decay_fit_adapted, integrate_unstable_manifold, PhaseConfig,
};
use crate::spectrum::{
    classify_stability, critical_redshift, escape_time, spectrum_at, spectrum_ladder,
    Classification,
};
use crate::steady_state::{diagnostics, solve_steady_state, sweep_family, SteadyConfig};

pub use config::{Command, RunConfig, SeedKind};
pub use csv::{Column, Table};
pub use svg::{emit_svg, PlotKind, PlotStyle, Scale, Series};

#[derive(Debug, Parser)]
#[command(name = "hardphase", version, about = "Hard-phase star laboratory")]
struct Cli {
    /// Pipeline to run; may instead come from --config.
    #[arg(value_enum)]
    command: Option<Command>,
    /// Flat key = value config file (for example a previous config.txt).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    /// Comma separated, ascending.
    #[arg(long, allow_negative_numbers = true)]
    kappa_list: Option<String>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    plot: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tau_max: Option<f64>,
    /// Any config key, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Effective config: CLI flags over the config file over defaults.
fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let file = match &cli.config {
        Some(p) => config::read_pairs(p)?,
        None => Default::default(),
    };
    let command = match (cli.command, file.get("command")) {
        (Some(c), _) => c,
        (None, Some(c)) => Command::parse(c)?,
        (None, None) => return Err(Error::Usage("no command given".into())),
    };
    let mut cfg = RunConfig::new(command);
    cfg.apply(&file)?;
    cfg.command = command;
    if let Some(k) = cli.kappa {
        cfg.kappa = Some(k);
    }
    if let Some(l) = &cli.kappa_list {
        cfg.set("kappa_list", l)?;
        cfg.kappa = None;
    }
    if let Some(n) = cli.grid {
        cfg.grid_size = n;
        if command == Command::Evolve {
            cfg.evolve_grid = n;
        }
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if cli.plot {
        cfg.plot = true;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(e) = cli.eps {
        cfg.eps = e;
    }
    if let Some(t) = cli.tau_max {
        cfg.tau_max = t;
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--set expects key=value, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn steady_cfg(cfg: &RunConfig) -> SteadyConfig {
    SteadyConfig { boundary_tol: cfg.boundary_tol, ..SteadyConfig::default() }.with_grid(cfg.grid_size)
}

/// Files produced by one command, written by a single writer at the end.
#[derive(Default)]
struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    fn add(&mut self, name: &str, body: String) {
        self.files.push((name.into(), body));
    }

    fn csv(&mut self, name: &str, t: &Table) -> Result<()> {
        self.add(name, t.render()?);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
        self.add(name, s + "\n");
        Ok(())
    }

    fn svg(&mut self, name: &str, series: &[Series], style: &PlotStyle) -> Result<()> {
        self.add(name, emit_svg(series, style)?);
        Ok(())
    }
}

fn write_all(dir: &Path, out: &Outputs) -> Result<()> {
    for (name, body) in &out.files {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn run_family(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let rows = sweep_family(&cfg.eos, &cfg.kappas(), &steady_cfg(cfg))?;
    let col = |f: fn(&crate::steady_state::FamilyRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let t = Table::new()
        .float("kappa", col(|r| r.kappa))
        .float("R", col(|r| r.radius))
        .float("M", col(|r| r.mass))
        .float("rho_c", col(|r| r.rho_c))
        .float("compactness", col(|r| r.compactness));
    out.csv("family.csv", &t)?;
    if cfg.plot && rows.len() >= 2 {
        let st = PlotStyle::new(PlotKind::Ladder, "mass against radius", "R", "M");
        out.svg("family.svg", &[Series::new("M(R)", col(|r| r.radius), col(|r| r.mass))], &st)?;
    }
    Ok(())
}

fn run_profile(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let kappa = cfg.kappa_or(1.0);
    let p = solve_steady_state(&cfg.eos, kappa, &steady_cfg(cfg)).map_err(|e| e.at_kappa(kappa))?;
    let t = Table::new()
        .float("r", p.r.clone())
        .float("ybar", p.ybar.clone())
        .float("rho", p.rho.clone())
        .float("p", p.p.clone())
        .float("m", p.mass.clone())
        .float("lambda", p.lambda.clone())
        .float("mu", p.mu.clone());
    out.csv("profile.csv", &t)?;
    let side = json!({
        "kappa": kappa,
        "R": p.radius,
        "M": p.total_mass,
        "c_kappa": p.c_kappa,
        "grid_size": p.intervals(),
        "tolerances": { "boundary_tol": cfg.boundary_tol },
        "diagnostics": diagnostics(&p),
    });
    out.json("profile.json", &side)?;
    if cfg.plot {
        let st = PlotStyle::new(PlotKind::Lines, &format!("steady state, kappa = {kappa}"), "r", "value")
            .scales(Scale::Linear, Scale::Log10);
        out.svg(
            "profile.svg",
            &[Series::new("rho", p.r.clone(), p.rho.clone()), Series::new("p", p.r.clone(), p.p.clone())],
            &st,
        )?;
    }
    Ok(())
}

fn run_spectrum(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let kappas = cfg.kappas();
    let mut rows = spectrum_ladder(&cfg.eos, &kappas, cfg.grid_size, &steady_cfg(cfg))?;
    for r in rows.iter_mut() {
        r.classification = classify_stability(r.nu_star, cfg.marginal_tol)?;
    }
    let t = Table::new()
        .float("kappa", rows.iter().map(|r| r.kappa).collect())
        .float("R", rows.iter().map(|r| r.radius).collect())
        .float("M", rows.iter().map(|r| r.mass).collect())
        .float("nu_star", rows.iter().map(|r| r.nu_star).collect())
        .float("residual", rows.iter().map(|r| r.residual).collect())
        .text("classification", rows.iter().map(|r| r.classification.to_string()).collect());
    out.csv("spectrum.csv", &t)?;
    out.json(
        "spectrum.json",
        &json!({
            "grid_size": cfg.grid_size,
            "tolerances": { "boundary_tol": cfg.boundary_tol, "marginal_tol": cfg.marginal_tol },
            "rows": rows,
        }),
    )?;
    if cfg.plot {
        if rows.len() >= 2 {
            let st = PlotStyle::new(PlotKind::Ladder, "smallest eigenvalue", "kappa", "nu*")
                .scales(Scale::Log10, Scale::Asinh);
            let s = Series::new("nu*", kappas.clone(), rows.iter().map(|r| r.nu_star).collect());
            out.svg("spectrum.svg", &[s], &st)?;
        } else {
            let (_, asm, sr) = spectrum_at(&cfg.eos, kappas[0], cfg.grid_size, &steady_cfg(cfg))?;
            let st = PlotStyle::new(PlotKind::Lines, &format!("bottom mode, kappa = {}", kappas[0]), "y", "chi");
            out.svg("spectrum.svg", &[Series::new("chi*", asm.grid.clone(), sr.chi_star)], &st)?;
        }
    }
    Ok(())
}

fn run_phase(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let traj = integrate_unstable_manifold(cfg.eps, cfg.tau_max, &PhaseConfig::default())?;
    let t = Table::new()
        .float("tau", traj.tau.clone())
        .float("w1", traj.w1.clone())
        .float("w2", traj.w2.clone());
    out.csv("trajectory.csv", &t)?;
    let last = traj.len() - 1;
    out.json(
        "phase.json",
        &json!({
            "eps": cfg.eps,
            "tau_max": cfg.tau_max,
            "samples": traj.len(),
            "final_distance": traj.distance_to_sink(last),
            "containment": containment(&traj)?,
            "decay_fit": decay_fit(&traj)?,
            "decay_fit_adapted": decay_fit_adapted(&traj)?,
        }),
    )?;
    if cfg.plot {
        let st = PlotStyle::new(PlotKind::Phase, "unstable manifold of the origin", "w1", "w2");
        out.svg("phase.svg", &[Series::new("trajectory", traj.w1.clone(), traj.w2.clone())], &st)?;
    }
    Ok(())
}

fn run_asymptotics(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let kappas = cfg.kappas();
    let reps = asymptotic_ladder(&cfg.eos, &kappas, cfg.alpha1, cfg.alpha2, &AsymptoticConfig::default())?;
    let mut t = Table::new()
        .float("kappa", reps.iter().map(|r| r.kappa).collect())
        .float("r1", reps.iter().map(|r| r.window.0).collect())
        .float("r2", reps.iter().map(|r| r.window.1).collect());
    for (i, name) in Deviations::NAMES.iter().enumerate() {
        t = t.float(name, reps.iter().map(|r| r.deviations.as_array()[i]).collect());
    }
    t = t.float("emu_ratio", reps.iter().map(|r| r.emu_ratio).collect());
    out.csv("asymptotics.csv", &t)?;
    let mono = ladder_monotone(&reps);
    let monotone: serde_json::Map<String, Value> =
        Deviations::NAMES.iter().zip(mono).map(|(n, b)| (n.to_string(), Value::Bool(b))).collect();
    let scaling = [0.5, 1.0, 2.0, 3.0]
        .iter()
        .map(|&k| scaling_defect(k, &MasslessConfig::default()))
        .collect::<Result<Vec<_>>>()?;
    out.json(
        "asymptotics.json",
        &json!({
            "alpha": [cfg.alpha1, cfg.alpha2],
            "reports": reps,
            "strictly_decreasing": monotone,
            "scaling": scaling,
        }),
    )?;
    if cfg.plot && reps.len() >= 2 {
        let st = PlotStyle::new(PlotKind::Ladder, "window deviations", "kappa", "max deviation")
            .scales(Scale::Linear, Scale::Log10);
        let series: Vec<Series> = Deviations::NAMES
            .iter()
            .enumerate()
            .map(|(i, n)| Series::new(n, kappas.clone(), reps.iter().map(|r| r.deviations.as_array()[i]).collect()))
            .collect();
        out.svg("asymptotics.svg", &series, &st)?;
    }
    Ok(())
}

const MAX_SAMPLES: usize = 20_000;
/// Fit window for a random seed, in e-folds of the bottom mode.
const RANDOM_EFOLDS: (f64, f64) = (40.0, 60.0);

fn run_evolve(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let kappa = cfg.kappa_or(12.0);
    let n = cfg.evolve_grid;
    let (prof, asm, sr) = spectrum_at(&cfg.eos, kappa, n, &steady_cfg(cfg).with_grid(n))?;
    let nu = sr.nu_star;
    let class = classify_stability(nu, cfg.marginal_tol)?;
    let unit = match cfg.evolve_seed {
        SeedKind::Mode => {
            let norm = asm.mass_norm(&sr.chi_star);
            sr.chi_star.iter().map(|v| v / norm).collect::<Vec<_>>()
        }
        SeedKind::Random => random_seed_vector(&asm, cfg.seed),
    };
    let z0: Vec<f64> = unit.iter().map(|v| v * cfg.delta).collect();
    let bound = stability_bound(&asm)?;
    let dt = if cfg.dt > 0.0 { cfg.dt } else { bound };
    let t_end = if cfg.t_end > 0.0 {
        cfg.t_end
    } else {
        match class {
            Classification::Unstable => match cfg.evolve_seed {
                SeedKind::Mode => 1.1 * escape_time(cfg.delta, cfg.theta0, nu)?.max(5.0 / (-nu).sqrt()),
                // Faster unstable modes sit close to the bottom one.
                SeedKind::Random => RANDOM_EFOLDS.1 / (-nu).sqrt(),
            },
            Classification::Stable => 100.0 * 2.0 * std::f64::consts::PI / nu.sqrt(),
            Classification::Marginal => 100.0,
        }
    };
    let steps = (t_end / dt).ceil() as usize;
    let ecfg = EvolveConfig { sample_every: steps.div_ceil(MAX_SAMPLES).max(1), snapshot_every: 0 };
    // The pure growing mode starts with zeta' = sqrt(-nu) zeta; otherwise at rest.
    let v0: Vec<f64> = match (cfg.evolve_seed, class) {
        (SeedKind::Mode, Classification::Unstable) => z0.iter().map(|v| v * (-nu).sqrt()).collect(),
        _ => vec![0.0; n],
    };
    let ev = evolve_linear(&asm, &z0, &v0, dt, t_end, &ecfg)?;
    out.csv(
        "evolution.csv",
        &Table::new().float("t", ev.times.clone()).float("norm", ev.norm.clone()).float("energy", ev.energy.clone()),
    )?;
    for (i, z) in ev.zeta.iter().enumerate() {
        out.csv(&format!("snapshot_{i}.csv"), &Table::new().float("y", asm.grid.clone()).float("zeta", z.clone()))?;
    }
    let mut report = json!({
        "kappa": kappa,
        "R": prof.radius,
        "grid_size": n,
        "nu_star": nu,
        "classification": class,
        "seed_kind": cfg.evolve_seed,
        "seed": cfg.seed,
        "delta": cfg.delta,
        "dt": dt,
        "dt_bound": bound,
        "t_end": t_end,
        "steps": steps,
        "snapshot_times": ev.snapshot_times,
    });
    // A growing mode has (near) zero energy, so a relative drift means nothing there.
    if class != Classification::Unstable {
        report["energy_drift"] = json!(energy_drift(&ev));
    }
    if class == Classification::Unstable {
        let rate = (-nu).sqrt();
        // A random seed needs the faster modes to die out first.
        let window = match cfg.evolve_seed {
            SeedKind::Mode => (0.0, t_end),
            SeedKind::Random => {
                let t0 = RANDOM_EFOLDS.0 / rate;
                (if t0 < t_end { t0 } else { 0.5 * t_end }, t_end)
            },
        };
        report["predicted_rate"] = json!(rate);
        report["fit_window"] = json!([window.0, window.1]);
        report["fitted_rate"] = json!(growth_rate_fit(&ev, window)?);
        report["theta0"] = json!(cfg.theta0);
        report["escape_time"] = json!(escape_time(cfg.delta, cfg.theta0, nu)?);
        report["measured_crossing"] = json!(first_crossing(&ev, cfg.theta0));
    }
    out.json("evolve.json", &report)?;
    if cfg.plot {
        let st = PlotStyle::new(PlotKind::Lines, &format!("linear evolution, kappa = {kappa}"), "t", "norm")
            .scales(Scale::Linear, Scale::Log10);
        out.svg("evolution.svg", &[Series::new("norm", ev.times.clone(), ev.norm.clone())], &st)?;
    }
    Ok(())
}

fn run_critical(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let sc = steady_cfg(cfg);
    let coarse = critical_redshift(&cfg.eos, cfg.kappa_lo, cfg.kappa_hi, cfg.tol_kappa, cfg.grid_size, &sc)?;
    let fine = critical_redshift(&cfg.eos, cfg.kappa_lo, cfg.kappa_hi, cfg.tol_kappa, 2 * cfg.grid_size, &sc)?;
    out.json(
        "critical.json",
        &json!({
            "kappa_star": coarse.kappa_star,
            "bracket": [coarse.kappa_lo, coarse.kappa_hi],
            "slope": coarse.slope(),
            "result": coarse,
            "refined": fine,
            "refinement_shift": fine.kappa_star - coarse.kappa_star,
        }),
    )?;
    Ok(())
}

fn execute(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    match cfg.command {
        Command::Family => run_family(cfg, out),
        Command::Profile => run_profile(cfg, out),
        Command::Spectrum => run_spectrum(cfg, out),
        Command::Phase => run_phase(cfg, out),
        Command::Asymptotics => run_asymptotics(cfg, out),
        Command::Evolve => run_evolve(cfg, out),
        Command::Critical => run_critical(cfg, out),
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("HARDPHASE_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Usage(format!("HARDPHASE_THREADS = {v:?} is not a positive integer")))?;
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Run the command line `argv` (program name first) and return the exit code.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match init_threads().and_then(|_| effective_config(&cli)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("hardphase: {e}");
            return 2;
        }
    };
    let dir = PathBuf::from(&cfg.output_dir);
    let probe = dir.join(".write_probe");
    if let Err(e) = std::fs::create_dir_all(&dir)
        .and_then(|_| std::fs::write(&probe, b""))
        .and_then(|_| std::fs::remove_file(&probe))
    {
        eprintln!("hardphase: output directory {} is not writable: {e}", dir.display());
        return 2;
    }

    let _ = std::fs::remove_file(dir.join("error.json"));
    let mut out = Outputs::default();
    let result = execute(&cfg, &mut out).and_then(|_| {
        out.add("config.txt", cfg.render());
        let mut names: Vec<String> = out.files.iter().map(|f| f.0.clone()).collect();
        names.push("manifest.json".into());
        let manifest = json!({
            "program": "hardphase",
            "version": env!("CARGO_PKG_VERSION"),
            "command": cfg.command.name(),
            "config": cfg,
            "outputs": names,
        });
        out.json("manifest.json", &manifest)?;
        write_all(&dir, &out)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("hardphase: {e}");
            let report = json!({
                "kind": e.kind(),
                "message": e.to_string(),
                "command": cfg.command.name(),
            });
            let body = serde_json::to_string_pretty(&report).unwrap_or_default() + "\n";
            if let Err(w) = std::fs::write(dir.join("error.json"), body) {
                eprintln!("hardphase: could not write error.json: {w}");
            }
            1
        }
    }
}
