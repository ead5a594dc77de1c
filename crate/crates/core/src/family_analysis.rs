//! Large-redshift structure of the family, in the central-pressure
//! parametrization p(0) = e^{4 kappa}: the massless comparison solution, its
//! exact scaling law, the distance between the two solutions near the centre
//! and the window asymptotics.
//!
//! Large-kappa work runs in the rescaled variables p = e^{4 kappa} sigma(tau),
//! r = e^{-2 kappa} tau, where the centre has unit pressure and the window
//! sits at tau of order one.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eos::EosSpec;
use crate::error::{Error, Result};
use crate::ode::{rk4_geometric, rk4_span, State};

/// Start radius (relative to the first node) for leaving the origin.
const ORIGIN_FRACTION: f64 = 1e-6;
const STEPS_PER_OCTAVE: usize = 16;

/// Substeps on the j-th interval from the origin: the 1/r^2 in the
/// equations amplifies the mass-integral error while h/r is of order one.
fn early_substeps(j: usize) -> usize {
    (64 / j.max(1)).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasslessConfig {
    /// Uniform step in r.
    pub step: f64,
    pub r_max: f64,
    /// Stop once p* drops below this value.
    pub floor: f64,
}

impl Default for MasslessConfig {
    fn default() -> Self {
        Self { step: 2.5e-5, r_max: 4.0, floor: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MasslessProfile {
    pub pc: f64,
    pub step: f64,
    pub r: Vec<f64>,
    pub p_star: Vec<f64>,
    /// int_0^r s^2 p* ds.
    pub mass_integral: Vec<f64>,
}

impl MasslessProfile {
    /// 1 / (1 - (8 pi / r) int_0^r s^2 p* ds) at every node (1 at r = 0).
    pub fn buchdahl_ratio(&self) -> Vec<f64> {
        self.r
            .iter()
            .zip(&self.mass_integral)
            .map(|(r, i)| if *r == 0.0 { 1.0 } else { 1.0 / (1.0 - 8.0 * PI * i / r) })
            .collect()
    }

    /// Cubic Lagrange interpolation on the uniform grid, plus an error
    /// estimate from repeating it on every other node. Exact at nodes.
    pub fn interpolate(&self, x: f64) -> Result<(f64, f64)> {
        let n = self.r.len();
        let last = *self.r.last().unwrap();
        if !(x >= 0.0 && x <= last) {
            return Err(Error::Domain(format!("x = {x} outside [0, {last}]")));
        }
        let u = x / self.step;
        let near = u.round() as usize;
        if near < n && self.r[near] == x {
            return Ok((self.p_star[near], 0.0));
        }
        let fine = lagrange4(&self.p_star, u, 1, n);
        let coarse = lagrange4(&self.p_star, u, 2, n);
        Ok((fine, (fine - coarse).abs() / 15.0))
    }
}

/// Cubic through four nodes spaced `stride` apart around u.
fn lagrange4(f: &[f64], u: f64, stride: usize, n: usize) -> f64 {
    let cells = (n - 1) / stride;
    let cell = ((u / stride as f64).floor() as usize).clamp(1, cells.saturating_sub(2).max(1));
    let base = cell - 1;
    let t = u / stride as f64 - base as f64;
    let mut acc = 0.0;
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (t - b as f64) / (a as f64 - b as f64);
            }
        }
        acc += w * f[(base + a) * stride];
    }
    acc
}

fn massless_rhs(r: f64, y: &State<2>) -> Result<State<2>> {
    let (p, i) = (y[0], y[1]);
    let den = 1.0 - 8.0 * PI * i / r;
    if !(den > 0.0) {
        return Err(Error::Singularity(format!("1 - 8 pi I / r = {den} at r = {r}")));
    }
    let dp = -2.0 * p / den * (4.0 * PI * i / (r * r) + 4.0 * PI * r * p);
    Ok([dp, r * r * p])
}

/// Massless system p*' = -2p*(4 pi I / r^2 + 4 pi r p*) / (1 - 8 pi I / r),
/// I' = r^2 p*, from p*(0) = pc on a uniform grid.
pub fn solve_massless(pc: f64, cfg: &MasslessConfig) -> Result<MasslessProfile> {
    if !(pc > 0.0 && pc.is_finite()) {
        return Err(Error::Domain(format!("central pressure {pc} must be positive")));
    }
    if !(cfg.step > 0.0 && cfg.r_max > cfg.step) {
        return Err(Error::Domain("need 0 < step < r_max".into()));
    }
    let h = cfg.step;
    let steps = (cfg.r_max / h).floor() as usize;
    let mut out = MasslessProfile {
        pc,
        step: h,
        r: vec![0.0],
        p_star: vec![pc],
        mass_integral: vec![0.0],
    };
    let r0 = ORIGIN_FRACTION * h.min(pc.powf(-0.5));
    let mut y = [pc - 16.0 * PI / 3.0 * pc * pc * r0 * r0, pc * r0.powi(3) / 3.0];
    y = rk4_geometric(&massless_rhs, r0, h, &y, STEPS_PER_OCTAVE)?;
    for j in 1..=steps {
        if j > 1 {
            let t = (j - 1) as f64 * h;
            y = rk4_span(&massless_rhs, t, t + h, &y, early_substeps(j - 1))?;
        }
        if y[0] < cfg.floor {
            break;
        }
        out.r.push(j as f64 * h);
        out.p_star.push(y[0]);
        out.mass_integral.push(y[1]);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingDefect {
    pub kappa: f64,
    /// sup |p*_k(r) - e^{4k} p*_0(e^{2k} r)| / e^{4k}, interpolation estimate included.
    pub defect: f64,
    pub interpolation_error: f64,
    pub nodes: usize,
}

/// Sup-norm defect of the scaling law p*_k(r) = e^{4k} p*_0(e^{2k} r) over
/// the shared domain, both sides integrated independently with the same
/// absolute step.
pub fn scaling_defect(kappa: f64, cfg: &MasslessConfig) -> Result<ScalingDefect> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::Domain(format!("kappa = {kappa} must be >= 0")));
    }
    let scale_p = (4.0 * kappa).exp();
    let scale_r = (2.0 * kappa).exp();
    let base = solve_massless(1.0, cfg)?;
    let lifted = solve_massless(scale_p, cfg)?;
    let r_base_max = *base.r.last().unwrap();
    let (mut worst, mut interp) = (0.0f64, 0.0f64);
    let mut nodes = 0;
    for (r, p) in lifted.r.iter().zip(&lifted.p_star) {
        let x = scale_r * r;
        if x > r_base_max {
            break;
        }
        let (q, e) = base.interpolate(x)?;
        worst = worst.max((p / scale_p - q).abs() + e);
        interp = interp.max(e);
        nodes += 1;
    }
    Ok(ScalingDefect { kappa, defect: worst, interpolation_error: interp, nodes })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    /// Window [0, window e^{-2 kappa}] in r, i.e. [0, window] in tau.
    pub window: f64,
    pub nodes: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self { window: 10.0, nodes: 4096 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub kappa: f64,
    /// Effective window end in r.
    pub window_r: f64,
    /// The full solution reached its boundary inside the requested window.
    pub truncated: bool,
    /// max |p_k - p*_k| over the window.
    pub max_difference: f64,
    /// max of |p_k - p*_k| / (e^{6k} (r^2 + e^{4k} r^4)) over r > 0.
    pub fitted_c: f64,
    pub tau: Vec<f64>,
    /// e^{-4k} (p_k - p*_k) at the nodes.
    pub delta: Vec<f64>,
}

/// Coupled rescaled system for (sigma*, M*, delta = sigma - sigma*, dM).
/// Differences are formed analytically so that nothing cancels.
fn difference_rhs(inv_cs2: f64, a2: f64) -> impl Fn(f64, &State<4>) -> Result<State<4>> {
    move |t: f64, y: &State<4>| {
        let (ss, ms, d, dm) = (y[0], y[1], y[2], y[3]);
        let ds_ = 1.0 - 2.0 * ms / t;
        let den = 1.0 - 2.0 * (ms + dm) / t;
        if !(ds_ > 0.0 && den > 0.0) {
            return Err(Error::Singularity(format!("1 - 2m/r <= 0 at tau = {t}")));
        }
        let num_s = ms / (t * t) + 4.0 * PI * t * ss;
        let g_s = num_s / ds_;
        let g = (num_s + dm / (t * t) + 4.0 * PI * t * d) / den;
        let dg = ((dm / (t * t) + 4.0 * PI * t * d) * ds_ + num_s * 2.0 * dm / t) / (den * ds_);
        let excess = d * (1.0 + inv_cs2) + ss * (inv_cs2 - 1.0) + a2;
        let dss = -2.0 * ss * g_s;
        let dd = -excess * g - 2.0 * ss * dg;
        let drho = d * inv_cs2 + ss * (inv_cs2 - 1.0) + a2;
        Ok([dss, 4.0 * PI * t * t * ss, dd, 4.0 * PI * t * t * drho])
    }
}

/// Distance between the full solution and its massless counterpart, both
/// from p(0) = e^{4 kappa}, on r in [0, window e^{-2 kappa}].
pub fn compare_p_pstar(eos: &EosSpec, kappa: f64, cfg: &CompareConfig) -> Result<CompareReport> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Domain(format!("kappa = {kappa} must be positive")));
    }
    if !(cfg.window > 0.0 && cfg.nodes >= 2) {
        return Err(Error::Domain("need window > 0 and at least two nodes".into()));
    }
    let alpha2 = (-4.0 * kappa).exp();
    let inv_cs2 = 1.0 / eos.cs2;
    let a2 = alpha2 * eos.rho0;
    let f = difference_rhs(inv_cs2, a2);
    let h = cfg.window / cfg.nodes as f64;
    let t0 = ORIGIN_FRACTION * h;
    // series: sigma = 1 - c tau^2, c - 16 pi / 3 = 2 pi e (2 + e / 3)
    let e = inv_cs2 - 1.0 + a2;
    let dc = 2.0 * PI * e * (2.0 + e / 3.0);
    let mut y = [
        1.0 - 16.0 * PI / 3.0 * t0 * t0,
        4.0 * PI / 3.0 * t0.powi(3),
        -dc * t0 * t0,
        4.0 * PI / 3.0 * e * t0.powi(3),
    ];
    y = rk4_geometric(&f, t0, h, &y, STEPS_PER_OCTAVE)?;
    let mut tau = vec![0.0];
    let mut delta = vec![0.0];
    for j in 1..=cfg.nodes {
        if j > 1 {
            let t = (j - 1) as f64 * h;
            y = rk4_span(&f, t, t + h, &y, early_substeps(j - 1))?;
        }
        if y[0] + y[2] <= 0.0 {
            // past the free boundary of the full solution
            break;
        }
        tau.push(j as f64 * h);
        delta.push(y[2]);
    }
    let amp = (4.0 * kappa).exp();
    // the sup over r > 0 includes the limit r -> 0+, known from the series
    let (mut max_diff, mut c) = (0.0f64, (2.0 * kappa).exp() * dc);
    for (t, d) in tau.iter().zip(&delta).skip(1) {
        max_diff = max_diff.max(amp * d.abs());
        c = c.max((2.0 * kappa).exp() * d.abs() / (t * t + t.powi(4)));
    }
    let truncated = tau.len() <= cfg.nodes;
    Ok(CompareReport {
        kappa,
        window_r: tau.last().unwrap() * (-2.0 * kappa).exp(),
        truncated,
        max_difference: max_diff,
        fitted_c: c,
        tau,
        delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConfig {
    /// Uniform sample nodes across the window.
    pub window_nodes: usize,
    pub min_nodes: usize,
}

impl Default for AsymptoticConfig {
    fn default() -> Self {
        Self { window_nodes: 512, min_nodes: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviations {
    /// max |16 pi r^2 rho - 1|
    pub rho: f64,
    /// max |16 pi r^2 p - 1|
    pub p: f64,
    /// max |4 m / r - 1|
    pub mass: f64,
    /// max |r mu' - 1|
    pub mu_prime: f64,
    /// max |e^{2 lambda} - 2|
    pub lambda: f64,
}

impl Deviations {
    pub const NAMES: [&'static str; 5] = ["rho", "p", "mass", "mu_prime", "lambda"];

    pub fn as_array(&self) -> [f64; 5] {
        [self.rho, self.p, self.mass, self.mu_prime, self.lambda]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub kappa: f64,
    pub alpha: (f64, f64),
    pub window: (f64, f64),
    pub deviations: Deviations,
    /// max / min of e^{mu} / r over the window.
    pub emu_ratio: f64,
    pub nodes: usize,
}

fn rescaled_rhs(inv_cs2: f64, a2: f64) -> impl Fn(f64, &State<2>) -> Result<State<2>> {
    move |t: f64, y: &State<2>| {
        let (s, m) = (y[0], y[1]);
        let den = 1.0 - 2.0 * m / t;
        if !(den > 0.0) {
            return Err(Error::Singularity(format!("1 - 2m/r = {den} at tau = {t}")));
        }
        let rho = s * inv_cs2 + a2;
        let ds = -(s + rho) * (m / (t * t) + 4.0 * PI * t * s) / den;
        Ok([ds, 4.0 * PI * t * t * rho])
    }
}

/// One node of the rescaled window, p(0) = e^{4 kappa}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub r: f64,
    /// r^2 rho
    pub w1: f64,
    /// m / r
    pub w2: f64,
    /// r^2 p
    pub r2p: f64,
    /// r mu'
    pub r_mu_prime: f64,
    pub e2lambda: f64,
    /// e^{mu} / r up to a kappa-dependent constant factor.
    pub emu_over_r: f64,
}

/// Samples of the star with p(0) = e^{4 kappa} on the window
/// [kappa^{a1}, kappa^{a2}] e^{-2 kappa}, from the rescaled integration.
pub fn window_samples(
    eos: &EosSpec,
    kappa: f64,
    alpha1: f64,
    alpha2: f64,
    cfg: &AsymptoticConfig,
) -> Result<Vec<WindowSample>> {
    if !(0.0 < alpha1 && alpha1 < alpha2 && alpha2 < 0.25) {
        return Err(Error::Domain(format!(
            "need 0 < alpha1 < alpha2 < 1/4, got {alpha1}, {alpha2}"
        )));
    }
    if !(kappa > 1.0 && kappa.is_finite()) {
        return Err(Error::Domain(format!("kappa = {kappa} must exceed 1")));
    }
    if cfg.window_nodes < cfg.min_nodes.max(2) {
        return Err(Error::Resolution(format!(
            "{} window nodes, need {}",
            cfg.window_nodes, cfg.min_nodes
        )));
    }
    let (t1, t2) = (kappa.powf(alpha1), kappa.powf(alpha2));
    let h = (t2 - t1) / (cfg.window_nodes - 1) as f64;
    let lead = ((t1 / h).floor() as usize).saturating_sub(1);
    let ta = t1 - lead as f64 * h;
    let alpha_sq = (-4.0 * kappa).exp();
    let inv_cs2 = 1.0 / eos.cs2;
    let a2 = alpha_sq * eos.rho0;
    let f = rescaled_rhs(inv_cs2, a2);
    let t0 = ORIGIN_FRACTION * ta;
    let rc = inv_cs2 + a2;
    let c = 2.0 * PI * (1.0 + rc) * (rc / 3.0 + 1.0);
    let mut y = [1.0 - c * t0 * t0, 4.0 * PI / 3.0 * rc * t0.powi(3)];
    y = rk4_geometric(&f, t0, ta, &y, STEPS_PER_OCTAVE)?;
    for k in 0..lead {
        let t = ta + k as f64 * h;
        y = rk4_span(&f, t, t + h, &y, early_substeps(k + 1))?;
    }
    let scale = (-2.0 * kappa).exp();
    let mut out = Vec::with_capacity(cfg.window_nodes);
    for k in 0..cfg.window_nodes {
        let t = t1 + k as f64 * h;
        if k > 0 {
            y = rk4_span(&f, t - h, t, &y, early_substeps(lead + k))?;
        }
        let (s, m) = (y[0], y[1]);
        let rho = s * inv_cs2 + a2;
        let e2l = 1.0 / (1.0 - 2.0 * m / t);
        // mu = const - ybar, so e^mu / r is proportional to e^{-ybar} / tau
        let ybar = eos.q_potential(rho / alpha_sq)?;
        out.push(WindowSample {
            r: t * scale,
            w1: t * t * rho,
            w2: m / t,
            r2p: t * t * s,
            r_mu_prime: e2l * (4.0 * PI * t * t * s + m / t),
            e2lambda: e2l,
            emu_over_r: (-ybar).exp() / t,
        });
    }
    Ok(out)
}

/// Window maxima of the deviations from the self-similar values, on
/// [kappa^{a1}, kappa^{a2}] e^{-2 kappa} for the star with p(0) = e^{4 kappa}.
pub fn asymptotic_report(
    eos: &EosSpec,
    kappa: f64,
    alpha1: f64,
    alpha2: f64,
    cfg: &AsymptoticConfig,
) -> Result<AsymptoticReport> {
    let samples = window_samples(eos, kappa, alpha1, alpha2, cfg)?;
    let mut dev = [0.0f64; 5];
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for w in &samples {
        let vals = [
            16.0 * PI * w.w1 - 1.0,
            16.0 * PI * w.r2p - 1.0,
            4.0 * w.w2 - 1.0,
            w.r_mu_prime - 1.0,
            w.e2lambda - 2.0,
        ];
        for (d, v) in dev.iter_mut().zip(vals) {
            *d = d.max(v.abs());
        }
        lo = lo.min(w.emu_over_r);
        hi = hi.max(w.emu_over_r);
    }
    Ok(AsymptoticReport {
        kappa,
        alpha: (alpha1, alpha2),
        window: (samples[0].r, samples.last().unwrap().r),
        deviations: Deviations {
            rho: dev[0],
            p: dev[1],
            mass: dev[2],
            mu_prime: dev[3],
            lambda: dev[4],
        },
        emu_ratio: hi / lo,
        nodes: samples.len(),
    })
}

pub fn asymptotic_ladder(
    eos: &EosSpec,
    kappas: &[f64],
    alpha1: f64,
    alpha2: f64,
    cfg: &AsymptoticConfig,
) -> Result<Vec<AsymptoticReport>> {
    kappas
        .par_iter()
        .map(|&k| asymptotic_report(eos, k, alpha1, alpha2, cfg).map_err(|e| e.at_kappa(k)))
        .collect()
}

/// Per deviation: is the sequence of window maxima strictly decreasing
/// along the ladder?
pub fn ladder_monotone(reports: &[AsymptoticReport]) -> [bool; 5] {
    let mut out = [true; 5];
    for w in reports.windows(2) {
        let (a, b) = (w[0].deviations.as_array(), w[1].deviations.as_array());
        for i in 0..5 {
            out[i] &= b[i] < a[i];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> MasslessConfig {
        MasslessConfig { step: 1e-3, r_max: 2.0, floor: 0.0 }
    }

    #[test]
    fn massless_taylor_coefficient() {
        let m = solve_massless(1.0, &MasslessConfig { step: 1e-4, r_max: 0.01, floor: 0.0 }).unwrap();
        // (p(r) - 1) / r^2 -> -16 pi / 3, i.e. p'/r -> -32 pi / 3
        let j = 5;
        let r = m.r[j];
        let c = (m.p_star[j] - 1.0) / (r * r);
        assert!((c + 16.0 * PI / 3.0).abs() < 1e-3, "{c}");
    }

    #[test]
    fn massless_is_decreasing_and_below_buchdahl() {
        for pc in [0.5, 1.0, 10.0] {
            let m = solve_massless(pc, &coarse()).unwrap();
            assert_eq!(m.p_star[0], pc);
            assert!(m.p_star.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
            assert!(m.buchdahl_ratio().iter().all(|b| *b < 9.0));
        }
    }

    #[test]
    fn scaling_identity_at_zero() {
        let d = scaling_defect(0.0, &coarse()).unwrap();
        assert_eq!(d.defect, 0.0);
    }

    #[test]
    fn interpolation_exact_on_cubics() {
        let m = MasslessProfile {
            pc: 1.0,
            step: 0.5,
            r: (0..20).map(|i| i as f64 * 0.5).collect(),
            p_star: (0..20).map(|i| (i as f64 * 0.5).powi(3) - 2.0).collect(),
            mass_integral: vec![0.0; 20],
        };
        for x in [0.1, 1.3, 4.77, 9.4] {
            let (v, e) = m.interpolate(x).unwrap();
            assert!((v - (x * x * x - 2.0)).abs() < 1e-12);
            assert!(e < 1e-12);
        }
    }

    #[test]
    fn difference_vanishes_at_origin() {
        let r = compare_p_pstar(&EosSpec::hard_phase(), 2.0, &CompareConfig { window: 1.0, nodes: 256 })
            .unwrap();
        assert_eq!(r.delta[0], 0.0);
        assert!(r.fitted_c.is_finite() && r.fitted_c > 0.0);
    }

    #[test]
    fn rejects_bad_window_exponents() {
        let e = EosSpec::hard_phase();
        let cfg = AsymptoticConfig::default();
        assert!(asymptotic_report(&e, 10.0, 0.2, 0.1, &cfg).is_err());
        assert!(asymptotic_report(&e, 10.0, 0.1, 0.3, &cfg).is_err());
        let thin = AsymptoticConfig { window_nodes: 8, min_nodes: 32 };
        assert!(matches!(
            asymptotic_report(&e, 10.0, 0.1, 0.2, &thin),
            Err(Error::Resolution(_))
        ));
    }
}
