//! Linearized dynamics Mw zeta'' = -K zeta, integrated with kick-drift-kick
//! leapfrog.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_operator::OperatorAssembly;
use crate::spectrum::Pencil;
use crate::steady_state::{diff2, StarProfile};

/// Safety factor on the leapfrog bound 2 / sqrt(lambda_max).
pub const DT_SAFETY: f64 = 0.5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolveConfig {
    /// Keep a scalar sample (norm, energy) every this many steps.
    pub sample_every: usize,
    /// Keep a full snapshot every this many steps; 0 keeps only the ends.
    pub snapshot_every: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self { sample_every: 1, snapshot_every: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeEvolution {
    pub dt: f64,
    pub times: Vec<f64>,
    /// Mw-norm of zeta.
    pub norm: Vec<f64>,
    /// 1/2 (v^T Mw v + zeta^T K zeta).
    pub energy: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    pub zeta: Vec<Vec<f64>>,
    pub zeta_dot: Vec<Vec<f64>>,
}

/// Largest eigenvalue of the pencil, by inertia bisection.
pub fn max_eigenvalue(asm: &OperatorAssembly) -> Result<f64> {
    let p = Pencil::new(asm.k.clone(), asm.mw.clone())?;
    let n = p.len();
    let (mut lo, mut hi) = p.gershgorin();
    let scale = lo.abs().max(hi.abs());
    while hi - lo > 1e-10 * scale {
        let mid = 0.5 * (lo + hi);
        // count(hi) = n is the invariant
        match p.count_below(mid) {
            Ok(c) if c == n => hi = mid,
            Ok(_) => lo = mid,
            Err(_) => lo = mid,
        }
    }
    Ok(hi)
}

/// dt_max = 0.5 * 2 / sqrt(lambda_max).
pub fn stability_bound(asm: &OperatorAssembly) -> Result<f64> {
    let lmax = max_eigenvalue(asm)?;
    if !(lmax > 0.0) {
        return Err(Error::Degenerate(format!("largest eigenvalue {lmax} not positive")));
    }
    Ok(DT_SAFETY * 2.0 / lmax.sqrt())
}

fn accel(asm: &OperatorAssembly, z: &[f64]) -> Vec<f64> {
    asm.k.matvec(z).iter().zip(&asm.mw).map(|(k, m)| -k / m).collect()
}

fn energy(asm: &OperatorAssembly, z: &[f64], v: &[f64]) -> f64 {
    asm.energy(z, v)
}

pub fn evolve_linear(
    asm: &OperatorAssembly,
    zeta0: &[f64],
    zeta_dot0: &[f64],
    dt: f64,
    t_end: f64,
    cfg: &EvolveConfig,
) -> Result<ModeEvolution> {
    let n = asm.len();
    if zeta0.len() != n || zeta_dot0.len() != n {
        return Err(Error::Degenerate(format!("initial data length must be {n}")));
    }
    if !(t_end > 0.0 && dt > 0.0) {
        return Err(Error::Domain(format!("need dt > 0 and T > 0, got {dt}, {t_end}")));
    }
    let bound = stability_bound(asm)?;
    if dt > bound {
        return Err(Error::Stability { dt, bound });
    }
    let steps = (t_end / dt).ceil() as usize;
    let sample_every = cfg.sample_every.max(1);
    let mut z = zeta0.to_vec();
    let mut v = zeta_dot0.to_vec();
    let mut a = accel(asm, &z);
    let mut ev = ModeEvolution {
        dt,
        times: vec![0.0],
        norm: vec![asm.mass_norm(&z)],
        energy: vec![energy(asm, &z, &v)],
        snapshot_times: vec![0.0],
        zeta: vec![z.clone()],
        zeta_dot: vec![v.clone()],
    };
    for step in 1..=steps {
        for i in 0..n {
            v[i] += 0.5 * dt * a[i];
            z[i] += dt * v[i];
        }
        a = accel(asm, &z);
        for i in 0..n {
            v[i] += 0.5 * dt * a[i];
        }
        let t = step as f64 * dt;
        if step % sample_every == 0 || step == steps {
            ev.times.push(t);
            ev.norm.push(asm.mass_norm(&z));
            ev.energy.push(energy(asm, &z, &v));
        }
        let snap = cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0;
        if snap || step == steps {
            ev.snapshot_times.push(t);
            ev.zeta.push(z.clone());
            ev.zeta_dot.push(v.clone());
        }
    }
    Ok(ev)
}

/// Least-squares slope of ln ||zeta||_Mw over samples with t in [t0, t1].
pub fn growth_rate_fit(ev: &ModeEvolution, window: (f64, f64)) -> Result<f64> {
    let (t0, t1) = window;
    let tmax = *ev.times.last().unwrap_or(&0.0);
    if !(t0 >= 0.0 && t0 < t1 && t1 <= tmax * (1.0 + 1e-12)) {
        return Err(Error::Fit(format!("window [{t0}, {t1}] not inside [0, {tmax}]")));
    }
    let pts: Vec<(f64, f64)> = ev
        .times
        .iter()
        .zip(&ev.norm)
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .map(|(t, n)| (*t, *n))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Fit("fewer than two samples in the window".into()));
    }
    if pts.iter().any(|(_, n)| !(*n > 0.0)) {
        return Err(Error::Fit("vanishing norm in the window".into()));
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ml = pts.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, n) in &pts {
        sxy += (t - mt) * (n.ln() - ml);
        sxx += (t - mt) * (t - mt);
    }
    Ok(sxy / sxx)
}

/// First time the norm reaches `theta`, interpolating ln-norm linearly
/// between samples.
pub fn first_crossing(ev: &ModeEvolution, theta: f64) -> Option<f64> {
    if ev.norm.first().is_some_and(|n| *n >= theta) {
        return Some(0.0);
    }
    for i in 1..ev.norm.len() {
        if ev.norm[i] >= theta {
            let (a, b) = (ev.norm[i - 1].ln(), ev.norm[i].ln());
            let f = (theta.ln() - a) / (b - a);
            return Some(ev.times[i - 1] + f * (ev.times[i] - ev.times[i - 1]));
        }
    }
    None
}

/// Largest relative energy excursion |E(t) - E(0)| / |E(0)|.
pub fn energy_drift(ev: &ModeEvolution) -> f64 {
    let e0 = ev.energy[0];
    ev.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0.abs()
}

/// Mw-unit pseudorandom vector from a 64-bit seed.
pub fn random_seed_vector(asm: &OperatorAssembly, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..asm.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = asm.mass_norm(&x);
    for v in x.iter_mut() {
        *v /= norm;
    }
    x
}

/// delta rho = -(n / y^2)(e^{-mu} y^3 zeta)' with n = (rho + p) e^{mu}.
/// `zeta` holds nodes 1..N; the flux vanishes at the origin. Second-order
/// differences in the mapped coordinate; returns nodes 0..N.
pub fn density_perturbation(profile: &StarProfile, zeta: &[f64]) -> Result<Vec<f64>> {
    let n = profile.intervals();
    if zeta.len() != n {
        return Err(Error::Degenerate(format!("zeta length {} != {n}", zeta.len())));
    }
    let phi: Vec<f64> = (0..=n)
        .map(|j| {
            if j == 0 {
                0.0
            } else {
                (-profile.mu[j]).exp() * profile.r[j].powi(3) * zeta[j - 1]
            }
        })
        .collect();
    let dphi = diff2(&phi, profile.ds());
    Ok((0..=n)
        .map(|j| {
            if j == 0 {
                return 0.0;
            }
            let y = profile.r[j];
            let nk = (profile.rho[j] + profile.p[j]) * profile.mu[j].exp();
            -nk / (y * y) * dphi[j] / profile.dr_ds(j)
        })
        .collect())
}
