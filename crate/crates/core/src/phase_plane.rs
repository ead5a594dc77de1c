//! Autonomous planar system for (w1, w2) = (r^2 rho, m / r) in tau = ln r,
//! for the massless p = rho fluid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::eos::EosSpec;
use crate::error::{Error, Result};
use crate::family_analysis::{window_samples, AsymptoticConfig};
use crate::ode::{dopri45, AdaptiveConfig};

pub type Point = [f64; 2];
pub type Matrix = [[f64; 2]; 2];

/// The sink Z = (1/(16 pi), 1/4).
pub const Z: Point = [1.0 / (16.0 * PI), 0.25];

/// Unstable direction of the origin.
pub const UNSTABLE_DIRECTION: Point = [3.0, 4.0 * PI];

/// Upper edge w2 = 4/9 of the triangle D.
pub const BUCHDAHL_W2: f64 = 4.0 / 9.0;

fn check(w: &Point) -> Result<f64> {
    let den = 1.0 - 2.0 * w[1];
    if !(den > 0.0) {
        return Err(Error::Singularity(format!("w2 = {} >= 1/2", w[1])));
    }
    Ok(den)
}

pub fn vector_field(w: &Point) -> Result<Point> {
    let den = check(w)?;
    Ok([
        w[0] * (2.0 - 6.0 * w[1] - 8.0 * PI * w[0]) / den,
        4.0 * PI * w[0] - w[1],
    ])
}

pub fn jacobian(w: &Point) -> Result<Matrix> {
    let den = check(w)?;
    Ok([
        [
            (2.0 - 6.0 * w[1] - 16.0 * PI * w[0]) / den,
            -w[0] * (2.0 + 16.0 * PI * w[0]) / (den * den),
        ],
        [4.0 * PI, -1.0],
    ])
}

/// div(F / w1) = -8 pi / (1 - 2 w2) - 1 / w1.
pub fn dulac_scalar(w: &Point) -> Result<f64> {
    let den = check(w)?;
    if !(w[0] > 0.0) {
        return Err(Error::Domain(format!("Dulac weight needs w1 > 0, got {}", w[0])));
    }
    Ok(-8.0 * PI / den - 1.0 / w[0])
}

/// Eigenvalues of a real 2x2 matrix as (re, im) pairs.
pub fn eigenvalues(m: &Matrix) -> [(f64, f64); 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = 0.25 * tr * tr - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [(0.5 * tr - s, 0.0), (0.5 * tr + s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [(0.5 * tr, -s), (0.5 * tr, s)]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseTrajectory {
    pub tau: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl PhaseTrajectory {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn point(&self, i: usize) -> Point {
        [self.w1[i], self.w2[i]]
    }

    pub fn distance_to_sink(&self, i: usize) -> f64 {
        (self.w1[i] - Z[0]).hypot(self.w2[i] - Z[1])
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub rtol: f64,
    pub atol: f64,
    pub sink_tol: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-12, sink_tol: 1e-10 }
    }
}

/// Branch of the unstable manifold of the origin, started at
/// eps (3, 4 pi) / |(3, 4 pi)| and integrated over tau in [0, tau_max].
pub fn integrate_unstable_manifold(eps: f64, tau_max: f64, cfg: &PhaseConfig) -> Result<PhaseTrajectory> {
    if !(eps > 0.0 && eps < 1e-2) {
        return Err(Error::Domain(format!("eps = {eps} must lie in (0, 1e-2)")));
    }
    if !(tau_max > 0.0) {
        return Err(Error::Domain(format!("tau_max = {tau_max} must be positive")));
    }
    let norm = UNSTABLE_DIRECTION[0].hypot(UNSTABLE_DIRECTION[1]);
    let w0 = [eps * UNSTABLE_DIRECTION[0] / norm, eps * UNSTABLE_DIRECTION[1] / norm];
    let acfg = AdaptiveConfig {
        rtol: cfg.rtol,
        atol: cfg.atol,
        h0: 1e-3,
        ..AdaptiveConfig::default()
    };
    let f = |_t: f64, w: &Point| vector_field(w);
    let path = dopri45(&f, 0.0, tau_max, &w0, &acfg)?;
    Ok(PhaseTrajectory {
        tau: path.iter().map(|p| p.0).collect(),
        w1: path.iter().map(|p| p.1[0]).collect(),
        w2: path.iter().map(|p| p.1[1]).collect(),
    })
}

/// Closed triangle D = {w1 >= 0, w2 <= 4/9, w2 >= w1}, with a relative
/// slack for rounding.
pub fn in_triangle(w: &Point, slack: f64) -> bool {
    w[0] >= -slack && w[1] <= BUCHDAHL_W2 + slack && w[1] - w[0] >= -slack
}

/// (-1, 1) . F(s, s): the flow across the edge w1 = w2.
pub fn edge_flux(s: f64) -> Result<f64> {
    let f = vector_field(&[s, s])?;
    Ok(f[1] - f[0])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContainmentReport {
    /// First sample index inside D (the start is on the unstable
    /// direction, which points into D).
    pub entered_at: Option<usize>,
    /// All samples after entry stay in D.
    pub stays_inside: bool,
    pub max_w2: f64,
    pub min_w1: f64,
    /// Largest Dulac scalar over the samples (must be negative).
    pub max_dulac: f64,
    /// Smallest edge flux on a grid of the edge w1 = w2 inside D.
    pub min_edge_flux: f64,
}

pub fn containment(traj: &PhaseTrajectory) -> Result<ContainmentReport> {
    let slack = 1e-14;
    let mut entered_at = None;
    let mut stays_inside = true;
    let (mut max_w2, mut min_w1, mut max_dulac) = (f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..traj.len() {
        let w = traj.point(i);
        let inside = in_triangle(&w, slack);
        match entered_at {
            None if inside => entered_at = Some(i),
            Some(_) if !inside => stays_inside = false,
            _ => {}
        }
        max_w2 = max_w2.max(w[1]);
        min_w1 = min_w1.min(w[0]);
        max_dulac = max_dulac.max(dulac_scalar(&w)?);
    }
    let mut min_edge_flux = f64::INFINITY;
    for k in 1..=1000 {
        let s = BUCHDAHL_W2 * k as f64 / 1000.0;
        min_edge_flux = min_edge_flux.min(edge_flux(s)?);
    }
    Ok(ContainmentReport {
        entered_at,
        stays_inside: stays_inside && entered_at.is_some(),
        max_w2,
        min_w1,
        max_dulac,
        min_edge_flux,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayFit {
    /// -slope of ln |w - Z|.
    pub rate: f64,
    /// Angular frequency from zero-crossing spacing.
    pub frequency: f64,
    pub crossings: usize,
    pub segment: (f64, f64),
}

/// Fit on samples with distance to the centre in [lo, hi]. `scale`
/// multiplies the two components before taking distances.
pub fn decay_fit_samples(
    tau: &[f64],
    w1: &[f64],
    w2: &[f64],
    center: Point,
    scale: Point,
    band: (f64, f64),
) -> Result<DecayFit> {
    let dist = |i: usize| (scale[0] * (w1[i] - center[0])).hypot(scale[1] * (w2[i] - center[1]));
    let first = (0..tau.len()).find(|&i| (i..tau.len()).all(|j| dist(j) <= band.1));
    let Some(first) = first else {
        return Err(Error::Fit("trajectory never settles near the centre".into()));
    };
    let idx: Vec<usize> = (first..tau.len()).filter(|&i| dist(i) >= band.0).collect();
    if idx.len() < 8 {
        return Err(Error::Fit(format!("terminal segment has {} samples", idx.len())));
    }
    let last = *idx.last().unwrap();
    let k = idx.len() as f64;
    let mt = idx.iter().map(|&i| tau[i]).sum::<f64>() / k;
    let ml = idx.iter().map(|&i| dist(i).ln()).sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &i in &idx {
        sxy += (tau[i] - mt) * (dist(i).ln() - ml);
        sxx += (tau[i] - mt) * (tau[i] - mt);
    }
    let rate = -sxy / sxx;

    // sign changes of the centred second component, refined by the cubic
    // through four neighbouring samples
    let g = |i: usize| w2[i] - center[1];
    let mut times = Vec::new();
    for i in first..last {
        if g(i) == 0.0 || g(i).signum() != g(i + 1).signum() {
            let lo = i.saturating_sub(1).max(first);
            let hi = (lo + 3).min(last);
            let lo = hi.saturating_sub(3);
            times.push(refine_root(&tau[lo..=hi], &(lo..=hi).map(g).collect::<Vec<_>>(), tau[i], tau[i + 1]));
        }
    }
    if times.len() < 3 {
        return Err(Error::Fit(format!("only {} zero crossings in the segment", times.len())));
    }
    let k = times.len() as f64;
    let mi = (k - 1.0) / 2.0;
    let mt = times.iter().sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (j, t) in times.iter().enumerate() {
        sxy += (j as f64 - mi) * (t - mt);
        sxx += (j as f64 - mi) * (j as f64 - mi);
    }
    let half_period = sxy / sxx;
    Ok(DecayFit {
        rate,
        frequency: PI / half_period,
        crossings: times.len(),
        segment: (tau[idx[0]], tau[last]),
    })
}

/// Root of the Lagrange cubic through (t, g) inside [a, b], by bisection.
fn refine_root(t: &[f64], g: &[f64], a: f64, b: f64) -> f64 {
    let p = |x: f64| {
        let mut acc = 0.0;
        for i in 0..t.len() {
            let mut w = 1.0;
            for j in 0..t.len() {
                if i != j {
                    w *= (x - t[j]) / (t[i] - t[j]);
                }
            }
            acc += w * g[i];
        }
        acc
    };
    let (mut lo, mut hi) = (a, b);
    let mut plo = p(lo);
    if plo == 0.0 {
        return lo;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let pm = p(mid);
        if pm == 0.0 {
            return mid;
        }
        if pm.signum() == plo.signum() {
            lo = mid;
            plo = pm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Terminal decay of a trajectory into Z, on the band of distances
/// [1e-9, 1e-2]. Distances use the Euclidean norm.
pub fn decay_fit(traj: &PhaseTrajectory) -> Result<DecayFit> {
    decay_fit_samples(&traj.tau, &traj.w1, &traj.w2, Z, [1.0, 1.0], (1e-9, 1e-2))
}

/// Same fit in the metric where the linearization at Z is a pure rotation,
/// (w1 - Z1) scaled by 4 pi / sqrt(3); removes the elliptic ripple.
pub fn decay_fit_adapted(traj: &PhaseTrajectory) -> Result<DecayFit> {
    let s = 4.0 * PI / 3f64.sqrt();
    decay_fit_samples(&traj.tau, &traj.w1, &traj.w2, Z, [s, 1.0], (1e-9, 1e-2))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteadyWindowDistance {
    pub kappa: f64,
    /// max |(r^2 rho, m / r) - Z| over the window.
    pub distance: f64,
}

/// Distance of the steady state's phase-plane curve from Z inside the
/// window [kappa^{a1}, kappa^{a2}] e^{-2 kappa} (p(0) = e^{4 kappa}).
pub fn steady_window_distance(
    eos: &EosSpec,
    kappa: f64,
    alpha1: f64,
    alpha2: f64,
) -> Result<SteadyWindowDistance> {
    let s = window_samples(eos, kappa, alpha1, alpha2, &AsymptoticConfig::default())?;
    let distance = s.iter().map(|w| (w.w1 - Z[0]).hypot(w.w2 - Z[1])).fold(0.0, f64::max);
    Ok(SteadyWindowDistance { kappa, distance })
}

/// Least-squares fit d = C kappa^{-delta}; returns (C, delta).
pub fn fit_power_decay(rows: &[SteadyWindowDistance]) -> Result<(f64, f64)> {
    if rows.len() < 2 || rows.iter().any(|r| !(r.distance > 0.0 && r.kappa > 0.0)) {
        return Err(Error::Fit("need two or more positive distances".into()));
    }
    let k = rows.len() as f64;
    let mx = rows.iter().map(|r| r.kappa.ln()).sum::<f64>() / k;
    let my = rows.iter().map(|r| r.distance.ln()).sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for r in rows {
        sxy += (r.kappa.ln() - mx) * (r.distance.ln() - my);
        sxx += (r.kappa.ln() - mx).powi(2);
    }
    let slope = sxy / sxx;
    Ok(((my - slope * mx).exp(), -slope))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibria() {
        assert_eq!(vector_field(&[0.0, 0.0]).unwrap(), [0.0, 0.0]);
        let f = vector_field(&Z).unwrap();
        assert!(f[0].abs() < 1e-17 && f[1].abs() < 1e-16, "{f:?}");
        let g = vector_field(&[1.0 / (16.0 * PI), 0.0]).unwrap();
        assert!((g[0] - 3.0 / (32.0 * PI)).abs() < 1e-16);
        assert!((g[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn jacobians_at_equilibria() {
        let jz = jacobian(&Z).unwrap();
        assert!((jz[0][0] + 1.0).abs() < 1e-15);
        assert!((jz[0][1] + 3.0 / (4.0 * PI)).abs() < 1e-15);
        let ev = eigenvalues(&jz);
        assert!((ev[1].0 + 1.0).abs() < 1e-14 && (ev[1].1 - 3f64.sqrt()).abs() < 1e-14);
        let j0 = jacobian(&[0.0, 0.0]).unwrap();
        assert_eq!(j0, [[2.0, 0.0], [4.0 * PI, -1.0]]);
        let v = UNSTABLE_DIRECTION;
        let jv = [j0[0][0] * v[0] + j0[0][1] * v[1], j0[1][0] * v[0] + j0[1][1] * v[1]];
        assert!((jv[0] - 2.0 * v[0]).abs() < 1e-14 && (jv[1] - 2.0 * v[1]).abs() < 1e-14);
    }

    #[test]
    fn singular_wall() {
        assert!(vector_field(&[0.1, 0.5]).is_err());
        assert!(jacobian(&[0.1, 0.6]).is_err());
    }

    #[test]
    fn synthetic_spiral_fit() {
        let w = 3f64.sqrt();
        let tau: Vec<f64> = (0..4000).map(|i| i as f64 * 0.005).collect();
        let w1: Vec<f64> = tau.iter().map(|t| 1e-3 * (-t).exp() * (w * t).cos()).collect();
        let w2: Vec<f64> = tau.iter().map(|t| 1e-3 * (-t).exp() * (w * t).sin()).collect();
        let fit = decay_fit_samples(&tau, &w1, &w2, [0.0, 0.0], [1.0, 1.0], (1e-12, 1e-2)).unwrap();
        assert!((fit.rate - 1.0).abs() < 1e-6, "{}", fit.rate);
        assert!((fit.frequency - w).abs() < 1e-6, "{}", fit.frequency);
    }

    #[test]
    fn power_fit_recovers_exponent() {
        let rows: Vec<SteadyWindowDistance> = [2.0f64, 4.0, 8.0]
            .iter()
            .map(|k| SteadyWindowDistance { kappa: *k, distance: 3.0 * k.powf(-0.7) })
            .collect();
        let (c, d) = fit_power_decay(&rows).unwrap();
        assert!((c - 3.0).abs() < 1e-12 && (d - 0.7).abs() < 1e-12);
    }
}
