//! Steady states: the structure ODE for the potential ybar and the mass,
//! free-boundary location, metric closure and structural diagnostics.
//!
//! The radial grid is uniform in s = asinh(r / r_core) with
//! r_core = (2 pi (rho_c / 3 + p_c))^{-1/2}, the length on which ybar drops
//! by one unit near the centre. For large central redshift the core is many
//! orders of magnitude smaller than the star, and a grid uniform in r would
//! not resolve it.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eos::EosSpec;
use crate::error::{Error, Result};
use crate::ode::{rk4_geometric, rk4_span, rk4_step, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyConfig {
    /// Number of grid intervals N (nodes 0..=N).
    pub grid_size: usize,
    /// Tolerance on |ybar(R)|.
    pub boundary_tol: f64,
    /// Start radius of the integration in units of r_core.
    pub series_radius: f64,
    /// RK4 substeps per grid interval.
    pub substeps: usize,
    /// Step in s used while bracketing the boundary.
    pub probe_step: f64,
    /// Largest radius searched for the boundary.
    pub r_max: f64,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        Self {
            grid_size: 4096,
            boundary_tol: 1e-12,
            series_radius: 1e-6,
            substeps: 8,
            probe_step: 1e-2,
            r_max: 1e3,
        }
    }
}

impl SteadyConfig {
    pub fn with_grid(mut self, n: usize) -> Self {
        self.grid_size = n;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.grid_size < 8 {
            return Err(Error::Resolution(format!("grid_size {} < 8", self.grid_size)));
        }
        let pos = [self.boundary_tol, self.series_radius, self.probe_step, self.r_max];
        if pos.iter().any(|v| !(*v > 0.0)) || self.substeps == 0 {
            return Err(Error::Domain("step bounds and tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Sampled steady state on the asinh grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StarProfile {
    pub kappa: f64,
    pub eos: EosSpec,
    pub cfg: SteadyConfig,
    /// r = r_core sinh(s).
    pub r_core: f64,
    /// s at the boundary; node j sits at s_j = s_max j / N.
    pub s_max: f64,
    pub r: Vec<f64>,
    pub ybar: Vec<f64>,
    pub rho: Vec<f64>,
    pub p: Vec<f64>,
    pub mass: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "M")]
    pub total_mass: f64,
    pub c_kappa: f64,
}

impl StarProfile {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Grid intervals N.
    pub fn intervals(&self) -> usize {
        self.r.len() - 1
    }

    /// Uniform spacing in the mapped coordinate s.
    pub fn ds(&self) -> f64 {
        self.s_max / self.intervals() as f64
    }

    pub fn s(&self, j: usize) -> f64 {
        self.s_max * j as f64 / self.intervals() as f64
    }

    /// dr/ds at node j.
    pub fn dr_ds(&self, j: usize) -> f64 {
        self.r_core * self.s(j).cosh()
    }

    pub fn rho_c(&self) -> f64 {
        self.rho[0]
    }

    pub fn p_c(&self) -> f64 {
        self.p[0]
    }

    pub fn compactness(&self) -> f64 {
        2.0 * self.total_mass / self.radius
    }

    /// Same star on a grid with `n` intervals.
    pub fn resolve_with_grid(&self, n: usize) -> Result<StarProfile> {
        if n == self.intervals() {
            return Ok(self.clone());
        }
        solve_steady_state(&self.eos, self.kappa, &self.cfg.with_grid(n))
    }
}

struct Tov<'a> {
    eos: &'a EosSpec,
    r_core: f64,
}

impl Tov<'_> {
    /// d(ybar, m)/ds on the analytic fluid branch.
    fn rhs(&self, s: f64, y: &State<2>) -> Result<State<2>> {
        let r = self.r_core * s.sinh();
        let drds = self.r_core * s.cosh();
        let (yb, m) = (y[0], y[1]);
        let rho = self.eos.density_fluid_branch(yb);
        let p = self.eos.pressure_fluid_branch(yb);
        let den = 1.0 - 2.0 * m / r;
        if !(den > 0.0) {
            return Err(Error::Singularity(format!("1 - 2m/r = {den} at r = {r}")));
        }
        let dy = -(m / (r * r) + 4.0 * PI * r * p) / den;
        let dm = 4.0 * PI * r * r * rho;
        Ok([dy * drds, dm * drds])
    }
}

fn central_values(eos: &EosSpec, kappa: f64) -> (f64, f64, f64) {
    let rho_c = eos.density_from_potential(kappa);
    let p_c = eos.pressure_from_potential(kappa);
    let r_core = 1.0 / (2.0 * PI * (rho_c / 3.0 + p_c)).sqrt();
    (rho_c, p_c, r_core)
}

fn series_start(kappa: f64, rho_c: f64, r_core: f64, r: f64) -> State<2> {
    let x = r / r_core;
    [kappa - x * x, 4.0 * PI / 3.0 * rho_c * r * r * r]
}

/// Integrate the structure ODE from central potential `kappa` and return the
/// profile on a grid ending exactly at the free boundary.
pub fn solve_steady_state(eos: &EosSpec, kappa: f64, cfg: &SteadyConfig) -> Result<StarProfile> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Domain(format!("kappa = {kappa} must be positive")));
    }
    cfg.validate()?;
    let (rho_c, _p_c, r_core) = central_values(eos, kappa);
    let tov = Tov { eos, r_core };
    let f = |s: f64, y: &State<2>| tov.rhs(s, y);

    // Pass 1: bracket ybar = 0 and bisect the final step.
    let s_min0 = cfg.series_radius.asinh();
    let s_cap = (cfg.r_max / r_core).asinh();
    let mut s = s_min0;
    let mut y = series_start(kappa, rho_c, r_core, r_core * s.sinh());
    let a0 = loop {
        if s > s_cap {
            return Err(Error::NoBoundary { r_max: cfg.r_max });
        }
        let yn = rk4_step(&f, s, &y, cfg.probe_step)?;
        if yn[0] <= 0.0 {
            let (mut lo, mut hi) = (0.0, cfg.probe_step);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if rk4_step(&f, s, &y, mid)?[0] > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 4.0 * f64::EPSILON * (s + hi) {
                    break;
                }
            }
            break s + 0.5 * (lo + hi);
        }
        y = yn;
        s += cfg.probe_step;
    };

    // Pass 2: integrate on s_j = A j / N and Newton-correct A.
    let n = cfg.grid_size;
    let mut a = a0;
    let mut sol = integrate_grid(&f, kappa, rho_c, r_core, a, cfg)?;
    let mut iter = 0;
    while sol[n][0].abs() > cfg.boundary_tol {
        iter += 1;
        if iter > 30 {
            return Err(Error::Resolution(format!(
                "boundary Newton did not converge: ybar(R) = {}",
                sol[n][0]
            )));
        }
        let d = f(a, &sol[n])?[0];
        a -= sol[n][0] / d;
        sol = integrate_grid(&f, kappa, rho_c, r_core, a, cfg)?;
    }
    Ok(build_profile(eos, kappa, cfg, r_core, a, &sol))
}

fn integrate_grid<F>(
    f: &F,
    kappa: f64,
    rho_c: f64,
    r_core: f64,
    a: f64,
    cfg: &SteadyConfig,
) -> Result<Vec<State<2>>>
where
    F: Fn(f64, &State<2>) -> Result<State<2>>,
{
    let n = cfg.grid_size;
    let s_at = |j: usize| a * j as f64 / n as f64;
    let s_start = cfg.series_radius.asinh().min(0.01 * s_at(1));
    let mut out = Vec::with_capacity(n + 1);
    out.push([kappa, 0.0]);
    let mut y = series_start(kappa, rho_c, r_core, r_core * s_start.sinh());
    // m/r^2 amplifies any error made where r is still tiny against the step
    y = rk4_geometric(f, s_start, s_at(1), &y, cfg.substeps)?;
    out.push(y);
    for j in 1..n {
        y = rk4_span(f, s_at(j), s_at(j + 1), &y, cfg.substeps)?;
        out.push(y);
    }
    Ok(out)
}

fn build_profile(
    eos: &EosSpec,
    kappa: f64,
    cfg: &SteadyConfig,
    r_core: f64,
    a: f64,
    sol: &[State<2>],
) -> StarProfile {
    let n = sol.len() - 1;
    let r: Vec<f64> = (0..=n)
        .map(|j| {
            if j == 0 {
                0.0
            } else {
                r_core * (a * j as f64 / n as f64).sinh()
            }
        })
        .collect();
    let ybar: Vec<f64> = sol.iter().map(|y| y[0]).collect();
    let mass: Vec<f64> = sol.iter().map(|y| y[1]).collect();
    // The last node is the boundary itself and carries the fluid-side limit
    // rho0, p = 0; ybar[n] keeps the solver residual.
    let fluid = |j: usize| if j == n { 0.0 } else { ybar[j] };
    let rho: Vec<f64> = (0..=n).map(|j| eos.density_fluid_branch(fluid(j))).collect();
    let p: Vec<f64> = (0..=n).map(|j| eos.pressure_fluid_branch(fluid(j))).collect();
    let lambda: Vec<f64> = (0..=n)
        .map(|j| if j == 0 { 0.0 } else { -0.5 * (1.0 - 2.0 * mass[j] / r[j]).ln() })
        .collect();
    let radius = r[n];
    let total_mass = mass[n];
    let mu_r = 0.5 * (1.0 - 2.0 * total_mass / radius).ln();
    let mu: Vec<f64> = ybar.iter().map(|&y| mu_r - y).collect();
    StarProfile {
        kappa,
        eos: *eos,
        cfg: *cfg,
        r_core,
        s_max: a,
        r,
        ybar,
        rho,
        p,
        mass,
        lambda,
        mu,
        radius,
        total_mass,
        c_kappa: eos.rho0 * mu_r.exp(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    /// max_j |r (lambda' + mu') - 4 pi r^2 e^{2 lambda} (rho + p)| with
    /// fourth-order differences of the samples.
    pub tov_residual: f64,
    /// Same without the factor r.
    pub tov_residual_unscaled: f64,
    /// tov_residual / ds^2.
    pub tov_constant: f64,
    /// max_j (q_{j+1} - q_j) / |q_j| for q = e^{lambda + mu} (p + w), or 0.
    pub monotone_increment: f64,
    /// max_j 2 m / r.
    pub max_compactness: f64,
    /// max_j |e^{-2 lambda} - (1 - 2 m / r)|.
    pub closure_residual: f64,
    pub lambda_origin: f64,
    pub boundary_residual: f64,
}

/// Fourth-order derivative on a uniform grid of spacing h.
pub fn diff4(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len() - 1;
    assert!(n >= 4);
    let mut d = vec![0.0; n + 1];
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
    for j in 2..n - 1 {
        d[j] = (f[j - 2] - 8.0 * f[j - 1] + 8.0 * f[j + 1] - f[j + 2]) / (12.0 * h);
    }
    d[n - 1] = (3.0 * f[n] + 10.0 * f[n - 1] - 18.0 * f[n - 2] + 6.0 * f[n - 3] - f[n - 4])
        / (12.0 * h);
    d[n] = (25.0 * f[n] - 48.0 * f[n - 1] + 36.0 * f[n - 2] - 16.0 * f[n - 3] + 3.0 * f[n - 4])
        / (12.0 * h);
    d
}

/// Second-order derivative on a uniform grid of spacing h.
pub fn diff2(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len() - 1;
    let mut d = vec![0.0; n + 1];
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    for j in 1..n {
        d[j] = (f[j + 1] - f[j - 1]) / (2.0 * h);
    }
    d[n] = (3.0 * f[n] - 4.0 * f[n - 1] + f[n - 2]) / (2.0 * h);
    d
}

fn tov_residuals(profile: &StarProfile, deriv: fn(&[f64], f64) -> Vec<f64>) -> (f64, f64) {
    let h = profile.ds();
    let dl = deriv(&profile.lambda, h);
    let dm = deriv(&profile.mu, h);
    let (mut scaled, mut raw) = (0.0f64, 0.0f64);
    for j in 1..profile.len() {
        let r = profile.r[j];
        let drds = profile.dr_ds(j);
        let sum = (dl[j] + dm[j]) / drds;
        let rhs = 4.0 * PI * r * (2.0 * profile.lambda[j]).exp() * (profile.rho[j] + profile.p[j]);
        raw = raw.max((sum - rhs).abs());
        scaled = scaled.max((r * (sum - rhs)).abs());
    }
    (scaled, raw)
}

/// Scaled TOV residual with second-order differences (convergence studies).
pub fn tov_residual_second_order(profile: &StarProfile) -> f64 {
    tov_residuals(profile, diff2).0
}

/// Monotone quantity e^{lambda + mu} (p + w) with w = m / (4 pi r^3).
pub fn monotone_quantity(profile: &StarProfile) -> Vec<f64> {
    (0..profile.len())
        .map(|j| {
            let w = if j == 0 {
                profile.rho[0] / 3.0
            } else {
                profile.mass[j] / (4.0 * PI * profile.r[j].powi(3))
            };
            (profile.lambda[j] + profile.mu[j]).exp() * (profile.p[j] + w)
        })
        .collect()
}

pub fn diagnostics(profile: &StarProfile) -> DiagnosticReport {
    let (tov_residual, tov_residual_unscaled) = tov_residuals(profile, diff4);
    let q = monotone_quantity(profile);
    let monotone_increment = q
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].abs())
        .fold(0.0f64, f64::max);
    let mut max_compactness = 0.0f64;
    let mut closure_residual = 0.0f64;
    for j in 1..profile.len() {
        let c = 2.0 * profile.mass[j] / profile.r[j];
        max_compactness = max_compactness.max(c);
        closure_residual =
            closure_residual.max(((-2.0 * profile.lambda[j]).exp() - (1.0 - c)).abs());
    }
    let h = profile.ds();
    DiagnosticReport {
        tov_residual,
        tov_residual_unscaled,
        tov_constant: tov_residual / (h * h),
        monotone_increment,
        max_compactness,
        closure_residual,
        lambda_origin: profile.lambda[0],
        boundary_residual: profile.ybar[profile.intervals()].abs(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyRow {
    pub kappa: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "M")]
    pub mass: f64,
    pub rho_c: f64,
    pub compactness: f64,
}

impl From<&StarProfile> for FamilyRow {
    fn from(p: &StarProfile) -> Self {
        Self {
            kappa: p.kappa,
            radius: p.radius,
            mass: p.total_mass,
            rho_c: p.rho_c(),
            compactness: p.compactness(),
        }
    }
}

/// Independent solves for each kappa (run concurrently on the current
/// rayon pool).
pub fn sweep_family(eos: &EosSpec, kappas: &[f64], cfg: &SteadyConfig) -> Result<Vec<FamilyRow>> {
    if kappas.is_empty() {
        return Err(Error::Domain("empty kappa list".into()));
    }
    if kappas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("kappa list must be strictly ascending".into()));
    }
    kappas
        .par_iter()
        .map(|&k| {
            solve_steady_state(eos, k, cfg)
                .map(|p| FamilyRow::from(&p))
                .map_err(|e| e.at_kappa(k))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(k: f64, n: usize) -> StarProfile {
        solve_steady_state(&EosSpec::hard_phase(), k, &SteadyConfig::default().with_grid(n)).unwrap()
    }

    #[test]
    fn boundary_and_closure() {
        let p = solve(0.5, 1024);
        assert!(p.ybar[1024].abs() <= 1e-12);
        assert_eq!(p.r[1024], p.radius);
        assert_eq!(p.ybar[0], 0.5);
        assert!(p.ybar.windows(2).all(|w| w[1] < w[0]));
        assert!(p.mass.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(p.rho[1024], 1.0);
        assert_eq!(p.p[1024], 0.0);
        let mu_r = 0.5 * (1.0 - 2.0 * p.total_mass / p.radius).ln();
        assert!((p.mu[1024] - mu_r).abs() < 1e-12);
        assert!((p.c_kappa - mu_r.exp()).abs() < 1e-15);
    }

    #[test]
    fn series_near_origin() {
        let k = 0.5;
        let p = solve(k, 4096);
        let e = EosSpec::hard_phase();
        let c = 2.0 * PI * (e.density_from_potential(k) / 3.0 + e.pressure_from_potential(k));
        let mut checked = 0;
        for j in 1..p.len() {
            let r = p.r[j];
            if r > 1e-3 {
                break;
            }
            let series = k - c * r * r;
            // O(r^4) remainder
            assert!((p.ybar[j] - series).abs() < 50.0 * r.powi(4) + 1e-13, "{r} {}", p.ybar[j] - series);
            checked += 1;
        }
        assert!(checked > 3);
    }

    #[test]
    fn small_kappa_newtonian() {
        let p = solve(1e-3, 1024);
        assert!(p.radius < 0.1);
        assert!(p.total_mass / p.radius < 1e-2);
        let q = solve(1e-3, 2048);
        assert!((p.radius - q.radius).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        let e = EosSpec::hard_phase();
        assert!(solve_steady_state(&e, 0.0, &SteadyConfig::default()).is_err());
        assert!(solve_steady_state(&e, -1.0, &SteadyConfig::default()).is_err());
        let cfg = SteadyConfig { r_max: 1e-3, ..SteadyConfig::default() };
        assert!(matches!(
            solve_steady_state(&e, 0.1, &cfg),
            Err(Error::NoBoundary { .. })
        ));
        assert!(sweep_family(&e, &[], &SteadyConfig::default()).is_err());
    }

    #[test]
    fn diff4_exact_on_quartics() {
        let h = 0.1;
        let f: Vec<f64> = (0..20).map(|j| (j as f64 * h).powi(4)).collect();
        let d = diff4(&f, h);
        for (j, dj) in d.iter().enumerate() {
            let x = j as f64 * h;
            assert!((dj - 4.0 * x.powi(3)).abs() < 1e-10);
        }
    }

    #[test]
    fn singleton_sweep_matches_solve() {
        let e = EosSpec::hard_phase();
        let cfg = SteadyConfig::default().with_grid(512);
        let rows = sweep_family(&e, &[0.1], &cfg).unwrap();
        let p = solve_steady_state(&e, 0.1, &cfg).unwrap();
        assert_eq!(rows, vec![FamilyRow::from(&p)]);
    }
}
