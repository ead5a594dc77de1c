//! Bottom of the spectrum of the pencil (K, Mw): inertia bisection, inverse
//! iteration, stability classification, the critical redshift and the
//! explicit test-function certificate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eos::EosSpec;
use crate::error::{Error, Result};
use crate::linear_operator::{
    assemble_quadratic_form, cutoff_test_function, test_function_on_window, OperatorAssembly,
    SymTridiag, TestFunction,
};
use crate::scalar::{Dd, Real};
use crate::steady_state::{solve_steady_state, StarProfile, SteadyConfig};

const SHIFT_RETRIES: usize = 8;
const INVERSE_ITERATIONS: usize = 6;

/// Symmetric tridiagonal K with a positive diagonal mass M.
#[derive(Debug, Clone)]
pub struct Pencil<T = f64> {
    pub k: SymTridiag<T>,
    pub m: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct EigenPair<T> {
    pub value: T,
    /// M-normalized, positive at index 0.
    pub vector: Vec<T>,
    pub residual: T,
    pub bisection_steps: usize,
}

impl<T: Real> Pencil<T> {
    pub fn new(k: SymTridiag<T>, m: Vec<T>) -> Result<Self> {
        let n = k.len();
        if n == 0 || m.len() != n || k.off.len() + 1 != n {
            return Err(Error::Degenerate(format!(
                "pencil sizes: diag {}, off {}, mass {}",
                n,
                k.off.len(),
                m.len()
            )));
        }
        if m.iter().any(|v| !(*v > T::zero())) {
            return Err(Error::Degenerate("mass weights must be positive".into()));
        }
        Ok(Self { k, m })
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Gershgorin interval for the eigenvalues of M^{-1/2} K M^{-1/2}.
    pub fn gershgorin(&self) -> (T, T) {
        let n = self.len();
        let mut lo: Option<T> = None;
        let mut hi: Option<T> = None;
        for i in 0..n {
            let mut rad = T::zero();
            if i > 0 {
                rad += self.k.off[i - 1].abs() / (self.m[i - 1] * self.m[i]).sqrt();
            }
            if i + 1 < n {
                rad += self.k.off[i].abs() / (self.m[i] * self.m[i + 1]).sqrt();
            }
            let c = self.k.diag[i] / self.m[i];
            lo = Some(lo.map_or(c - rad, |v: T| v.min(c - rad)));
            hi = Some(hi.map_or(c + rad, |v: T| v.max(c + rad)));
        }
        (lo.unwrap(), hi.unwrap())
    }

    /// Number of eigenvalues below `shift`, from the signs of the LDL^T
    /// pivots of K - shift M. A zero pivot is a breakdown.
    pub fn count_below(&self, shift: T) -> Result<usize> {
        let n = self.len();
        let mut count = 0;
        let mut d = self.k.diag[0] - shift * self.m[0];
        for i in 0..n {
            if i > 0 {
                let b = self.k.off[i - 1];
                d = self.k.diag[i] - shift * self.m[i] - b * b / d;
            }
            if d == T::zero() || !d.to_f64().is_finite() {
                return Err(Error::Breakdown(format!("zero pivot at row {i}")));
            }
            if d < T::zero() {
                count += 1;
            }
        }
        Ok(count)
    }

    /// Inertia count with bounded shift perturbation on breakdown.
    fn count_retry(&self, shift: T, scale: T) -> Result<usize> {
        let mut s = shift;
        let mut bump = T::epsilon() * scale;
        for _ in 0..SHIFT_RETRIES {
            match self.count_below(s) {
                Ok(c) => return Ok(c),
                Err(Error::Breakdown(_)) => {
                    s += bump;
                    bump *= T::from_f64(16.0);
                }
                Err(e) => return Err(e),
            }
        }
        Err(Error::Breakdown(format!(
            "inertia count failed after {SHIFT_RETRIES} shift perturbations near {:?}",
            shift.to_f64()
        )))
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        self.k.matvec(x)
    }

    pub fn m_dot(&self, x: &[T], y: &[T]) -> T {
        x.iter().zip(y).zip(&self.m).fold(T::zero(), |s, ((a, b), m)| s + *a * *b * *m)
    }

    pub fn rayleigh(&self, x: &[T]) -> T {
        self.k.bilinear(x, x) / self.m_dot(x, x)
    }

    /// ||K x - nu M x|| / ||K x||.
    pub fn residual(&self, nu: T, x: &[T]) -> T {
        let kx = self.matvec(x);
        let (mut num, mut den) = (T::zero(), T::zero());
        for i in 0..x.len() {
            let r = kx[i] - nu * self.m[i] * x[i];
            num += r * r;
            den += kx[i] * kx[i];
        }
        (num / den).sqrt()
    }

    /// Solve (K - shift M) x = b with partial pivoting.
    fn shifted_solve(&self, shift: T, b: &[T], floor: T) -> Vec<T> {
        let n = self.len();
        let mut d: Vec<T> = (0..n).map(|i| self.k.diag[i] - shift * self.m[i]).collect();
        let mut du: Vec<T> = self.k.off.clone();
        let dl: &[T] = &self.k.off;
        let mut du2 = vec![T::zero(); n.saturating_sub(2)];
        let mut rhs = b.to_vec();
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == T::zero() {
                    d[i] = floor;
                }
                let f = dl[i] / d[i];
                d[i + 1] -= f * du[i];
                let r = rhs[i];
                rhs[i + 1] -= f * r;
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                let tmp = d[i + 1];
                d[i + 1] = du[i] - f * tmp;
                du[i] = tmp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du2[i];
                }
                rhs.swap(i, i + 1);
                let r = rhs[i];
                rhs[i + 1] -= f * r;
            }
        }
        if d[n - 1] == T::zero() {
            d[n - 1] = floor;
        }
        let mut x = rhs;
        for i in (0..n).rev() {
            let mut v = x[i];
            if i + 1 < n {
                v -= du[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= du2[i] * x[i + 2];
            }
            x[i] = v / d[i];
        }
        x
    }

    /// Smallest eigenpair: bisection on the inertia count from the
    /// Gershgorin interval, then inverse iteration at the bisected shift.
    pub fn smallest(&self) -> Result<EigenPair<T>> {
        let n = self.len();
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(T::from_f64(f64::MIN_POSITIVE));
        let two = T::from_f64(2.0);
        let tol = T::from_f64(4.0) * T::epsilon();
        let mut steps = 0;
        // invariant: count(lo) = 0, count(hi) >= 1
        while hi - lo > tol * lo.abs().max(hi.abs()) + T::from_f64(f64::MIN_POSITIVE) {
            let mid = (lo + hi) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_retry(mid, scale)? >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
            steps += 1;
            if steps > 4000 {
                return Err(Error::Breakdown("bisection did not converge".into()));
            }
        }
        let shift = (lo + hi) / two;

        let floor = T::epsilon() * scale;
        let mut x: Vec<T> = (0..n)
            .map(|i| T::from_f64(1.0 + 0.5 * ((i as f64 * 0.618_033_988_749_895) % 1.0)))
            .collect();
        for _ in 0..INVERSE_ITERATIONS {
            let b: Vec<T> = x.iter().zip(&self.m).map(|(a, m)| *a * *m).collect();
            x = self.shifted_solve(shift, &b, floor);
            let norm = self.m_dot(&x, &x).sqrt();
            if !(norm.to_f64() > 0.0 && norm.to_f64().is_finite()) {
                return Err(Error::Breakdown("inverse iteration produced a null vector".into()));
            }
            for v in x.iter_mut() {
                *v /= norm;
            }
        }
        if x[0] < T::zero() {
            for v in x.iter_mut() {
                *v = -*v;
            }
        }
        let value = self.rayleigh(&x);
        let residual = self.residual(value, &x);
        Ok(EigenPair { value, vector: x, residual, bisection_steps: steps })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Stable,
    Unstable,
    Marginal,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Classification::Stable => "Stable",
            Classification::Unstable => "Unstable",
            Classification::Marginal => "Marginal",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Classification {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Stable" => Ok(Classification::Stable),
            "Unstable" => Ok(Classification::Unstable),
            "Marginal" => Ok(Classification::Marginal),
            _ => Err(Error::Usage(format!("unknown classification {s:?}"))),
        }
    }
}

pub const MARGINAL_TOL: f64 = 1e-8;

pub fn classify_stability(nu: f64, tol: f64) -> Result<Classification> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    Ok(if nu < -tol {
        Classification::Unstable
    } else if nu > tol {
        Classification::Stable
    } else {
        Classification::Marginal
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralResult {
    pub kappa: f64,
    pub nu_star: f64,
    pub chi_star: Vec<f64>,
    pub residual: f64,
    pub classification: Classification,
    pub grid_size: usize,
}

/// Smallest eigenpair of a pencil, solved in double-double and rounded.
pub fn smallest_of_pencil(k: &SymTridiag<f64>, m: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
    let p = Pencil::<Dd>::new(k.convert(), m.iter().map(|v| Dd::from(*v)).collect())?;
    let e = p.smallest()?;
    Ok((e.value.to_f64(), e.vector.iter().map(|v| v.to_f64()).collect(), e.residual.to_f64()))
}

pub fn smallest_eigenpair(asm: &OperatorAssembly) -> Result<SpectralResult> {
    let (nu, chi, residual) = smallest_of_pencil(&asm.k, &asm.mw)?;
    Ok(SpectralResult {
        kappa: asm.kappa,
        nu_star: nu,
        chi_star: chi,
        residual,
        classification: classify_stability(nu, MARGINAL_TOL)?,
        grid_size: asm.len(),
    })
}

/// Solve, assemble on `n` unknowns and take the bottom eigenpair.
pub fn spectrum_at(
    eos: &EosSpec,
    kappa: f64,
    n: usize,
    cfg: &SteadyConfig,
) -> Result<(StarProfile, OperatorAssembly, SpectralResult)> {
    let run = || {
        let prof = solve_steady_state(eos, kappa, &cfg.with_grid(n))?;
        let asm = assemble_quadratic_form(&prof, n)?;
        let sr = smallest_eigenpair(&asm)?;
        Ok((prof, asm, sr))
    };
    run().map_err(|e: Error| e.at_kappa(kappa))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub kappa: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "M")]
    pub mass: f64,
    pub nu_star: f64,
    pub residual: f64,
    pub classification: Classification,
}

/// Independent spectra over a kappa list, in parallel.
pub fn spectrum_ladder(
    eos: &EosSpec,
    kappas: &[f64],
    n: usize,
    cfg: &SteadyConfig,
) -> Result<Vec<SpectrumRow>> {
    kappas
        .par_iter()
        .map(|&k| {
            let (prof, _, sr) = spectrum_at(eos, k, n, cfg)?;
            Ok(SpectrumRow {
                kappa: k,
                radius: prof.radius,
                mass: prof.total_mass,
                nu_star: sr.nu_star,
                residual: sr.residual,
                classification: sr.classification,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalResult {
    pub kappa_star: f64,
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub nu_lo: f64,
    pub nu_hi: f64,
    pub iterations: usize,
    pub grid_size: usize,
}

impl CriticalResult {
    /// Secant slope d nu / d kappa across the final bracket.
    pub fn slope(&self) -> f64 {
        (self.nu_hi - self.nu_lo) / (self.kappa_hi - self.kappa_lo)
    }
}

/// Bisect kappa on the sign of nu* until the bracket is narrower than `tol_kappa`.
pub fn critical_redshift(
    eos: &EosSpec,
    kappa_lo: f64,
    kappa_hi: f64,
    tol_kappa: f64,
    n: usize,
    cfg: &SteadyConfig,
) -> Result<CriticalResult> {
    if !(kappa_lo > 0.0 && kappa_lo < kappa_hi && tol_kappa > 0.0) {
        return Err(Error::Domain(format!(
            "need 0 < kappa_lo < kappa_hi and tol > 0, got {kappa_lo}, {kappa_hi}, {tol_kappa}"
        )));
    }
    let nu = |k: f64| spectrum_at(eos, k, n, cfg).map(|r| r.2.nu_star);
    let (mut a, mut b) = (kappa_lo, kappa_hi);
    let (mut na, mut nb) = (nu(a)?, nu(b)?);
    if !(na > 0.0 && nb < 0.0) {
        return Err(Error::Bracket(format!(
            "nu*({a}) = {na}, nu*({b}) = {nb}; need positive then negative"
        )));
    }
    let mut iterations = 0;
    while b - a > tol_kappa {
        let mid = 0.5 * (a + b);
        let nm = nu(mid)?;
        if nm > 0.0 {
            a = mid;
            na = nm;
        } else {
            b = mid;
            nb = nm;
        }
        iterations += 1;
    }
    // linear interpolation of the sign change inside the final bracket
    let kappa_star = a + (b - a) * na / (na - nb);
    Ok(CriticalResult {
        kappa_star,
        kappa_lo: a,
        kappa_hi: b,
        nu_lo: na,
        nu_hi: nb,
        iterations,
        grid_size: n,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub kappa: f64,
    pub alpha: (f64, f64),
    pub window: (f64, f64),
    /// <K chi, chi>.
    pub form: f64,
    /// form / chi^T Mw chi.
    pub quotient: f64,
    /// form * C_kappa, with C_kappa the geometric mean of e^mu / y over the window.
    pub normalized: f64,
    pub c_kappa_window: f64,
    pub grid_size: usize,
    pub nodes_in_window: usize,
    pub slope_bounds_met: bool,
}

pub const CERTIFICATE_MIN_NODES: usize = 64;
pub const CERTIFICATE_MAX_GRID: usize = 1 << 17;

fn certify(
    profile: &StarProfile,
    alpha: (f64, f64),
    build: impl Fn(&StarProfile) -> Result<TestFunction>,
) -> Result<Certificate> {
    let mut n = profile.intervals();
    loop {
        let prof = if n == profile.intervals() { profile.clone() } else { profile.resolve_with_grid(n)? };
        match build(&prof) {
            Ok(tf) => {
                let asm = assemble_quadratic_form(&prof, n)?;
                let form = asm.k.bilinear(&tf.values, &tf.values);
                let mass: f64 =
                    tf.values.iter().zip(&asm.mw).map(|(x, m)| m * x * x).sum();
                let (lo, hi) = prof.r[1..]
                    .iter()
                    .zip(&prof.mu[1..])
                    .filter(|(y, _)| **y > tf.r1 && **y < tf.r2)
                    .map(|(y, mu)| mu.exp() / y)
                    .fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
                let ck = (lo * hi).sqrt();
                return Ok(Certificate {
                    kappa: prof.kappa,
                    alpha,
                    window: (tf.r1, tf.r2),
                    form,
                    quotient: form / mass,
                    normalized: form * ck,
                    c_kappa_window: ck,
                    grid_size: n,
                    nodes_in_window: tf.nodes_in_window,
                    slope_bounds_met: tf.slope_bounds_met(),
                });
            }
            Err(Error::Resolution(_)) if n < CERTIFICATE_MAX_GRID => n *= 2,
            Err(e) => return Err(e.at_kappa(profile.kappa)),
        }
    }
}

/// Quadratic form of the operator on the explicit cut-off test function
/// with window [kappa^{a1}, kappa^{a2}] p_c^{-1/2}. The grid is doubled
/// until the window holds at least 64 nodes. A negative value certifies
/// nu* < 0 without the eigensolver.
pub fn instability_certificate(profile: &StarProfile, alpha1: f64, alpha2: f64) -> Result<Certificate> {
    if profile.kappa < 1.0 {
        return Err(Error::Domain(format!(
            "kappa = {} too small for the certificate window",
            profile.kappa
        )));
    }
    certify(profile, (alpha1, alpha2), |p| {
        cutoff_test_function(p, alpha1, alpha2, CERTIFICATE_MIN_NODES)
    })
}

/// Same quadratic form on an arbitrary window [r1, r2].
pub fn window_certificate(profile: &StarProfile, r1: f64, r2: f64) -> Result<Certificate> {
    certify(profile, (f64::NAN, f64::NAN), |p| {
        test_function_on_window(p, r1, r2, CERTIFICATE_MIN_NODES)
    })
}

/// Window [1, 1000] p_c^{-1/2} (capped at R/2): wide enough for the
/// plateau's logarithm to beat the ramp terms at moderate kappa.
pub fn wide_window_certificate(profile: &StarProfile) -> Result<Certificate> {
    let sc = profile.p_c().powf(-0.5);
    window_certificate(profile, sc, (1000.0 * sc).min(0.5 * profile.radius))
}

/// T = ln(theta0 / delta) / sqrt(-nu).
pub fn escape_time(delta: f64, theta0: f64, nu: f64) -> Result<f64> {
    if !(nu < 0.0) {
        return Err(Error::NotUnstable(nu));
    }
    if !(delta > 0.0 && delta < theta0) {
        return Err(Error::Ordering(format!("need 0 < delta < theta0, got {delta}, {theta0}")));
    }
    Ok((theta0 / delta).ln() / (-nu).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> Pencil<f64> {
        let k = SymTridiag { diag: vec![2.0; n], off: vec![-1.0; n - 1] };
        Pencil::new(k, vec![1.0; n]).unwrap()
    }

    #[test]
    fn dirichlet_laplacian_bottom() {
        let n = 50;
        let e = laplacian(n).smallest().unwrap();
        let h = std::f64::consts::PI / (n as f64 + 1.0);
        let exact = 2.0 - 2.0 * h.cos();
        assert!((e.value - exact).abs() < 1e-13);
        assert!(e.residual < 1e-10);
        assert!(e.vector.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn proportional_pencil() {
        let m: Vec<f64> = (0..40).map(|i| 1.0 + i as f64 * 0.1).collect();
        let k = SymTridiag { diag: m.iter().map(|v| 2.0 * v).collect(), off: vec![0.0; 39] };
        let (nu, chi, _) = smallest_of_pencil(&k, &m).unwrap();
        assert!((nu - 2.0).abs() < 1e-14);
        let norm: f64 = chi.iter().zip(&m).map(|(x, w)| w * x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sturm_counts_match_spectrum() {
        let p = laplacian(10);
        let h = std::f64::consts::PI / 11.0;
        for j in 1..=10 {
            let ev = 2.0 - 2.0 * (j as f64 * h).cos();
            assert_eq!(p.count_below(ev + 1e-9).unwrap(), j);
            assert_eq!(p.count_below(ev - 1e-9).unwrap(), j - 1);
        }
    }

    #[test]
    fn breakdown_shift_is_retried() {
        // shift 2 gives a zero first pivot
        let p = laplacian(4);
        assert!(matches!(p.count_below(2.0), Err(Error::Breakdown(_))));
        assert_eq!(p.count_retry(2.0, 4.0).unwrap(), 2);
    }

    #[test]
    fn generic_precisions_agree() {
        let p = laplacian(30);
        let a = p.smallest().unwrap().value;
        let b = Pencil::<f32>::new(p.k.convert(), vec![1.0f32; 30]).unwrap().smallest().unwrap();
        let c = Pencil::<Dd>::new(p.k.convert(), vec![Dd::from(1.0); 30]).unwrap().smallest().unwrap();
        assert!((b.value as f64 - a).abs() < 1e-4);
        assert!((c.value.to_f64() - a).abs() < 1e-15);
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_stability(-0.5, 1e-8).unwrap(), Classification::Unstable);
        assert_eq!(classify_stability(0.5, 1e-8).unwrap(), Classification::Stable);
        assert_eq!(classify_stability(1e-12, 1e-8).unwrap(), Classification::Marginal);
        assert!(classify_stability(1.0, 0.0).is_err());
    }

    #[test]
    fn escape_time_examples() {
        let th = 0.3;
        assert!((escape_time(th / std::f64::consts::E, th, -1.0).unwrap() - 1.0).abs() < 1e-15);
        let t = escape_time(1e-6, 1e-2, -4.0).unwrap();
        assert!((t - 1e4f64.ln() / 2.0).abs() < 1e-14);
        assert!((t - 4.6052).abs() < 1e-4);
        assert!(escape_time(1e-3, 1e-2, 0.0).is_err());
        assert!(escape_time(1e-2, 1e-2, -1.0).is_err());
        assert!(escape_time(th * (1.0 - 1e-12), th, -1.0).unwrap() < 1e-11);
    }
}
