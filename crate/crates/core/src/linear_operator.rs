//! Linearized radial-oscillation operator of a hard-phase steady state,
//! discretized as a symmetric tridiagonal quadratic form with a diagonal
//! mass form. The unknowns sit on the profile nodes y_1..y_N; the origin
//! node is dropped because the flux variable e^{lambda-mu} y^3 chi vanishes
//! there.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::steady_state::StarProfile;

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTridiag<T = f64> {
    pub diag: Vec<T>,
    /// off[i] couples unknowns i and i+1.
    pub off: Vec<T>,
}

impl<T: Real> SymTridiag<T> {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        let mut y: Vec<T> = (0..n).map(|i| self.diag[i] * x[i]).collect();
        for i in 0..n.saturating_sub(1) {
            y[i] += self.off[i] * x[i + 1];
            y[i + 1] += self.off[i] * x[i];
        }
        y
    }

    /// x^T A y, summed so that swapping x and y gives the same bits.
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        let n = self.len();
        let mut s = T::zero();
        for i in 0..n {
            s += self.diag[i] * (x[i] * y[i]);
            if i + 1 < n {
                s += self.off[i] * (x[i] * y[i + 1] + x[i + 1] * y[i]);
            }
        }
        s
    }

    pub fn convert<U: Real>(&self) -> SymTridiag<U> {
        SymTridiag {
            diag: self.diag.iter().map(|v| U::from_f64(v.to_f64())).collect(),
            off: self.off.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    /// Dense entry (i, j), for tests and dumps.
    pub fn entry(&self, i: usize, j: usize) -> T {
        if i == j {
            self.diag[i]
        } else if i + 1 == j {
            self.off[i]
        } else if j + 1 == i {
            self.off[j]
        } else {
            T::zero()
        }
    }
}

/// Closed-form metric derivatives and the potential terms A1..A6 at the
/// operator nodes y_1..y_N.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub y: Vec<f64>,
    pub lambda_p: Vec<f64>,
    pub lambda_pp: Vec<f64>,
    pub mu_p: Vec<f64>,
    pub mu_pp: Vec<f64>,
    pub a: [Vec<f64>; 6],
}

impl CoefficientTable {
    pub fn a_sum(&self, i: usize) -> f64 {
        self.a.iter().map(|v| v[i]).sum()
    }
}

/// lambda', lambda'', mu', mu'' from (y, rho, p, m, lambda).
pub fn metric_derivatives(y: f64, rho: f64, p: f64, m: f64, lambda: f64) -> [f64; 4] {
    let e2 = (2.0 * lambda).exp();
    let u = 4.0 * PI * y * rho - m / (y * y);
    let v = 4.0 * PI * y * p + m / (y * y);
    let lp = e2 * u;
    let mp = e2 * v;
    let lpp = 2.0 * e2 * e2 * u * u - 4.0 * PI * e2 * e2 * (m / y + 4.0 * PI * y * y * p) * (rho + p)
        + 2.0 * e2 * m / (y * y * y);
    let mpp = 8.0 * PI * p * e2
        - e2 * (4.0 * PI * y * (p - rho) + 2.0 * m / (y * y)) * (e2 * v + 1.0 / y);
    [lp, lpp, mp, mpp]
}

fn require_hard_phase(profile: &StarProfile) -> Result<()> {
    if profile.eos.cs2 != 1.0 {
        return Err(Error::Domain(format!(
            "the linearized operator is derived for cs2 = 1, got {}",
            profile.eos.cs2
        )));
    }
    Ok(())
}

pub fn coefficient_profiles(profile: &StarProfile) -> Result<CoefficientTable> {
    require_hard_phase(profile)?;
    let n = profile.intervals();
    let mut t = CoefficientTable {
        y: Vec::with_capacity(n),
        lambda_p: Vec::with_capacity(n),
        lambda_pp: Vec::with_capacity(n),
        mu_p: Vec::with_capacity(n),
        mu_pp: Vec::with_capacity(n),
        a: Default::default(),
    };
    for j in 1..=n {
        let (y, rho, p, m, lam) =
            (profile.r[j], profile.rho[j], profile.p[j], profile.mass[j], profile.lambda[j]);
        let [lp, lpp, mp, mpp] = metric_derivatives(y, rho, p, m, lam);
        let e2 = (2.0 * lam).exp();
        let a = [
            y * (lpp - mpp),
            lp - mp,
            (lp + mp) * (mp * y - 3.0) + mpp * y + mp,
            -4.0 * PI * y * p * e2 * (2.0 * y * mp + 1.0),
            -(2.0 * y * mp + 1.0) * e2 * m / (y * y),
            8.0 * PI * y * p * e2,
        ];
        t.y.push(y);
        t.lambda_p.push(lp);
        t.lambda_pp.push(lpp);
        t.mu_p.push(mp);
        t.mu_pp.push(mpp);
        for (col, v) in t.a.iter_mut().zip(a) {
            col.push(v);
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorAssembly {
    pub kappa: f64,
    pub radius: f64,
    /// Nodes y_1..y_N.
    pub grid: Vec<f64>,
    pub k: SymTridiag<f64>,
    pub mw: Vec<f64>,
    /// (3 - R mu'(R), R).
    pub boundary_coeff: (f64, f64),
    pub coeffs: CoefficientTable,
}

impl OperatorAssembly {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn mass_norm(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.mw).map(|(a, m)| m * a * a).sum::<f64>().sqrt()
    }

    pub fn energy(&self, x: &[f64], v: &[f64]) -> f64 {
        let kin: f64 = v.iter().zip(&self.mw).map(|(a, m)| m * a * a).sum();
        0.5 * (kin + self.k.bilinear(x, x))
    }
}

struct Pieces {
    dy: Vec<f64>,
    w_mid: Vec<f64>,
    wq: Vec<f64>,
    c: Vec<f64>,
    e: Vec<f64>,
}

fn pieces(profile: &StarProfile) -> Pieces {
    let n = profile.intervals();
    let r = &profile.r;
    let dy: Vec<f64> = (0..n).map(|j| r[j + 1] - r[j]).collect();
    let w_mid: Vec<f64> = (0..n)
        .map(|j| {
            let ym = 0.5 * (r[j] + r[j + 1]);
            let g = 0.5 * (profile.mu[j] + profile.mu[j + 1])
                - 0.5 * (profile.lambda[j] + profile.lambda[j + 1]);
            g.exp() / (ym * ym)
        })
        .collect();
    let wq: Vec<f64> = (1..=n)
        .map(|j| if j < n { 0.5 * (dy[j - 1] + dy[j]) } else { 0.5 * dy[n - 1] })
        .collect();
    let e: Vec<f64> = (1..=n).map(|j| (profile.lambda[j] - profile.mu[j]).exp()).collect();
    let c: Vec<f64> = (1..=n).map(|j| e[j - 1] * r[j].powi(3)).collect();
    Pieces { dy, w_mid, wq, c, e }
}

fn operator_profile(profile: &StarProfile, n: usize) -> Result<StarProfile> {
    require_hard_phase(profile)?;
    if n < 32 {
        return Err(Error::Resolution(format!("N = {n} < 32")));
    }
    profile.resolve_with_grid(n)
}

/// Quadratic form with flux differences at midpoints, trapezoid potential
/// terms and the boundary energy -R^4 e^{lambda-mu} lambda'(R) chi(R)^2 on the
/// last diagonal entry. `n` is the number of unknowns (profile intervals);
/// the profile is re-solved if its grid differs.
pub fn assemble_quadratic_form(profile: &StarProfile, n: usize) -> Result<OperatorAssembly> {
    let prof = operator_profile(profile, n)?;
    let coeffs = coefficient_profiles(&prof)?;
    let pc = pieces(&prof);
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for j in 0..n {
        // interval between profile nodes j and j+1; unknown index j is node j+1
        let w = pc.w_mid[j] / pc.dy[j];
        diag[j] += w * pc.c[j] * pc.c[j];
        if j >= 1 {
            diag[j - 1] += w * pc.c[j - 1] * pc.c[j - 1];
            off[j - 1] = -w * pc.c[j - 1] * pc.c[j];
        }
    }
    let mut mw = vec![0.0; n];
    for i in 0..n {
        let y = coeffs.y[i];
        diag[i] += pc.wq[i] * coeffs.a_sum(i) * pc.c[i];
        mw[i] = pc.wq[i] * y.powi(4) * pc.e[i].powi(3);
    }
    let big_r = prof.radius;
    diag[n - 1] -= big_r.powi(4) * pc.e[n - 1] * coeffs.lambda_p[n - 1];
    Ok(OperatorAssembly {
        kappa: prof.kappa,
        radius: big_r,
        grid: coeffs.y.clone(),
        k: SymTridiag { diag, off },
        mw,
        boundary_coeff: (3.0 - big_r * coeffs.mu_p[n - 1], big_r),
        coeffs,
    })
}

/// Strong-form stiffness with the Robin condition eliminated by a ghost
/// node. Equal to the quadratic form except in the boundary row, so it is
/// not symmetric.
#[derive(Debug, Clone)]
pub struct DivergenceForm {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub mw: Vec<f64>,
}

impl DivergenceForm {
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut y: Vec<f64> = (0..n).map(|i| self.diag[i] * x[i]).collect();
        for i in 0..n - 1 {
            y[i] += self.upper[i] * x[i + 1];
            y[i + 1] += self.lower[i] * x[i];
        }
        y
    }

    /// Symmetric matrix with the same eigenvalues for the pencil with Mw
    /// (diagonal similarity).
    pub fn symmetrized(&self) -> Result<SymTridiag<f64>> {
        let off = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| {
                let prod = l * u;
                if prod > 0.0 {
                    Ok(u.signum() * prod.sqrt())
                } else if *l == 0.0 && *u == 0.0 {
                    Ok(0.0)
                } else {
                    Err(Error::Degenerate("off-diagonal product not positive".into()))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(SymTridiag { diag: self.diag.clone(), off })
    }
}

pub fn assemble_divergence_form(profile: &StarProfile, n: usize) -> Result<DivergenceForm> {
    let asm = assemble_quadratic_form(profile, n)?;
    let prof = operator_profile(profile, n)?;
    let pc = pieces(&prof);
    let co = &asm.coeffs;
    let last = n - 1;
    let mut diag = asm.k.diag.clone();
    let upper = asm.k.off.clone();
    let mut lower = asm.k.off.clone();

    let big_r = prof.radius;
    let h = pc.dy[n - 1];
    let lam_r = prof.lambda[n];
    let mu_r = prof.mu[n];
    let lam_g = lam_r + co.lambda_p[last] * h + 0.5 * co.lambda_pp[last] * h * h;
    let mu_g = mu_r + co.mu_p[last] * h + 0.5 * co.mu_pp[last] * h * h;
    let c_g = (lam_g - mu_g).exp() * (big_r + h).powi(3);
    let ym = big_r + 0.5 * h;
    let w_plus = (0.5 * (mu_r + mu_g) - 0.5 * (lam_r + lam_g)).exp() / (ym * ym);
    let w_minus = pc.w_mid[n - 1];
    let beta = 2.0 * h * (3.0 - big_r * co.mu_p[last]) / big_r;
    let (c_n, c_m) = (pc.c[last], pc.c[last - 1]);
    let scale = 0.5 * h * c_n;
    diag[last] = scale
        * ((w_plus * c_g * beta + (w_plus + w_minus) * c_n) / (h * h) + co.a_sum(last));
    lower[last - 1] = -scale * (w_plus * c_g + w_minus * c_m) / (h * h);
    Ok(DivergenceForm { lower, diag, upper, mw: asm.mw })
}

pub fn rayleigh_quotient(asm: &OperatorAssembly, chi: &[f64]) -> Result<f64> {
    if chi.len() != asm.len() {
        return Err(Error::Degenerate(format!(
            "vector length {} != {}",
            chi.len(),
            asm.len()
        )));
    }
    let den: f64 = chi.iter().zip(&asm.mw).map(|(x, m)| m * x * x).sum();
    if !(den > 0.0) {
        return Err(Error::Degenerate("zero mass norm".into()));
    }
    Ok(asm.k.bilinear(chi, chi) / den)
}

/// Quintic smoothstep 10t^3 - 15t^4 + 6t^5 on [0, 1].
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

/// Cut-off y^{-1} xi(y) supported in [r1, r2].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestFunction {
    pub values: Vec<f64>,
    pub r1: f64,
    pub r2: f64,
    /// [2 r1, r2 / 2] when non-empty.
    pub plateau: Option<(f64, f64)>,
    /// Ramp ends (a, b, c, d): up on [a, b], down on [c, d].
    pub ramps: (f64, f64, f64, f64),
    pub nodes_in_window: usize,
    /// max |xi'| * r1 on the rising ramp (bound 4).
    pub rise_slope: f64,
    /// max |xi'| * r2 on the falling ramp (bound 4).
    pub fall_slope: f64,
}

impl TestFunction {
    pub fn slope_bounds_met(&self) -> bool {
        self.rise_slope <= 4.0 && self.fall_slope <= 4.0
    }

    pub fn xi(&self, y: f64) -> f64 {
        let (a, b, c, d) = self.ramps;
        if y <= a || y >= d {
            0.0
        } else if y < b {
            smoothstep((y - a) / (b - a))
        } else if y <= c {
            1.0
        } else {
            smoothstep((d - y) / (d - c))
        }
    }
}

/// Window [kappa^{a1}, kappa^{a2}] p_c^{-1/2} in the radius.
pub fn test_window(profile: &StarProfile, alpha1: f64, alpha2: f64) -> (f64, f64) {
    let scale = profile.p_c().powf(-0.5);
    (profile.kappa.powf(alpha1) * scale, profile.kappa.powf(alpha2) * scale)
}

/// Nodal samples on y_1..y_N of y^{-1} xi(y). When 2 r1 > r2 / 2 the
/// plateau is empty and both ramps meet at sqrt(r1 r2).
pub fn cutoff_test_function(
    profile: &StarProfile,
    alpha1: f64,
    alpha2: f64,
    min_nodes: usize,
) -> Result<TestFunction> {
    if !(0.0 < alpha1 && alpha1 < alpha2) {
        return Err(Error::Domain(format!("need 0 < alpha1 < alpha2, got {alpha1}, {alpha2}")));
    }
    let (r1, r2) = test_window(profile, alpha1, alpha2);
    test_function_on_window(profile, r1, r2, min_nodes)
}

pub fn test_function_on_window(
    profile: &StarProfile,
    r1: f64,
    r2: f64,
    min_nodes: usize,
) -> Result<TestFunction> {
    if !(r2 < profile.radius && r1 > 0.0 && r1 < r2) {
        return Err(Error::Domain(format!(
            "window [{r1}, {r2}] not inside (0, R = {})",
            profile.radius
        )));
    }
    let (a, d) = (r1, r2);
    let (b, c, plateau) = if 2.0 * r1 <= 0.5 * r2 {
        (2.0 * r1, 0.5 * r2, Some((2.0 * r1, 0.5 * r2)))
    } else {
        let m = (r1 * r2).sqrt();
        (m, m, None)
    };
    let y = &profile.r[1..];
    let nodes_in_window = y.iter().filter(|&&v| v > r1 && v < r2).count();
    if nodes_in_window < min_nodes {
        return Err(Error::Resolution(format!(
            "{nodes_in_window} nodes inside the window, need {min_nodes}"
        )));
    }
    let mut tf = TestFunction {
        values: Vec::new(),
        r1,
        r2,
        plateau,
        ramps: (a, b, c, d),
        nodes_in_window,
        rise_slope: 1.875 / (b - a) * r1,
        fall_slope: 1.875 / (d - c) * r2,
    };
    tf.values = y.iter().map(|&v| tf.xi(v) / v).collect();
    Ok(tf)
}

/// Checks the integral-elimination identity
/// int_0^y s^2 f ds = -m zeta - 4 pi p y^3 zeta, where s^2 f is built from
/// the linearized density -(n / s^2)(e^{-mu} s^3 zeta)'. `zeta` returns
/// (zeta, zeta'). Composite Simpson in the mapped coordinate; returns the
/// largest discrepancy over even nodes divided by the largest right side.
pub fn integral_elimination_defect(
    profile: &StarProfile,
    zeta: impl Fn(f64) -> (f64, f64),
) -> Result<f64> {
    require_hard_phase(profile)?;
    let n = profile.intervals();
    if !n.is_multiple_of(2) {
        return Err(Error::Resolution("Simpson needs an even number of intervals".into()));
    }
    let integrand: Vec<f64> = (0..=n)
        .map(|j| {
            if j == 0 {
                return 0.0;
            }
            let (y, rho, p, m, lam) =
                (profile.r[j], profile.rho[j], profile.p[j], profile.mass[j], profile.lambda[j]);
            let [lp, _, mp, _] = metric_derivatives(y, rho, p, m, lam);
            let (z, dz) = zeta(y);
            let g = -4.0 * PI * (rho + p) * (-mp * y.powi(3) * z + 3.0 * y * y * z + y.powi(3) * dz)
                + 8.0 * PI * y * y * rho * z
                + (-2.0 * lam).exp() * y * y * lp * dz;
            g * profile.dr_ds(j)
        })
        .collect();
    let h = profile.ds();
    let mut acc = 0.0;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for k in 1..=n / 2 {
        let (j0, j1, j2) = (2 * k - 2, 2 * k - 1, 2 * k);
        acc += h / 3.0 * (integrand[j0] + 4.0 * integrand[j1] + integrand[j2]);
        let y = profile.r[j2];
        let (z, _) = zeta(y);
        let rhs = -profile.mass[j2] * z - 4.0 * PI * profile.p[j2] * y.powi(3) * z;
        worst = worst.max((acc - rhs).abs());
        scale = scale.max(profile.mass[j2] * z.abs() + 4.0 * PI * profile.p[j2] * y.powi(3) * z.abs());
    }
    Ok(worst / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::EosSpec;
    use crate::steady_state::{diff2, solve_steady_state, SteadyConfig};

    fn star(k: f64, n: usize) -> StarProfile {
        solve_steady_state(&EosSpec::hard_phase(), k, &SteadyConfig::default().with_grid(n)).unwrap()
    }

    #[test]
    fn symmetric_and_positive_mass() {
        let p = star(1.0, 256);
        let asm = assemble_quadratic_form(&p, 256).unwrap();
        for i in 0..255 {
            assert_eq!(asm.k.entry(i, i + 1), asm.k.entry(i + 1, i));
        }
        assert!(asm.mw.iter().all(|&m| m > 0.0));
        assert!(assemble_quadratic_form(&p, 16).is_err());
    }

    #[test]
    fn a6_vanishes_with_pressure_and_a5_near_origin() {
        let p = star(0.3, 1024);
        let t = coefficient_profiles(&p).unwrap();
        let n = t.y.len();
        assert_eq!(t.a[5][n - 1], 0.0);
        // A5 ~ -(4 pi / 3) rho_c y near the centre
        let y = t.y[0];
        let lead = -(4.0 * PI / 3.0) * p.rho_c() * y;
        assert!((t.a[4][0] - lead).abs() < 1e-2 * lead.abs());
    }

    #[test]
    fn metric_derivatives_match_differences() {
        let err = |n: usize| {
            let p = star(1.0, n);
            let t = coefficient_profiles(&p).unwrap();
            let dl = diff2(&p.lambda, p.ds());
            let dm = diff2(&p.mu, p.ds());
            let mut e = 0.0f64;
            for j in 1..n {
                let d = p.dr_ds(j);
                e = e.max((dl[j] / d - t.lambda_p[j - 1]).abs());
                e = e.max((dm[j] / d - t.mu_p[j - 1]).abs());
            }
            e
        };
        let (e1, e2) = (err(512), err(1024));
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn second_derivatives_match_differences() {
        let p = star(2.0, 2048);
        let t = coefficient_profiles(&p).unwrap();
        let h = p.ds();
        for j in (100..2000).step_by(97) {
            let i = j - 1;
            let d = |v: &[f64]| (v[i + 1] - v[i - 1]) / (t.y[i + 1] - t.y[i - 1]);
            let scale = t.lambda_pp[i].abs() + t.mu_pp[i].abs();
            assert!((d(&t.lambda_p) - t.lambda_pp[i]).abs() < 1e3 * h * h * scale + 1e-6 * scale);
            assert!((d(&t.mu_p) - t.mu_pp[i]).abs() < 1e3 * h * h * scale + 1e-6 * scale);
        }
    }

    #[test]
    fn rayleigh_is_homogeneous() {
        let p = star(0.5, 128);
        let asm = assemble_quadratic_form(&p, 128).unwrap();
        let x: Vec<f64> = (0..128).map(|i| (i as f64 * 0.1).sin() + 1.0).collect();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert_eq!(rayleigh_quotient(&asm, &x).unwrap(), rayleigh_quotient(&asm, &x2).unwrap());
        assert!(rayleigh_quotient(&asm, &vec![0.0; 128]).is_err());
    }

    #[test]
    fn divergence_form_differs_only_in_last_row() {
        let p = star(1.0, 128);
        let asm = assemble_quadratic_form(&p, 128).unwrap();
        let alt = assemble_divergence_form(&p, 128).unwrap();
        for i in 0..127 {
            assert_eq!(alt.diag[i], asm.k.diag[i]);
            assert_eq!(alt.upper[i], asm.k.off[i]);
        }
        for i in 0..126 {
            assert_eq!(alt.lower[i], asm.k.off[i]);
        }
        assert!(alt.matvec(&vec![0.0; 128]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn smoothstep_slope() {
        let mut m = 0.0f64;
        for i in 0..10000 {
            let t = i as f64 / 10000.0;
            m = m.max((smoothstep(t + 1e-4) - smoothstep(t)) / 1e-4);
        }
        assert!((m - 1.875).abs() < 1e-3);
    }
}
