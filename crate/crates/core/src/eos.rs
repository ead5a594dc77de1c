//! Barotropic equation of state p = cs2 (rho - rho0) and its closed-form
//! potential, inverse, number density and enthalpy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EosSpec {
    /// Sound speed squared, in (0, 1].
    pub cs2: f64,
    /// Density at which the pressure vanishes.
    pub rho0: f64,
}

impl Default for EosSpec {
    fn default() -> Self {
        Self::hard_phase()
    }
}

impl EosSpec {
    pub fn new(cs2: f64, rho0: f64) -> Result<Self> {
        if !(cs2 > 0.0 && cs2 <= 1.0) {
            return Err(Error::Domain(format!("cs2 = {cs2} outside (0, 1]")));
        }
        if !(rho0 > 0.0 && rho0.is_finite()) {
            return Err(Error::Domain(format!("rho0 = {rho0} must be positive")));
        }
        Ok(Self { cs2, rho0 })
    }

    /// cs2 = 1, rho0 = 1.
    pub fn hard_phase() -> Self {
        Self { cs2: 1.0, rho0: 1.0 }
    }

    pub fn is_hard_phase(&self) -> bool {
        self.cs2 == 1.0
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        self.cs2 * (rho - self.rho0)
    }

    /// Inverse of `pressure`.
    pub fn density_from_pressure(&self, p: f64) -> f64 {
        p / self.cs2 + self.rho0
    }

    /// dp/drho.
    pub fn sound_speed2(&self) -> f64 {
        self.cs2
    }

    fn check_density(&self, rho: f64) -> Result<()> {
        if rho >= self.rho0 {
            Ok(())
        } else {
            Err(Error::Domain(format!("density {rho} below rho0 = {}", self.rho0)))
        }
    }

    /// (rho + p) / rho0 evaluated as ((1 + cs2) rho - cs2 rho0) / rho0,
    /// kept >= 1 so that rounding cannot push Q(rho0) below zero.
    fn enthalpy_ratio(&self, rho: f64) -> f64 {
        (((1.0 + self.cs2) * rho - self.cs2 * self.rho0) / self.rho0).max(1.0)
    }

    /// Q(rho) = int_{rho0}^{rho} p'(s) / (s + p(s)) ds.
    pub fn q_potential(&self, rho: f64) -> Result<f64> {
        self.check_density(rho)?;
        Ok(self.cs2 / (1.0 + self.cs2) * self.enthalpy_ratio(rho).ln())
    }

    /// Q^{-1} continued analytically to negative potentials.
    ///
    /// Only for use inside the fluid region (stage values of the
    /// structure ODE that step slightly past the boundary).
    pub fn density_fluid_branch(&self, ybar: f64) -> f64 {
        let e = ((1.0 + self.cs2) / self.cs2 * ybar).exp();
        (self.rho0 * e + self.cs2 * self.rho0) / (1.0 + self.cs2)
    }

    /// Pressure along the analytic fluid branch.
    pub fn pressure_fluid_branch(&self, ybar: f64) -> f64 {
        self.cs2 * (self.density_fluid_branch(ybar) - self.rho0)
    }

    /// g(ybar): Q^{-1}(ybar) for ybar >= 0 and 0 (vacuum) otherwise.
    pub fn density_from_potential(&self, ybar: f64) -> f64 {
        if ybar >= 0.0 {
            self.density_fluid_branch(ybar)
        } else {
            0.0
        }
    }

    /// h(ybar) = cs2 (g(ybar) - rho0) for ybar >= 0 and 0 otherwise.
    pub fn pressure_from_potential(&self, ybar: f64) -> f64 {
        if ybar >= 0.0 {
            self.pressure_fluid_branch(ybar)
        } else {
            0.0
        }
    }

    /// N(rho) = exp(int_{rho0}^{rho} ds / (s + p(s))).
    pub fn number_density(&self, rho: f64) -> Result<f64> {
        self.check_density(rho)?;
        let x = self.enthalpy_ratio(rho);
        if self.cs2 == 1.0 {
            Ok(x.sqrt())
        } else {
            Ok(x.powf(1.0 / (1.0 + self.cs2)))
        }
    }

    /// Psi = (dp/drho) / (c_kappa N(rho)).
    pub fn enthalpy_psi(&self, rho: f64, c_kappa: f64) -> Result<f64> {
        if !(c_kappa > 0.0) {
            return Err(Error::Domain(format!("c_kappa = {c_kappa} must be positive")));
        }
        Ok(self.cs2 / (c_kappa * self.number_density(rho)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp() -> EosSpec {
        EosSpec::hard_phase()
    }

    /// Composite Gauss-Legendre (5 point) on `n` panels.
    fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let x = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        let w = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for k in 0..n {
            let c = a + (k as f64 + 0.5) * h;
            for i in 0..5 {
                s += w[i] * f(c + 0.5 * h * x[i]);
            }
        }
        s * 0.5 * h
    }

    fn q_oracle(e: &EosSpec, rho: f64) -> f64 {
        quad(|s| e.cs2 / (s + e.pressure(s)), e.rho0, rho, 200)
    }

    fn n_oracle(e: &EosSpec, rho: f64) -> f64 {
        quad(|s| 1.0 / (s + e.pressure(s)), e.rho0, rho, 200).exp()
    }

    #[test]
    fn potential_examples() {
        let e = hp();
        assert_eq!(e.q_potential(1.0).unwrap(), 0.0);
        let q5 = e.q_potential(5.0).unwrap();
        assert!((q5 - 0.5 * 9f64.ln()).abs() < 1e-15);
        assert!((q5 - q_oracle(&e, 5.0)).abs() < 1e-13);
        let qe = e.q_potential(std::f64::consts::E).unwrap();
        assert!((qe - 0.744940).abs() < 1e-6);
        assert!((qe - q_oracle(&e, std::f64::consts::E)).abs() < 1e-13);
        assert!(matches!(e.q_potential(0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn inverse_examples() {
        let e = hp();
        assert_eq!(e.density_from_potential(0.0), 1.0);
        assert_eq!(e.density_from_potential(-0.3), 0.0);
        let g1 = e.density_from_potential(1.0);
        assert!((g1 - (1f64.exp().powi(2) + 1.0) / 2.0).abs() < 1e-14);
        assert!((g1 - 4.19453).abs() < 1e-5);
        // bisection inversion of q_potential
        let (mut lo, mut hi) = (1.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if e.q_potential(mid).unwrap() < 1.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((g1 - lo).abs() < 1e-12);
    }

    #[test]
    fn pressure_examples() {
        let e = hp();
        assert_eq!(e.pressure_from_potential(0.0), 0.0);
        assert_eq!(e.pressure_from_potential(-1.0), 0.0);
        let h1 = e.pressure_from_potential(1.0);
        assert!((h1 - (1f64.exp().powi(2) - 1.0) / 2.0).abs() < 1e-14);
        assert!((h1 - 3.19453).abs() < 1e-5);
    }

    #[test]
    fn number_density_examples() {
        let e = hp();
        assert_eq!(e.number_density(1.0).unwrap(), 1.0);
        assert_eq!(e.number_density(5.0).unwrap(), 3.0);
        assert_eq!(e.number_density(2.5).unwrap(), 2.0);
        assert!((n_oracle(&e, 5.0) - 3.0).abs() < 1e-12);
        assert!((n_oracle(&e, 2.5) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn psi_examples() {
        let e = hp();
        assert_eq!(e.enthalpy_psi(1.0, 1.0).unwrap(), 1.0);
        assert!((e.enthalpy_psi(5.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-16);
        assert!((e.enthalpy_psi(5.0, 2.0).unwrap() - 1.0 / 6.0).abs() < 1e-16);
        assert!(e.enthalpy_psi(0.9, 1.0).is_err());
        assert!(e.enthalpy_psi(2.0, 0.0).is_err());
    }

    #[test]
    fn general_model_against_quadrature() {
        for &(cs2, rho0) in &[(0.3, 1.0), (0.5, 2.0), (1.0, 0.7), (0.8, 3.5)] {
            let e = EosSpec::new(cs2, rho0).unwrap();
            for &f in &[1.0, 1.3, 2.0, 7.5] {
                let rho = f * rho0;
                let q = e.q_potential(rho).unwrap();
                assert!((q - q_oracle(&e, rho)).abs() < 1e-12, "{cs2} {rho0} {rho}");
                let n = e.number_density(rho).unwrap();
                assert!((n - n_oracle(&e, rho)).abs() < 1e-12 * n);
                assert!((e.density_from_potential(q) - rho).abs() < 1e-12 * rho, "{cs2} {rho0} {rho} {}", e.density_from_potential(q));
            }
            assert_eq!(e.pressure(rho0), 0.0);
        }
    }

    #[test]
    fn general_forms_reduce_bitwise() {
        let e = EosSpec::new(1.0, 1.0).unwrap();
        for i in 0..200 {
            let y = i as f64 * 0.05;
            assert_eq!(e.density_from_potential(y), ((2.0 * y).exp() + 1.0) / 2.0);
            assert_eq!(
                e.pressure_from_potential(y),
                ((2.0 * y).exp() + 1.0) / 2.0 - 1.0
            );
            let rho = 1.0 + i as f64 * 0.37;
            assert_eq!(e.q_potential(rho).unwrap(), 0.5 * (2.0 * rho - 1.0).ln());
            assert_eq!(e.number_density(rho).unwrap(), (2.0 * rho - 1.0).sqrt());
        }
    }

    #[test]
    fn dn_drho_identity() {
        let e = hp();
        let fd_err = |rho: f64, h: f64| {
            let fd = (e.number_density(rho + h).unwrap() - e.number_density(rho - h).unwrap())
                / (2.0 * h);
            (fd - e.number_density(rho).unwrap() / (rho + e.pressure(rho))).abs()
        };
        for &rho in &[1.5, 3.0, 10.0, 100.0] {
            let ratio = fd_err(rho, 1e-2) / fd_err(rho, 5e-3);
            assert!((ratio - 4.0).abs() < 0.1, "{rho} {ratio}");
            assert!(fd_err(rho, 1e-5) < 1e-10);
        }
    }
}
