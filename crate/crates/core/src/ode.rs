//! Small explicit integrators on fixed-size states.

use crate::error::{Error, Result};

pub type State<const N: usize> = [f64; N];

fn axpy<const N: usize>(y: &State<N>, a: f64, k: &State<N>) -> State<N> {
    let mut out = *y;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

/// One classical Runge-Kutta 4 step.
pub fn rk4_step<const N: usize, F>(f: &F, t: f64, y: &State<N>, h: f64) -> Result<State<N>>
where
    F: Fn(f64, &State<N>) -> Result<State<N>>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1))?;
    let k3 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k2))?;
    let k4 = f(t + h, &axpy(y, h, &k3))?;
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// `n` equal RK4 steps from `t0` to `t1`.
pub fn rk4_span<const N: usize, F>(f: &F, t0: f64, t1: f64, y: &State<N>, n: usize) -> Result<State<N>>
where
    F: Fn(f64, &State<N>) -> Result<State<N>>,
{
    let h = (t1 - t0) / n as f64;
    let mut y = *y;
    for k in 0..n {
        let t = t0 + k as f64 * h;
        y = rk4_step(f, t, &y, h)?;
    }
    Ok(y)
}

/// RK4 from `t0 > 0` to `t1` with geometrically growing steps, `per_octave`
/// steps per doubling of t. Meant for leaving a regular singular point.
pub fn rk4_geometric<const N: usize, F>(
    f: &F,
    t0: f64,
    t1: f64,
    y: &State<N>,
    per_octave: usize,
) -> Result<State<N>>
where
    F: Fn(f64, &State<N>) -> Result<State<N>>,
{
    if !(t0 > 0.0 && t1 > t0) {
        return Err(Error::Domain(format!("geometric span needs 0 < t0 < t1, got {t0}, {t1}")));
    }
    let steps = ((t1 / t0).log2().ceil() as usize).max(1) * per_octave.max(1);
    let q = (t1 / t0).powf(1.0 / steps as f64);
    let mut t = t0;
    let mut y = *y;
    for k in 0..steps {
        let next = if k + 1 == steps { t1 } else { t * q };
        y = rk4_step(f, t, &y, next - t)?;
        t = next;
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            h0: 1e-3,
            h_min: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Dormand-Prince 5(4) with step-size control; returns every accepted
/// `(t, y)` including the initial point. Integration stops exactly at `t1`.
pub fn dopri45<const N: usize, F>(
    f: &F,
    t0: f64,
    t1: f64,
    y0: &State<N>,
    cfg: &AdaptiveConfig,
) -> Result<Vec<(f64, State<N>)>>
where
    F: Fn(f64, &State<N>) -> Result<State<N>>,
{
    let mut out = vec![(t0, *y0)];
    let mut t = t0;
    let mut y = *y0;
    let mut h = cfg.h0.min(t1 - t0);
    let mut k1 = f(t, &y)?;
    let mut steps = 0;
    while t < t1 {
        if steps >= cfg.max_steps {
            return Err(Error::Resolution(format!("dopri45 exceeded {} steps", cfg.max_steps)));
        }
        steps += 1;
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let mut yt = y;
        for i in 0..N {
            yt[i] = y[i] + h * A21 * k1[i];
        }
        let k2 = f(t + h / 5.0, &yt)?;
        for i in 0..N {
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        let k3 = f(t + 3.0 * h / 10.0, &yt)?;
        for i in 0..N {
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        let k4 = f(t + 4.0 * h / 5.0, &yt)?;
        for i in 0..N {
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        let k5 = f(t + 8.0 * h / 9.0, &yt)?;
        for i in 0..N {
            yt[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let k6 = f(t + h, &yt)?;
        let mut ynew = y;
        for i in 0..N {
            ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        let k7 = f(t + h, &ynew)?;
        let mut err = 0.0f64;
        for i in 0..N {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = cfg.atol + cfg.rtol * y[i].abs().max(ynew[i].abs());
            err = err.max((e / sc).abs());
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y = ynew;
            k1 = k7;
            out.push((t, y));
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h < cfg.h_min && t < t1 {
            return Err(Error::Singularity(format!("step size underflow at t = {t}")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn osc(_t: f64, y: &State<2>) -> Result<State<2>> {
        Ok([y[1], -y[0]])
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |n: usize| {
            let y = rk4_span(&osc, 0.0, 1.0, &[1.0, 0.0], n).unwrap();
            (y[0] - 1f64.cos()).abs()
        };
        let r = err(20) / err(40);
        assert!((r - 16.0).abs() < 1.0, "{r}");
    }

    #[test]
    fn dopri_hits_tolerance_and_endpoint() {
        let cfg = AdaptiveConfig::default();
        let sol = dopri45(&osc, 0.0, 10.0, &[1.0, 0.0], &cfg).unwrap();
        let (t, y) = *sol.last().unwrap();
        assert_eq!(t, 10.0);
        assert!((y[0] - 10f64.cos()).abs() < 1e-10);
        assert!(sol.windows(2).all(|w| w[1].0 > w[0].0));
    }
}
