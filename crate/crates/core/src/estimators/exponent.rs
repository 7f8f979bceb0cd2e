//! Distance exponent, central charge and the critical-point bracket.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::stats::{median, ols, variance};
use crate::error::{Error, Result};
use crate::rng;

/// Matter central charge `25 - 6 Q^2`.
pub fn central_charge(q: f64) -> f64 {
    25.0 - 6.0 * q * q
}

/// The `gamma in (0, 2]` with `2/gamma + gamma/2 = Q`; exists iff `Q >= 2`.
pub fn gamma_from_q(q: f64) -> Option<f64> {
    if !(q >= 2.0) {
        return None;
    }
    let disc = (q * q - 4.0).max(0.0);
    // Smaller root of gamma^2 - 2 Q gamma + 4 = 0, written to avoid cancellation.
    Some(4.0 / (q + libm::sqrt(disc)))
}

/// `Q = (1 - slope) / xi` from the log-log slope of the crossing medians.
pub fn q_from_slope(slope: f64, xi: f64) -> f64 {
    (1.0 - slope) / xi
}

/// Crossing observables per replica: `rows[replica][k]` belongs to `eps_grid[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaTable {
    pub eps_grid: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl ReplicaTable {
    pub fn medians(&self) -> Vec<f64> {
        (0..self.eps_grid.len()).map(|k| median(&self.rows.iter().map(|r| r[k]).collect::<Vec<_>>())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub xi: f64,
    pub eps_grid: Vec<f64>,
    pub medians: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    #[serde(rename = "Q_hat")]
    pub q_hat: f64,
    #[serde(rename = "c_M_hat")]
    pub c_m_hat: f64,
    pub gamma_hat: Option<f64>,
    pub stderr: f64,
    pub replicas: usize,
    pub seed: u64,
}

/// Checks the epsilon grid: strictly decreasing, at least four points,
/// spanning at least a factor of 8.
pub fn validate_eps_grid(eps: &[f64]) -> Result<()> {
    if eps.len() < 4 {
        return Err(Error::InvalidParameter("eps grid needs at least four values"));
    }
    if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) || eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("eps grid must be positive and strictly decreasing"));
    }
    if eps[0] / eps[eps.len() - 1] < 8.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter("eps grid must span at least a factor of 8"));
    }
    Ok(())
}

fn slope_of(eps: &[f64], medians: &[f64]) -> Result<(f64, f64)> {
    if let Some(&m) = medians.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(Error::NonPositiveMedian(m));
    }
    let lx: Vec<f64> = eps.iter().map(|e| libm::log(*e)).collect();
    let ly: Vec<f64> = medians.iter().map(|m| libm::log(*m)).collect();
    Ok(ols(&lx, &ly))
}

/// Least-squares fit of `log median` on `log eps`, with a bootstrap over
/// replica rows for the standard error of `Q`.
pub fn fit_exponent(xi: f64, table: &ReplicaTable, resamples: usize, seed: u64) -> Result<ExponentFit> {
    if !(xi > 0.0) {
        return Err(Error::NonPositiveXi(xi));
    }
    validate_eps_grid(&table.eps_grid)?;
    let r = table.rows.len();
    if r == 0 || table.rows.iter().any(|row| row.len() != table.eps_grid.len()) {
        return Err(Error::InvalidParameter("replica table shape does not match eps grid"));
    }
    let medians = table.medians();
    let (slope, intercept) = slope_of(&table.eps_grid, &medians)?;
    let q_hat = q_from_slope(slope, xi);
    let mut rng = rng::stream(seed, 0, rng::STREAM_BOOTSTRAP);
    let mut qs = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let rows: Vec<Vec<f64>> = (0..r).map(|_| table.rows[rng.random_range(0..r)].clone()).collect();
        let boot = ReplicaTable { eps_grid: table.eps_grid.clone(), rows };
        if let Ok((s, _)) = slope_of(&table.eps_grid, &boot.medians()) {
            qs.push(q_from_slope(s, xi));
        }
    }
    let stderr = if qs.len() >= 2 { libm::sqrt(variance(&qs)) } else { f64::NAN };
    Ok(ExponentFit {
        xi,
        eps_grid: table.eps_grid.clone(),
        medians,
        slope,
        intercept,
        q_hat,
        c_m_hat: central_charge(q_hat),
        gamma_hat: gamma_from_q(q_hat),
        stderr,
        replicas: r,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiCritBracket {
    pub lower: f64,
    pub upper: f64,
    /// Linear interpolation of the level crossing inside the bracket.
    pub root: f64,
}

/// A `xi` grid for critical-point bracketing: at least two points, strictly
/// increasing.
pub fn check_xi_grid(xis: &[f64]) -> Result<()> {
    if xis.len() < 2 || xis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("xi grid must be strictly increasing with at least two points"));
    }
    Ok(())
}

/// First adjacent pair of a strictly increasing `xi` grid where `Q - 2`
/// changes sign (or touches zero). `None` means no crossing.
pub fn bracket_q_crossing(xis: &[f64], qs: &[f64]) -> Result<Option<XiCritBracket>> {
    if xis.len() != qs.len() || xis.len() < 2 {
        return Err(Error::InvalidParameter("need matching xi and Q lists with at least two points"));
    }
    check_xi_grid(xis)?;
    for k in 0..xis.len() - 1 {
        let (a, b) = (qs[k] - 2.0, qs[k + 1] - 2.0);
        if a == 0.0 {
            return Ok(Some(XiCritBracket { lower: xis[k], upper: xis[k + 1], root: xis[k] }));
        }
        if a * b <= 0.0 {
            let t = a / (a - b);
            let root = xis[k] + t * (xis[k + 1] - xis[k]);
            return Ok(Some(XiCritBracket { lower: xis[k], upper: xis[k + 1], root }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn dyadic() -> Vec<f64> {
        vec![0.125, 0.0625, 0.03125, 0.015625]
    }

    #[test]
    fn central_charge_values() {
        assert_eq!(central_charge(2.0), 1.0);
        assert!(central_charge(5.0 / libm::sqrt(6.0)).abs() < 1e-12);
        assert!((central_charge(1e-9) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_recovery() {
        assert_eq!(gamma_from_q(2.0), Some(2.0));
        assert_eq!(gamma_from_q(1.99), None);
        for &q in &[2.0, 2.0412, 2.5, 4.0, 10.0] {
            let g = gamma_from_q(q).unwrap();
            assert!(g > 0.0 && g <= 2.0);
            assert!((2.0 / g + g / 2.0 - q).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_power_law_fit() {
        let eps = dyadic();
        for &c in &[1.0, 7.5] {
            let row: Vec<f64> = eps.iter().map(|e| c * libm::pow(*e, 0.3)).collect();
            let table = ReplicaTable { eps_grid: eps.clone(), rows: vec![row; 11] };
            let fit = fit_exponent(0.4, &table, 200, 1).unwrap();
            assert!((fit.slope - 0.3).abs() < 1e-12);
            assert!((fit.q_hat - 0.7 / 0.4).abs() < 1e-12);
            assert_eq!(fit.c_m_hat, central_charge(fit.q_hat));
            assert_eq!(fit.gamma_hat, None);
            assert!(fit.stderr.abs() < 1e-12);
        }
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let eps = dyadic();
        let table = ReplicaTable { eps_grid: eps.clone(), rows: vec![vec![1.0, 1.0, 0.0, 1.0]; 3] };
        assert_eq!(fit_exponent(0.4, &table, 10, 1).unwrap_err(), Error::NonPositiveMedian(0.0));
        let short = ReplicaTable { eps_grid: vec![0.1, 0.05, 0.025], rows: vec![vec![1.0; 3]] };
        assert!(fit_exponent(0.4, &short, 10, 1).is_err());
        assert!(validate_eps_grid(&[0.1, 0.05, 0.04, 0.03]).is_err());
    }

    #[test]
    fn planted_bracket() {
        let xis = [0.25, 0.35, 0.45, 0.55];
        let qs: Vec<f64> = xis.iter().map(|x| 0.83 / x).collect();
        let b = bracket_q_crossing(&xis, &qs).unwrap().unwrap();
        assert!(b.lower <= 0.415 && 0.415 <= b.upper);
        assert_eq!((b.lower, b.upper), (0.35, 0.45));
        let above = [0.5, 0.6, 0.7];
        let qa: Vec<f64> = above.iter().map(|x| 0.83 / x).collect();
        assert_eq!(bracket_q_crossing(&above, &qa).unwrap(), None);
        assert!(bracket_q_crossing(&[0.5, 0.4], &[2.5, 1.5]).is_err());
    }
}
