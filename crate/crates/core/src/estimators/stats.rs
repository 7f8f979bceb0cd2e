//! Small-sample statistics used by the campaign drivers.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Sample median; the mean of the two middle values for even counts.
pub fn median(xs: &[f64]) -> f64 {
    let v = sorted(xs);
    let k = v.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

/// Linear-interpolation quantile of an already sorted sample.
pub fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let h = (v.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = libm::ceil(h) as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

impl QuantileSummary {
    pub fn of(xs: &[f64]) -> Self {
        let v = sorted(xs);
        Self {
            q05: quantile_sorted(&v, 0.05),
            q25: quantile_sorted(&v, 0.25),
            q50: quantile_sorted(&v, 0.50),
            q75: quantile_sorted(&v, 0.75),
            q95: quantile_sorted(&v, 0.95),
        }
    }

    pub fn is_ordered(&self) -> bool {
        self.q05 <= self.q25 && self.q25 <= self.q50 && self.q50 <= self.q75 && self.q75 <= self.q95
    }
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTest {
    pub u: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Two-sided Mann-Whitney U test with the tie-corrected normal approximation.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> RankTest {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mut all: Vec<(f64, bool)> = a.iter().map(|&x| (x, true)).chain(b.iter().map(|&x| (x, false))).collect();
    all.sort_by(|p, q| p.0.total_cmp(&q.0));
    let total = all.len();
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j + 1 < total && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        rank_sum_a += all[i..=j].iter().filter(|e| e.1).count() as f64 * avg;
        i = j + 1;
    }
    let u = rank_sum_a - n1 * (n1 + 1.0) / 2.0;
    let nn = n1 + n2;
    let var = n1 * n2 / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    let z = if var > 0.0 { (u - n1 * n2 / 2.0) / libm::sqrt(var) } else { 0.0 };
    RankTest { u, z, p_value: libm::erfc(libm::fabs(z) / core::f64::consts::SQRT_2) }
}
