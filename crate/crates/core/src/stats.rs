//! Small statistics helpers shared by the Monte Carlo estimators and the
//! finite-size diagnostics.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A Monte Carlo estimate with a 95% half-width computed from the spread of
/// independent chain means.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width_95: f64,
    pub n_samples: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            mean: value,
            half_width_95: 0.0,
            n_samples: 0,
        }
    }

    /// Aggregates per-chain `(sum, count)` pairs. The mean pools all samples;
    /// the half-width uses the between-chain standard error.
    pub fn from_chains(chains: &[(f64, u64)]) -> Self {
        let n_samples: u64 = chains.iter().map(|c| c.1).sum();
        if n_samples == 0 {
            return Estimate {
                mean: f64::NAN,
                half_width_95: f64::NAN,
                n_samples: 0,
            };
        }
        let mean = chains.iter().map(|c| c.0).sum::<f64>() / n_samples as f64;
        let means: Vec<f64> = chains
            .iter()
            .filter(|c| c.1 > 0)
            .map(|c| c.0 / c.1 as f64)
            .collect();
        let half_width_95 = if means.len() < 2 {
            f64::INFINITY
        } else {
            let m = means.iter().sum::<f64>() / means.len() as f64;
            let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
            Z95 * (var / means.len() as f64).sqrt()
        };
        Estimate {
            mean,
            half_width_95,
            n_samples,
        }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width_95
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width_95
    }
}

/// Ordinary least-squares fit `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_std_err: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_std_err = if n > 2 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
        slope_std_err,
    })
}

/// Total-variation distance between two probability vectors.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-14);
        assert!((fit.intercept - 3.0).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn chain_aggregation_pools_samples() {
        let e = Estimate::from_chains(&[(3.0, 10), (5.0, 10)]);
        assert!((e.mean - 0.4).abs() < 1e-15);
        assert_eq!(e.n_samples, 20);
        // chain means 0.3 and 0.5: sd = 0.1414, se = 0.1
        assert!((e.half_width_95 - Z95 * 0.1).abs() < 1e-12);
    }
}
