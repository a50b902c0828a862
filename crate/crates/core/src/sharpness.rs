//! Finite-size diagnostics for the sharpness argument: exact and Monte Carlo
//! connection-probability grids, the derivative formula, the differential
//! inequality, the `β₁` machinery, decay fits and planar critical points.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{build_box, FiniteGraph, LatticeFamily, LatticeSpec};
use crate::mcmc::{estimate_theta, percolation_radius_profile, BoxConvention, ChainSettings};
use crate::measure::{
    enumeration_cap, BoundaryCondition, Config, ExactLaw, Measure, RandomCluster,
};
use crate::stats::{linear_fit, Estimate, LinearFit};
use crate::{Error, Result};

/// The dual parameter `p*` with `p p* / ((1-p)(1-p*)) = q`.
pub fn dual_parameter(p: f64, q: f64) -> f64 {
    q * (1.0 - p) / (p + q * (1.0 - p))
}

/// `p = 1 - exp(-βJ)`.
pub fn p_of_beta(beta: f64, coupling: f64) -> f64 {
    -(-beta * coupling).exp_m1()
}

/// Inverse of [`p_of_beta`].
pub fn beta_of_p(p: f64, coupling: f64) -> f64 {
    -(-p).ln_1p() / coupling
}

// ---------------------------------------------------------------------------
// Critical points

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointResult {
    pub lattice: LatticeFamily,
    pub q: f64,
    pub y_c: f64,
    pub p_c: f64,
    /// `β_c` for unit coupling.
    pub beta_c: f64,
    pub residual: f64,
}

/// The critical polynomial of `family` and its derivative at `y`.
pub fn critical_polynomial(family: LatticeFamily, q: f64, y: f64) -> (f64, f64) {
    match family {
        LatticeFamily::Square => (y * y - q, 2.0 * y),
        LatticeFamily::Triangular => (y * y * y + 3.0 * y * y - q, 3.0 * y * y + 6.0 * y),
        LatticeFamily::Hexagonal => (y * y * y - 3.0 * q * y - q * q, 3.0 * y * y - 3.0 * q),
    }
}

/// The planar dual lattice.
pub fn dual_family(family: LatticeFamily) -> LatticeFamily {
    match family {
        LatticeFamily::Square => LatticeFamily::Square,
        LatticeFamily::Triangular => LatticeFamily::Hexagonal,
        LatticeFamily::Hexagonal => LatticeFamily::Triangular,
    }
}

/// Positive root of the critical polynomial by bisection, polished with
/// Newton steps.
pub fn pc_solve(family: LatticeFamily, q: f64) -> Result<CriticalPointResult> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "critical points need q ≥ 1, got {q}"
        )));
    }
    let f = |y: f64| critical_polynomial(family, q, y).0;
    let mut hi = q.max(4.0);
    while f(hi) <= 0.0 {
        hi *= 2.0;
    }
    // Uniqueness of the positive root, checked rather than assumed.
    let probes = 4096;
    let mut changes = 0;
    let mut prev = f(hi / probes as f64);
    for i in 2..=probes {
        let cur = f(hi * i as f64 / probes as f64);
        if (prev < 0.0) != (cur < 0.0) {
            changes += 1;
        }
        prev = cur;
    }
    if changes != 1 {
        return Err(Error::InvalidParameter(format!(
            "{changes} sign changes for the {family:?} polynomial at q = {q}"
        )));
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-10 * hi {
            break;
        }
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..8 {
        let (v, d) = critical_polynomial(family, q, y);
        if d == 0.0 {
            break;
        }
        let next = y - v / d;
        if !(next > 0.0) || (next - y).abs() <= f64::EPSILON * y {
            if next > 0.0 {
                y = next;
            }
            break;
        }
        y = next;
    }
    let p_c = y / (1.0 + y);
    Ok(CriticalPointResult {
        lattice: family,
        q,
        y_c: y,
        p_c,
        beta_c: y.ln_1p(),
        residual: f(y).abs(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityRelationReport {
    pub family: LatticeFamily,
    pub q: f64,
    pub p: f64,
    pub p_star: f64,
    /// `|p p*/((1-p)(1-p*)) - q|`.
    pub relation_residual: f64,
    /// `|(p*)* - p|`.
    pub involution_error: f64,
    pub p_c: f64,
    pub p_c_dual: f64,
    /// `|y_c(G) y_c(G*) - q|` for the solved critical points.
    pub critical_pair_residual: f64,
}

pub fn duality_relation_check(
    family: LatticeFamily,
    q: f64,
    p: f64,
) -> Result<DualityRelationReport> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} outside (0,1)")));
    }
    let p_star = dual_parameter(p, q);
    let a = pc_solve(family, q)?;
    let b = pc_solve(dual_family(family), q)?;
    Ok(DualityRelationReport {
        family,
        q,
        p,
        p_star,
        relation_residual: (p * p_star / ((1.0 - p) * (1.0 - p_star)) - q).abs(),
        involution_error: (dual_parameter(p_star, q) - p).abs(),
        p_c: a.p_c,
        p_c_dual: b.p_c,
        critical_pair_residual: (a.y_c * b.y_c - q).abs(),
    })
}

// ---------------------------------------------------------------------------
// Exact connection probabilities

/// `θ_n = φ^w_G[0 ↔ ∂Λ_n]` by enumeration on a fixed small graph. The event
/// indicator is tabulated once and reused across parameters.
#[derive(Clone, Debug)]
pub struct ExactTheta {
    graph: Arc<FiniteGraph>,
    n: usize,
    indicator: Vec<bool>,
}

impl ExactTheta {
    /// Connection from the origin of `graph` to its sphere of radius `n`.
    pub fn new(graph: Arc<FiniteGraph>, n: usize) -> Result<Self> {
        let e = graph.n_edges();
        if e > enumeration_cap() {
            return Err(Error::ExactUnavailable {
                size: e,
                cap: enumeration_cap(),
            });
        }
        let dist = graph.box_distances(graph.origin());
        let origin = graph.origin();
        let indicator = (0..1u64 << e)
            .into_par_iter()
            .map(|mask| {
                let omega = Config::from_mask(mask, e);
                crate::mcmc::reaches(&graph, &omega.bits, origin, |x| dist[x] >= Some(n))
            })
            .collect();
        Ok(ExactTheta {
            graph,
            n,
            indicator,
        })
    }

    /// The doubled-box convention: `Λ_{2n}` with the wired measure.
    pub fn doubled_box(family: LatticeFamily, n: usize) -> Result<Self> {
        let g = build_box(&LatticeSpec::new(family, (2 * n).max(1)))?;
        Self::new(Arc::new(g), n)
    }

    pub fn graph(&self) -> &Arc<FiniteGraph> {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn law(&self, q: f64, beta: f64) -> Result<ExactLaw> {
        let m: Measure =
            RandomCluster::new(self.graph.clone(), q, beta, BoundaryCondition::Wired)?.into();
        m.exact_law(enumeration_cap())
    }

    pub fn value_under(&self, law: &ExactLaw) -> f64 {
        if self.n == 0 {
            return 1.0;
        }
        law.expectation(|mask| self.indicator[mask as usize] as u8 as f64)
    }

    pub fn value(&self, q: f64, beta: f64) -> Result<f64> {
        Ok(self.value_under(&self.law(q, beta)?))
    }

    /// `Cov(1_{0↔∂Λ_n}, ω_e)` for every edge.
    pub fn covariances(&self, law: &ExactLaw) -> Vec<f64> {
        let theta = self.value_under(law);
        (0..self.graph.n_edges())
            .map(|e| {
                let joint = law.expectation(|mask| {
                    (self.indicator[mask as usize] && mask >> e & 1 == 1) as u8 as f64
                });
                joint - theta * law.marginal(e)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub n: usize,
    pub n_edges: usize,
    pub q: f64,
    pub beta: f64,
    pub h: f64,
    pub theta: f64,
    /// `(θ(β+h) - θ(β-h)) / 2h`.
    pub finite_difference: f64,
    /// The same with step `h/2`.
    pub finite_difference_half: f64,
    /// `Σ_e (J_e/p_e) Cov(1_A, ω_e)`, the derivative of `θ_n`.
    pub formula: f64,
    /// `Σ_e (J_e/(e^{βJ_e}-1)) Cov(1_A, ω_e)`, which bounds the derivative from below.
    pub formula_lower_bound: f64,
    pub error: f64,
    pub error_half: f64,
    /// `error / error_half`; second-order convergence gives about 4.
    pub halving_ratio: f64,
    pub second_order: bool,
}

/// Compares a central difference of `θ_n(β)` with the covariance formula.
pub fn check_derivative_formula(
    theta: &ExactTheta,
    q: f64,
    beta: f64,
    h: f64,
) -> Result<DerivativeReport> {
    if !(h > 0.0) || beta - h < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "step h = {h} must satisfy 0 < h ≤ β"
        )));
    }
    let g = theta.graph();
    let law = theta.law(q, beta)?;
    let cov = theta.covariances(&law);
    let mut formula = 0.0;
    let mut lower = 0.0;
    for (e, c) in cov.iter().enumerate() {
        let j = g.coupling(e);
        formula += j / p_of_beta(beta, j) * c;
        lower += j / (beta * j).exp_m1() * c;
    }
    let fd = |step: f64| -> Result<f64> {
        Ok((theta.value(q, beta + step)? - theta.value(q, beta - step)?) / (2.0 * step))
    };
    let finite_difference = fd(h)?;
    let finite_difference_half = fd(h / 2.0)?;
    let error = (finite_difference - formula).abs();
    let error_half = (finite_difference_half - formula).abs();
    let halving_ratio = error / error_half;
    Ok(DerivativeReport {
        n: theta.n(),
        n_edges: g.n_edges(),
        q,
        beta,
        h,
        theta: theta.value_under(&law),
        finite_difference,
        finite_difference_half,
        formula,
        formula_lower_bound: lower,
        error,
        error_half,
        halving_ratio,
        second_order: (3.0..=5.0).contains(&halving_ratio),
    })
}

// ---------------------------------------------------------------------------
// Grids

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSource {
    Exact,
    MonteCarlo,
}

impl GridSource {
    pub fn label(self) -> &'static str {
        match self {
            GridSource::Exact => "exact",
            GridSource::MonteCarlo => "monte-carlo",
        }
    }
}

/// `θ_n(β)` on a grid of inverse temperatures and box sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    pub q: f64,
    pub coupling: f64,
    pub betas: Vec<f64>,
    pub sizes: Vec<usize>,
    /// `values[i][j]` is `θ_{sizes[j]}(betas[i])`.
    pub values: Vec<Vec<Estimate>>,
    pub source: GridSource,
}

impl ThetaGrid {
    pub fn new(
        q: f64,
        coupling: f64,
        betas: Vec<f64>,
        sizes: Vec<usize>,
        values: Vec<Vec<Estimate>>,
        source: GridSource,
    ) -> Result<Self> {
        if betas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter(
                "β grid must be strictly increasing".into(),
            ));
        }
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "sizes must be strictly increasing".into(),
            ));
        }
        if values.len() != betas.len() || values.iter().any(|row| row.len() != sizes.len()) {
            return Err(Error::InvalidParameter(
                "grid values do not match its axes".into(),
            ));
        }
        if values
            .iter()
            .flatten()
            .any(|v| !(-1e-12..=1.0 + 1e-12).contains(&v.mean))
        {
            return Err(Error::InvalidParameter("θ values must lie in [0,1]".into()));
        }
        Ok(ThetaGrid {
            q,
            coupling,
            betas,
            sizes,
            values,
            source,
        })
    }

    pub fn size_index(&self, n: usize) -> Option<usize> {
        self.sizes.iter().position(|&s| s == n)
    }

    pub fn theta(&self, i: usize, n: usize) -> Option<Estimate> {
        if n == 0 {
            return Some(Estimate::exact(1.0));
        }
        self.size_index(n).map(|j| self.values[i][j])
    }

    /// `S_n = Σ_{k<n} θ_k` at `betas[i]`, when every size below `n` is present.
    pub fn s_n(&self, i: usize, n: usize) -> Option<f64> {
        (0..n).map(|k| self.theta(i, k).map(|t| t.mean)).sum()
    }

    /// Pairs `(β, n)` where an exact grid increases in `n` by more than 1e-12.
    pub fn monotonicity_in_n_violations(&self) -> Vec<(f64, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.values.iter().enumerate() {
            for j in 1..row.len() {
                if row[j].mean > row[j - 1].mean + 1e-12 {
                    out.push((self.betas[i], self.sizes[j]));
                }
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["beta", "n", "theta", "half_width", "source"])?;
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out.write_record([
                    self.betas[i].to_string(),
                    self.sizes[j].to_string(),
                    v.mean.to_string(),
                    v.half_width_95.to_string(),
                    self.source.label().to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// An evenly spaced grid `start, start+step, …, ≤ end`.
pub fn beta_range(start: f64, end: f64, step: f64) -> Vec<f64> {
    let count = ((end - start) / step + 1e-9).floor() as usize;
    (0..=count).map(|i| start + i as f64 * step).collect()
}

/// Exact `θ_n(β)` on doubled boxes, unit coupling.
pub fn exact_theta_grid(
    family: LatticeFamily,
    sizes: &[usize],
    q: f64,
    betas: &[f64],
) -> Result<ThetaGrid> {
    let events: Vec<ExactTheta> = sizes
        .iter()
        .map(|&n| ExactTheta::doubled_box(family, n))
        .collect::<Result<_>>()?;
    let values = betas
        .iter()
        .map(|&b| {
            events
                .iter()
                .map(|ev| ev.value(q, b).map(Estimate::exact))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    ThetaGrid::new(
        q,
        1.0,
        betas.to_vec(),
        sizes.to_vec(),
        values,
        GridSource::Exact,
    )
}

/// Monte Carlo `θ_n(β)` on doubled boxes, unit coupling. For `q = 1` every
/// size `0..=max(sizes)` is filled from one batch of cluster explorations per
/// `β`; otherwise each requested cell runs its own heat-bath chains.
pub fn monte_carlo_theta_grid(
    family: LatticeFamily,
    sizes: &[usize],
    q: f64,
    betas: &[f64],
    settings: &ChainSettings,
) -> Result<ThetaGrid> {
    let n_max = sizes.iter().copied().max().unwrap_or(0);
    if q == 1.0 {
        let rows = betas
            .iter()
            .map(|&b| percolation_radius_profile(family, n_max, p_of_beta(b, 1.0), settings))
            .collect::<Result<Vec<_>>>()?;
        return ThetaGrid::new(
            q,
            1.0,
            betas.to_vec(),
            (0..=n_max).collect(),
            rows,
            GridSource::MonteCarlo,
        );
    }
    let cells: Vec<(usize, usize)> = (0..betas.len())
        .flat_map(|i| (0..sizes.len()).map(move |j| (i, j)))
        .collect();
    let estimates = cells
        .par_iter()
        .map(|&(i, j)| {
            estimate_theta(
                family,
                sizes[j],
                q,
                p_of_beta(betas[i], 1.0),
                BoxConvention::Doubled,
                settings,
            )
            .map(|t| t.estimate)
        })
        .collect::<Result<Vec<_>>>()?;
    let values = estimates.chunks(sizes.len()).map(|c| c.to_vec()).collect();
    ThetaGrid::new(
        q,
        1.0,
        betas.to_vec(),
        sizes.to_vec(),
        values,
        GridSource::MonteCarlo,
    )
}

// ---------------------------------------------------------------------------
// Differential inequality

/// `c(β₀) = (1-θ_1(β₀))/8 · min_e J_e/(e^{β₀J_e}-1)`.
pub fn c_constant(theta1_at_beta0: f64, beta0: f64, couplings: &[f64]) -> f64 {
    let m = couplings
        .iter()
        .map(|&j| j / (beta0 * j).exp_m1())
        .fold(f64::INFINITY, f64::min);
    (1.0 - theta1_at_beta0) / 8.0 * m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferentialRow {
    pub beta: f64,
    pub n: usize,
    /// Central difference of `θ_n`.
    pub derivative: f64,
    /// `c n θ_n / S_n`.
    pub rhs: f64,
    /// `derivative - rhs`, widened by the confidence half-widths for Monte Carlo grids.
    pub margin: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferentialReport {
    pub beta0: f64,
    pub theta1_at_beta0: Option<f64>,
    pub c: f64,
    pub rows: Vec<DifferentialRow>,
    pub violations: usize,
    pub min_margin: f64,
}

/// Checks `θ_n' ≥ c n θ_n / S_n` at the interior grid points. With `c = None`
/// the constant is `c(β₀)` for `β₀` the largest grid point.
pub fn check_differential_inequality(
    grid: &ThetaGrid,
    c: Option<f64>,
) -> Result<DifferentialReport> {
    if grid.betas.len() < 3 {
        return Err(Error::InvalidParameter(
            "the β grid needs at least three points".into(),
        ));
    }
    let last = grid.betas.len() - 1;
    let beta0 = grid.betas[last];
    let theta1 = grid.theta(last, 1).map(|t| t.mean);
    let c = match c {
        Some(c) => c,
        None => {
            let t1 = theta1.ok_or_else(|| {
                Error::InvalidParameter("computing c(β₀) needs θ_1 in the grid".into())
            })?;
            c_constant(t1, beta0, &[grid.coupling])
        }
    };
    let mc = grid.source == GridSource::MonteCarlo;
    let mut rows = Vec::new();
    for i in 1..last {
        let span = grid.betas[i + 1] - grid.betas[i - 1];
        for &n in grid.sizes.iter().filter(|&&n| n >= 1) {
            let Some(s) = grid.s_n(i, n) else { continue };
            let (hi, lo, mid) = (
                grid.theta(i + 1, n).unwrap(),
                grid.theta(i - 1, n).unwrap(),
                grid.theta(i, n).unwrap(),
            );
            let derivative = (hi.mean - lo.mean) / span;
            let rhs = c * n as f64 * mid.mean / s;
            let slack = if mc {
                (hi.half_width_95 + lo.half_width_95) / span + c * n as f64 * mid.half_width_95 / s
            } else {
                1e-12
            };
            let margin = derivative - rhs + slack;
            rows.push(DifferentialRow {
                beta: grid.betas[i],
                n,
                derivative,
                rhs,
                margin,
                violated: margin < 0.0,
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidParameter(
            "no size in the grid has all smaller sizes present".into(),
        ));
    }
    Ok(DifferentialReport {
        beta0,
        theta1_at_beta0: theta1,
        c,
        violations: rows.iter().filter(|r| r.violated).count(),
        min_margin: rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min),
        rows,
    })
}

// ---------------------------------------------------------------------------
// β₁

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Beta1Row {
    pub beta: f64,
    /// Slope of `log S_n` against `log n` over the size window, when every
    /// smaller size is in the grid.
    pub s_slope: Option<LinearFit>,
    /// Local growth exponents `1 + log(θ_{n'}/θ_n)/log(n'/n)` of `S_n` for
    /// consecutive window sizes.
    pub exponents: Vec<f64>,
    /// Mean change of the local exponent between consecutive scales.
    pub curvature: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Beta1Estimate {
    pub window: Vec<usize>,
    pub rows: Vec<Beta1Row>,
    /// Where the curvature changes sign from negative to positive.
    pub beta1: Option<f64>,
    /// The same on the `p` scale (unit coupling).
    pub p1: Option<f64>,
    /// Smallest `β` with `S_n` slope at least `1 - slope_tolerance`.
    pub slope_one_beta: Option<f64>,
    pub slope_tolerance: f64,
}

/// Locates `β₁` from a grid. Below `β₁` the local exponents fall with scale
/// (exponential decay), above it they rise towards 1 (linear growth of
/// `S_n`), so their mean change between scales crosses zero at `β₁`.
pub fn beta1_estimate(grid: &ThetaGrid, window: Option<&[usize]>) -> Result<Beta1Estimate> {
    let window: Vec<usize> = match window {
        Some(w) => w.to_vec(),
        None => grid.sizes.iter().copied().filter(|&n| n >= 1).collect(),
    };
    if window.len() < 3 {
        return Err(Error::InvalidParameter(
            "β₁ estimation needs at least three sizes".into(),
        ));
    }
    if window
        .iter()
        .any(|&n| n == 0 || grid.size_index(n).is_none())
    {
        return Err(Error::InvalidParameter(
            "window sizes must be positive grid sizes".into(),
        ));
    }
    let slope_tolerance = 0.05;
    let rows: Vec<Beta1Row> = (0..grid.betas.len())
        .map(|i| {
            let s: Option<Vec<f64>> = window.iter().map(|&n| grid.s_n(i, n)).collect();
            let s_slope = s.and_then(|s| {
                let xs: Vec<f64> = window.iter().map(|&n| (n as f64).ln()).collect();
                let ys: Vec<f64> = s.iter().map(|v| v.ln()).collect();
                linear_fit(&xs, &ys)
            });
            let exponents: Vec<f64> = window
                .windows(2)
                .map(|w| {
                    let a = grid.theta(i, w[0]).unwrap().mean;
                    let b = grid.theta(i, w[1]).unwrap().mean;
                    1.0 + (b / a).ln() / (w[1] as f64 / w[0] as f64).ln()
                })
                .collect();
            let curvature = if exponents.iter().all(|x| x.is_finite()) {
                Some(
                    exponents.windows(2).map(|w| w[1] - w[0]).sum::<f64>()
                        / (exponents.len() - 1) as f64,
                )
            } else {
                None
            };
            Beta1Row {
                beta: grid.betas[i],
                s_slope,
                exponents,
                curvature,
            }
        })
        .collect();
    let mut beta1 = None;
    for w in rows.windows(2) {
        if let (Some(a), Some(b)) = (w[0].curvature, w[1].curvature) {
            if a < 0.0 && b >= 0.0 {
                beta1 = Some(w[0].beta + (w[1].beta - w[0].beta) * a / (a - b));
                break;
            }
        }
    }
    let slope_one_beta = rows
        .iter()
        .find(|r| r.s_slope.is_some_and(|f| f.slope >= 1.0 - slope_tolerance))
        .map(|r| r.beta);
    Ok(Beta1Estimate {
        window,
        p1: beta1.map(|b| p_of_beta(b, grid.coupling)),
        beta1,
        rows,
        slope_one_beta,
        slope_tolerance,
    })
}

// ---------------------------------------------------------------------------
// Decay and mean-field diagnostics

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub sizes: Vec<usize>,
    pub thetas: Vec<f64>,
    /// Values used in the fit after flooring zero estimates.
    pub fitted_values: Vec<f64>,
    /// Sizes whose estimate was zero and was replaced by `0.5/N`.
    pub floored: Vec<usize>,
    pub slope: f64,
    /// `c_β = -slope`.
    pub rate: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log θ_n` against `n`.
pub fn exp_decay_fit(sizes: &[usize], estimates: &[Estimate]) -> Result<DecayFit> {
    if sizes.len() < 2 || sizes.len() != estimates.len() {
        return Err(Error::InvalidParameter(
            "a decay fit needs at least two sizes".into(),
        ));
    }
    let mut floored = Vec::new();
    let fitted_values: Vec<f64> = sizes
        .iter()
        .zip(estimates)
        .map(|(&n, e)| {
            if e.mean > 0.0 {
                e.mean
            } else {
                floored.push(n);
                0.5 / e.n_samples.max(1) as f64
            }
        })
        .collect();
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = fitted_values.iter().map(|v| v.ln()).collect();
    let fit = linear_fit(&xs, &ys)
        .ok_or_else(|| Error::InvalidParameter("degenerate decay fit".into()))?;
    Ok(DecayFit {
        sizes: sizes.to_vec(),
        thetas: estimates.iter().map(|e| e.mean).collect(),
        fitted_values,
        floored,
        slope: fit.slope,
        rate: -fit.slope,
        r_squared: fit.r_squared,
    })
}

/// [`exp_decay_fit`] on one row of a grid.
pub fn exp_decay_fit_grid(
    grid: &ThetaGrid,
    beta_index: usize,
    sizes: &[usize],
) -> Result<DecayFit> {
    let est = sizes
        .iter()
        .map(|&n| {
            grid.theta(beta_index, n)
                .ok_or_else(|| Error::InvalidParameter(format!("size {n} missing from the grid")))
        })
        .collect::<Result<Vec<_>>>()?;
    exp_decay_fit(sizes, &est)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldPoint {
    pub beta: f64,
    pub theta: f64,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldReport {
    pub beta_c: f64,
    pub n: usize,
    pub above: Vec<MeanFieldPoint>,
    pub below: Vec<MeanFieldPoint>,
    /// Largest `c` with `θ̂ ≥ c (β - β_c)` at every point above `β_c`.
    pub c_lower: f64,
    /// Least-squares slope of `θ̂` against `β - β_c` through the origin.
    pub c_fit: f64,
    /// Points above `β_c` whose upper confidence limit falls below the fitted line.
    pub points_below_fit: usize,
    pub positive: bool,
}

/// Mean-field lower bound diagnostic at the largest size of the grid.
pub fn mean_field_scan(grid: &ThetaGrid, beta_c: f64) -> Result<MeanFieldReport> {
    if !(grid.betas.first().is_some_and(|&b| b < beta_c)
        && grid.betas.last().is_some_and(|&b| b > beta_c))
    {
        return Err(Error::InvalidParameter(format!(
            "the grid does not straddle β_c = {beta_c}"
        )));
    }
    let n = *grid.sizes.last().unwrap();
    let j = grid.sizes.len() - 1;
    let point = |i: usize| MeanFieldPoint {
        beta: grid.betas[i],
        theta: grid.values[i][j].mean,
        half_width: grid.values[i][j].half_width_95,
    };
    let above: Vec<MeanFieldPoint> = (0..grid.betas.len())
        .filter(|&i| grid.betas[i] > beta_c)
        .map(point)
        .collect();
    let below: Vec<MeanFieldPoint> = (0..grid.betas.len())
        .filter(|&i| grid.betas[i] <= beta_c)
        .map(point)
        .collect();
    let c_lower = above
        .iter()
        .map(|pt| pt.theta / (pt.beta - beta_c))
        .fold(f64::INFINITY, f64::min);
    let sxy: f64 = above.iter().map(|pt| pt.theta * (pt.beta - beta_c)).sum();
    let sxx: f64 = above.iter().map(|pt| (pt.beta - beta_c).powi(2)).sum();
    let c_fit = sxy / sxx;
    let points_below_fit = above
        .iter()
        .filter(|pt| pt.theta + pt.half_width < c_fit * (pt.beta - beta_c))
        .count();
    Ok(MeanFieldReport {
        beta_c,
        n,
        above,
        below,
        c_lower,
        c_fit,
        points_below_fit,
        positive: c_lower > 0.0,
    })
}

// ---------------------------------------------------------------------------
// Synthetic families for the abstract lemma

/// Closed-form sequences `f_n(β)` for exercising the abstract lemma.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SyntheticFamily {
    /// `min(1, e^{n(β-½)})`. Constant in `β` above ½ for `n ≥ 1`, so the
    /// hypothesis fails there.
    Threshold,
    /// `f_0 = 1`; `f_n = ε e^{-κn(½-β)}` below ½ and `ε + β - ½` above.
    /// Satisfies the hypothesis on `[0,1]` when `κ ≥ 1` and `ε ≤ ½`, with `β₁ = ½`.
    Smoothed { epsilon: f64, kappa: f64 },
    /// `f_n = β/β₀` for every `n`.
    Linear { beta0: f64 },
    /// `f_n ≡ 1`.
    Constant,
}

impl SyntheticFamily {
    pub fn label(&self) -> String {
        match self {
            SyntheticFamily::Threshold => "threshold".into(),
            SyntheticFamily::Smoothed { epsilon, kappa } => {
                format!("smoothed(ε={epsilon},κ={kappa})")
            }
            SyntheticFamily::Linear { beta0 } => format!("linear(β₀={beta0})"),
            SyntheticFamily::Constant => "constant".into(),
        }
    }

    pub fn value(&self, n: usize, beta: f64) -> f64 {
        match *self {
            SyntheticFamily::Threshold => (n as f64 * (beta - 0.5)).exp().min(1.0),
            SyntheticFamily::Smoothed { epsilon, kappa } => {
                if n == 0 {
                    1.0
                } else if beta < 0.5 {
                    epsilon * (-kappa * n as f64 * (0.5 - beta)).exp()
                } else {
                    epsilon + beta - 0.5
                }
            }
            SyntheticFamily::Linear { beta0 } => beta / beta0,
            SyntheticFamily::Constant => 1.0,
        }
    }

    /// Right derivative in `β`.
    pub fn derivative(&self, n: usize, beta: f64) -> f64 {
        match *self {
            SyntheticFamily::Threshold => {
                if beta < 0.5 || n == 0 {
                    n as f64 * self.value(n, beta)
                } else {
                    0.0
                }
            }
            SyntheticFamily::Smoothed { kappa, .. } => {
                if n == 0 {
                    0.0
                } else if beta < 0.5 {
                    kappa * n as f64 * self.value(n, beta)
                } else {
                    1.0
                }
            }
            SyntheticFamily::Linear { beta0 } => 1.0 / beta0,
            SyntheticFamily::Constant => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisWitness {
    pub n: usize,
    pub beta: f64,
    pub derivative: f64,
    /// `n f_n / Σ_n`.
    pub rhs: f64,
}

/// Checks that each `f_n` is increasing with values in `[0, M]` and that
/// `f_n' ≥ n f_n / Σ_n` on `[0, β₀]`; returns the first failure.
pub fn lemma31_hypothesis(
    family: &SyntheticFamily,
    beta0: f64,
    n_max: usize,
    m_bound: f64,
    grid_points: usize,
) -> Option<HypothesisWitness> {
    for i in 0..=grid_points {
        let beta = beta0 * i as f64 / grid_points as f64;
        let mut sigma = 0.0;
        for n in 0..=n_max {
            let f = family.value(n, beta);
            let d = family.derivative(n, beta);
            let rhs = if n == 0 || f == 0.0 {
                0.0
            } else {
                n as f64 * f / sigma
            };
            let bad_range = !(0.0..=m_bound).contains(&f) || d < 0.0;
            if bad_range || d < rhs * (1.0 - 1e-12) - 1e-15 {
                return Some(HypothesisWitness {
                    n,
                    beta,
                    derivative: d,
                    rhs,
                });
            }
            sigma += f;
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma31Report {
    pub family: SyntheticFamily,
    pub beta0: f64,
    pub n_max: usize,
    /// `inf{β : slope of log Σ_n against log n ≥ 0.95}` on the β grid.
    pub beta1: f64,
    /// Points `β < β₁ - δ`: smallest `r²` and largest slope of `log f_n` against `n`.
    pub p1_min_r_squared: Option<f64>,
    pub p1_max_slope: Option<f64>,
    /// Points `β > β₁ + δ`: smallest `f(β) - (β - β₁)`.
    pub p2_min_margin: Option<f64>,
    pub p1_holds: bool,
    pub p2_holds: bool,
}

/// Verifies the hypothesis, locates `β₁` and checks both conclusions on a
/// closed-form family. Fails with [`Error::Hypothesis`] on a violation.
pub fn lemma31_synthetic_check(
    family: &SyntheticFamily,
    beta0: f64,
    n_max: usize,
) -> Result<Lemma31Report> {
    let grid_points = 200;
    if let Some(w) = lemma31_hypothesis(family, beta0, n_max, 1.0, grid_points) {
        return Err(Error::Hypothesis(format!(
            "{}: f_{}'({}) = {} < n f_n/Σ_n = {}",
            family.label(),
            w.n,
            w.beta,
            w.derivative,
            w.rhs
        )));
    }
    let betas: Vec<f64> = (0..=grid_points)
        .map(|i| beta0 * i as f64 / grid_points as f64)
        .collect();
    let slope_at = |beta: f64| -> Option<f64> {
        let sizes: Vec<usize> = (0..=8).map(|k| n_max / 2 + k * n_max / 16).collect();
        let mut sigma = 0.0;
        let mut acc = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            acc.push(sigma);
            sigma += family.value(n, beta);
        }
        let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = sizes.iter().map(|&n| acc[n].ln()).collect();
        if ys.iter().any(|y| !y.is_finite()) {
            return None;
        }
        linear_fit(&xs, &ys).map(|f| f.slope)
    };
    let beta1 = betas
        .iter()
        .copied()
        .find(|&b| slope_at(b).is_some_and(|s| s >= 0.95))
        .unwrap_or(beta0);
    let delta = 0.05;
    let fit_sizes: Vec<usize> = (1..=n_max.min(50)).collect();
    let mut p1_min_r_squared: Option<f64> = None;
    let mut p1_max_slope: Option<f64> = None;
    let mut p1_holds = true;
    for &b in betas.iter().filter(|&&b| b < beta1 - delta) {
        let xs: Vec<f64> = fit_sizes.iter().map(|&n| n as f64).collect();
        let ys: Vec<f64> = fit_sizes.iter().map(|&n| family.value(n, b).ln()).collect();
        match linear_fit(&xs, &ys) {
            Some(f) if ys.iter().all(|y| y.is_finite()) => {
                p1_min_r_squared =
                    Some(p1_min_r_squared.map_or(f.r_squared, |r| r.min(f.r_squared)));
                p1_max_slope = Some(p1_max_slope.map_or(f.slope, |s| s.max(f.slope)));
                p1_holds &= f.r_squared >= 0.99 && f.slope < 0.0;
            }
            _ => p1_holds = false,
        }
    }
    let mut p2_min_margin: Option<f64> = None;
    for &b in betas.iter().filter(|&&b| b > beta1 + delta) {
        let margin = family.value(n_max, b) - (b - beta1);
        p2_min_margin = Some(p2_min_margin.map_or(margin, |m| m.min(margin)));
    }
    Ok(Lemma31Report {
        family: *family,
        beta0,
        n_max,
        beta1,
        p1_min_r_squared,
        p1_max_slope,
        p2_min_margin,
        p1_holds,
        p2_holds: p2_min_margin.is_none_or(|m| m >= -1e-3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_critical_points() {
        for q in [1.0, 1.5, 2.0, 3.0, 4.0] {
            let r = pc_solve(LatticeFamily::Square, q).unwrap();
            assert!((r.p_c - q.sqrt() / (1.0 + q.sqrt())).abs() < 1e-12);
            assert!(r.residual <= 1e-12);
        }
    }

    #[test]
    fn hexagonal_root_at_bracket_edge() {
        let r = pc_solve(LatticeFamily::Hexagonal, 4.0).unwrap();
        assert!((r.y_c - 4.0).abs() < 1e-12);
    }

    #[test]
    fn dual_parameter_is_involution() {
        for q in [1.0, 2.0, 3.5] {
            for p in [0.1, 0.5, 0.77] {
                let r = duality_relation_check(LatticeFamily::Triangular, q, p).unwrap();
                assert!(r.involution_error < 1e-14);
                assert!(r.relation_residual < 1e-12);
            }
        }
        assert!((dual_parameter(0.3, 1.0) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn beta_p_round_trip() {
        assert!((beta_of_p(p_of_beta(0.7, 1.3), 1.3) - 0.7).abs() < 1e-14);
    }

    #[test]
    fn smoothed_family_satisfies_hypothesis() {
        let f = SyntheticFamily::Smoothed {
            epsilon: 0.1,
            kappa: 1.0,
        };
        assert!(lemma31_hypothesis(&f, 1.0, 200, 1.0, 200).is_none());
        assert!(lemma31_hypothesis(&SyntheticFamily::Threshold, 1.0, 50, 1.0, 200).is_some());
        assert!(
            lemma31_hypothesis(&SyntheticFamily::Linear { beta0: 1.0 }, 1.0, 50, 1.0, 200)
                .is_none()
        );
        assert!(
            lemma31_hypothesis(&SyntheticFamily::Linear { beta0: 0.5 }, 0.5, 50, 1.0, 200)
                .is_none()
        );
    }

    #[test]
    fn decay_fit_floors_zero() {
        let est = [
            Estimate {
                mean: 0.1,
                half_width_95: 0.0,
                n_samples: 100,
            },
            Estimate {
                mean: 0.01,
                half_width_95: 0.0,
                n_samples: 100,
            },
            Estimate {
                mean: 0.0,
                half_width_95: 0.0,
                n_samples: 100,
            },
        ];
        let fit = exp_decay_fit(&[1, 2, 3], &est).unwrap();
        assert_eq!(fit.floored, vec![3]);
        assert!(fit.slope < 0.0);
    }
}
