//! Probability laws on `{0,1}^E`: product measures, random-cluster measures,
//! explicit tables, and the Potts measure used for the coupling identity.
//!
//! Configurations are small enough here to be enumerated as bit masks: bit
//! `e` of a mask is `ω_e`.

mod config;
mod exact;
mod potts;
mod rc;

pub use config::{Config, PartialConfig};
pub use exact::{
    monotonicity_audit, stochastic_domination_check, DominationReport, ExactLaw,
    MonotonicityReport, MonotonicityWitness,
};
pub use potts::{potts_rc_identity_check, PottsIdentityReport, PottsMeasure};
pub(crate) use rc::load_clusters;
pub use rc::{cluster_count, BoundaryCondition, RandomCluster};

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::graph::FiniteGraph;
use crate::unionfind::UnionFind;
use crate::{Error, Result};

/// Default largest `|E|` for which laws are enumerated.
pub const ENUMERATION_CAP: usize = 20;
/// Ceiling for [`set_enumeration_cap`].
pub const MAX_ENUMERATION_CAP: usize = 26;

static CURRENT_CAP: AtomicUsize = AtomicUsize::new(ENUMERATION_CAP);

/// The enumeration cap in force for this process.
pub fn enumeration_cap() -> usize {
    CURRENT_CAP.load(Ordering::Relaxed)
}

/// Changes the process-wide enumeration cap. Values above
/// [`MAX_ENUMERATION_CAP`] are rejected.
pub fn set_enumeration_cap(cap: usize) -> Result<()> {
    if cap == 0 || cap > MAX_ENUMERATION_CAP {
        return Err(Error::InvalidParameter(format!(
            "enumeration cap must lie in 1..={MAX_ENUMERATION_CAP}"
        )));
    }
    CURRENT_CAP.store(cap, Ordering::Relaxed);
    Ok(())
}
/// Largest `|E|` for the exhaustive monotonicity audit.
pub const AUDIT_CAP: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct ProductMeasure {
    p: Vec<f64>,
}

impl ProductMeasure {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(x) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidParameter(format!(
                "edge parameter {x} outside [0,1]"
            )));
        }
        Ok(ProductMeasure { p })
    }

    pub fn uniform(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn p(&self, e: usize) -> f64 {
        self.p[e]
    }

    pub fn edge_probs(&self) -> &[f64] {
        &self.p
    }
}

/// A law given by its full probability table, indexed by mask.
#[derive(Clone, Debug, PartialEq)]
pub struct TableMeasure {
    n_edges: usize,
    probs: Vec<f64>,
}

/// On-disk form of a table measure. Character `e` of each string is `ω_e`;
/// configurations not listed have probability zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableFile {
    pub configs: Vec<String>,
    pub probs: Vec<f64>,
}

impl TableMeasure {
    pub fn new(n_edges: usize, probs: Vec<f64>) -> Result<Self> {
        if n_edges > enumeration_cap() {
            return Err(Error::ExactUnavailable {
                size: n_edges,
                cap: enumeration_cap(),
            });
        }
        if probs.len() != 1 << n_edges {
            return Err(Error::InvalidParameter(format!(
                "table needs {} entries, got {}",
                1u64 << n_edges,
                probs.len()
            )));
        }
        if let Some(x) = probs.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidParameter(format!("invalid probability {x}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > crate::EXACT_TOL {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(TableMeasure { n_edges, probs })
    }

    pub fn from_file(file: &TableFile) -> Result<Self> {
        if file.configs.len() != file.probs.len() {
            return Err(Error::InvalidParameter(
                "configs and probs differ in length".into(),
            ));
        }
        let n = file.configs.first().map_or(0, String::len);
        if n > enumeration_cap() {
            return Err(Error::ExactUnavailable {
                size: n,
                cap: enumeration_cap(),
            });
        }
        let mut probs = vec![0.0; 1 << n];
        let mut seen = vec![false; 1 << n];
        for (s, &p) in file.configs.iter().zip(&file.probs) {
            let c = Config::from_bitstring(s)?;
            if c.len() != n {
                return Err(Error::InvalidParameter(
                    "configurations differ in length".into(),
                ));
            }
            let m = c.mask() as usize;
            if std::mem::replace(&mut seen[m], true) {
                return Err(Error::InvalidParameter(format!(
                    "configuration {s} listed twice"
                )));
            }
            probs[m] = p;
        }
        Self::new(n, probs)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(s)?)
    }

    pub fn to_file(&self) -> TableFile {
        let (configs, probs) = self
            .probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(m, &p)| (Config::from_mask(m as u64, self.n_edges).to_bitstring(), p))
            .unzip();
        TableFile { configs, probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

#[derive(Clone, Debug)]
pub enum Measure {
    Product(ProductMeasure),
    RandomCluster(RandomCluster),
    Table(TableMeasure),
}

impl From<ProductMeasure> for Measure {
    fn from(m: ProductMeasure) -> Self {
        Measure::Product(m)
    }
}

impl From<RandomCluster> for Measure {
    fn from(m: RandomCluster) -> Self {
        Measure::RandomCluster(m)
    }
}

impl From<TableMeasure> for Measure {
    fn from(m: TableMeasure) -> Self {
        Measure::Table(m)
    }
}

impl Measure {
    pub fn n_edges(&self) -> usize {
        match self {
            Measure::Product(m) => m.p.len(),
            Measure::RandomCluster(m) => m.graph().n_edges(),
            Measure::Table(m) => m.n_edges,
        }
    }

    pub fn graph(&self) -> Option<&FiniteGraph> {
        match self {
            Measure::RandomCluster(m) => Some(m.graph()),
            _ => None,
        }
    }

    /// Monotonic by a general argument rather than by audit: product
    /// measures, and random-cluster measures with `q ≥ 1`.
    pub fn known_monotonic(&self) -> bool {
        match self {
            Measure::Product(_) => true,
            Measure::RandomCluster(m) => m.q() >= 1.0,
            Measure::Table(_) => false,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Measure::Product(m) => match m.p.first() {
                Some(&p) if m.p.iter().all(|&x| x == p) => format!("product(p={p})"),
                _ => "product".into(),
            },
            Measure::RandomCluster(m) => format!(
                "random-cluster(q={}, p={}, {:?})",
                m.q(),
                m.p(0),
                m.boundary_condition()
            )
            .to_lowercase(),
            Measure::Table(_) => "table".into(),
        }
    }

    /// The full law, enumerated. Errors when `|E|` exceeds `cap`.
    pub fn exact_law(&self, cap: usize) -> Result<ExactLaw> {
        let n = self.n_edges();
        let cap = cap.min(enumeration_cap());
        if n > cap {
            return Err(Error::ExactUnavailable { size: n, cap });
        }
        let probs = match self {
            Measure::Product(m) => (0..1u64 << n)
                .map(|mask| product_prob(&m.p, mask))
                .collect(),
            Measure::RandomCluster(m) => rc_table(m),
            Measure::Table(m) => m.probs.clone(),
        };
        Ok(ExactLaw::new(n, probs, self.known_monotonic()))
    }

    /// Exact probability of one configuration.
    pub fn prob(&self, omega: &Config) -> Result<f64> {
        if omega.len() != self.n_edges() {
            return Err(Error::InvalidParameter(
                "configuration length does not match".into(),
            ));
        }
        match self {
            Measure::Product(m) => Ok(product_prob(&m.p, omega.mask())),
            _ => Ok(self.exact_law(enumeration_cap())?.prob(omega.mask())),
        }
    }

    /// `μ[ω_e = 1 | ω = ξ on F]`.
    pub fn cond_one_edge(&self, e: usize, partial: &PartialConfig) -> Result<f64> {
        if e >= self.n_edges() {
            return Err(Error::InvalidParameter(format!("edge {e} out of range")));
        }
        partial.check_edges(self.n_edges())?;
        if partial.contains(e) {
            return Err(Error::InvalidParameter(format!(
                "edge {e} is already conditioned on"
            )));
        }
        match self {
            Measure::Product(m) => {
                if product_cylinder(&m.p, partial.support_mask(), partial.value_mask()) == 0.0 {
                    return Err(Error::ZeroProbability);
                }
                Ok(m.p[e])
            }
            _ => self.exact_law(enumeration_cap())?.cond_one_edge(
                e,
                partial.support_mask(),
                partial.value_mask(),
            ),
        }
    }
}

pub(crate) fn product_prob(p: &[f64], mask: u64) -> f64 {
    p.iter()
        .enumerate()
        .map(|(e, &pe)| if mask >> e & 1 == 1 { pe } else { 1.0 - pe })
        .product()
}

fn product_cylinder(p: &[f64], support: u64, values: u64) -> f64 {
    p.iter()
        .enumerate()
        .filter(|(e, _)| support >> e & 1 == 1)
        .map(|(e, &pe)| if values >> e & 1 == 1 { pe } else { 1.0 - pe })
        .product()
}

/// Normalised random-cluster probabilities by enumeration in log space.
fn rc_table(m: &RandomCluster) -> Vec<f64> {
    use rayon::prelude::*;
    let n = m.graph().n_edges();
    let logw: Vec<f64> = (0..1u64 << n)
        .into_par_iter()
        .map_init(
            || UnionFind::new(m.graph().n_vertices()),
            |uf, mask| m.log_weight(|e| mask >> e & 1 == 1, uf),
        )
        .collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    pub(crate) fn cycle(boundary: Vec<usize>) -> Arc<FiniteGraph> {
        Arc::new(
            FiniteGraph::new(
                vec![0, 1, 2, 3],
                vec![[0, 1], [1, 2], [2, 3], [0, 3]],
                vec![1.0; 4],
                boundary,
                0,
            )
            .unwrap(),
        )
    }

    fn rc(q: f64, p: f64) -> Measure {
        RandomCluster::with_p(cycle(vec![0, 2]), q, p, BoundaryCondition::Free)
            .unwrap()
            .into()
    }

    #[test]
    fn single_edge_open_probability() {
        let g = Arc::new(FiniteGraph::new(vec![0, 1], vec![[0, 1]], vec![1.0], vec![], 0).unwrap());
        for (q, beta) in [(2.0, 0.3), (3.5, 1.7), (1.0, 0.01)] {
            let m: Measure = RandomCluster::new(g.clone(), q, beta, BoundaryCondition::Free)
                .unwrap()
                .into();
            let x = beta.exp_m1();
            let p = m.prob(&Config::open(1)).unwrap();
            assert!((p - x / (x + q)).abs() < 1e-14);
        }
    }

    #[test]
    fn q_one_is_product() {
        let m = rc(1.0, 0.37);
        let law = m.exact_law(20).unwrap();
        for mask in 0..16 {
            assert!((law.prob(mask) - product_prob(&[0.37; 4], mask)).abs() < 1e-14);
        }
    }

    #[test]
    fn four_cycle_q2_half_matches_hand_count() {
        // With p = 1/2 all weights are 2^{k(ω)}: the closed state has k = 4,
        // single edges k = 3, pairs k = 2, triples and the full cycle k = 1.
        // Z = 16 + 4·8 + 6·4 + 4·2 + 2 = 82.
        let law = rc(2.0, 0.5).exact_law(20).unwrap();
        assert!((law.prob(0) - 16.0 / 82.0).abs() < 1e-15);
        assert!((law.prob(0b0001) - 8.0 / 82.0).abs() < 1e-15);
        assert!((law.prob(0b0011) - 4.0 / 82.0).abs() < 1e-15);
        assert!((law.prob(0b0111) - 2.0 / 82.0).abs() < 1e-15);
        assert!((law.prob(0b1111) - 2.0 / 82.0).abs() < 1e-15);
        let total: f64 = law.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditionals_on_four_cycle() {
        let m = rc(2.0, 0.5);
        let open = PartialConfig::from_pairs([(1, true), (2, true), (3, true)]).unwrap();
        assert!((m.cond_one_edge(0, &open).unwrap() - 0.5).abs() < 1e-14);
        let closed = PartialConfig::from_pairs([(1, false), (2, false), (3, false)]).unwrap();
        assert!((m.cond_one_edge(0, &closed).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        assert!(m
            .cond_one_edge(0, &PartialConfig::from_pairs([(0, true)]).unwrap())
            .is_err());
    }

    #[test]
    fn product_conditional_ignores_conditioning() {
        let m: Measure = ProductMeasure::new(vec![0.2, 0.7, 0.4]).unwrap().into();
        let part = PartialConfig::from_pairs([(0, true), (2, false)]).unwrap();
        assert_eq!(m.cond_one_edge(1, &part).unwrap(), 0.7);
        let zero: Measure = ProductMeasure::new(vec![0.0, 0.5]).unwrap().into();
        let bad = PartialConfig::from_pairs([(0, true)]).unwrap();
        assert!(matches!(
            zero.cond_one_edge(1, &bad),
            Err(Error::ZeroProbability)
        ));
    }

    #[test]
    fn large_beta_does_not_overflow() {
        let m: Measure = RandomCluster::new(cycle(vec![0]), 2.0, 800.0, BoundaryCondition::Free)
            .unwrap()
            .into();
        let law = m.exact_law(20).unwrap();
        assert!((law.prob(0b1111) - 1.0).abs() < 1e-12);
        assert!(law.probs().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let m: Measure = ProductMeasure::uniform(21, 0.5).unwrap().into();
        assert!(matches!(
            m.exact_law(20),
            Err(Error::ExactUnavailable { size: 21, cap: 20 })
        ));
    }

    #[test]
    fn table_json_round_trip() {
        let json = r#"{"configs":["01","10"],"probs":[0.5,0.5]}"#;
        let t = TableMeasure::from_json(json).unwrap();
        assert_eq!(t.probs(), &[0.0, 0.5, 0.5, 0.0]);
        assert_eq!(
            serde_json::to_string(&t.to_file()).unwrap(),
            r#"{"configs":["10","01"],"probs":[0.5,0.5]}"#
        );
        assert!(TableMeasure::from_json(r#"{"configs":["01"],"probs":[0.4]}"#).is_err());
    }
}
