use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{Measure, AUDIT_CAP};
use crate::{Error, Result, EXACT_TOL};

/// Cylinder tables are built for laws up to this many edges (`3^n` entries).
const CYLINDER_CAP: usize = 12;

/// An enumerated law on `{0,1}^n`, indexed by mask.
#[derive(Debug)]
pub struct ExactLaw {
    n: usize,
    probs: Vec<f64>,
    known_monotonic: bool,
    cylinders: OnceLock<Vec<f64>>,
    pow3: Vec<usize>,
}

impl Clone for ExactLaw {
    fn clone(&self) -> Self {
        ExactLaw::new(self.n, self.probs.clone(), self.known_monotonic)
    }
}

impl ExactLaw {
    pub fn new(n: usize, probs: Vec<f64>, known_monotonic: bool) -> Self {
        assert_eq!(probs.len(), 1 << n);
        ExactLaw {
            n,
            probs,
            known_monotonic,
            cylinders: OnceLock::new(),
            pow3: (0..=n).map(|i| 3usize.pow(i as u32)).collect(),
        }
    }

    pub fn n_edges(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, mask: u64) -> f64 {
        self.probs[mask as usize]
    }

    pub fn known_monotonic(&self) -> bool {
        self.known_monotonic
    }

    pub fn full_mask(&self) -> u64 {
        (1u64 << self.n) - 1
    }

    pub fn expectation(&self, mut f: impl FnMut(u64) -> f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(m, &p)| p * f(m as u64))
            .sum()
    }

    /// Ternary index of a cylinder: digit `e` is 0/1 on the support, 2 off it.
    fn ternary(&self, support: u64, values: u64) -> usize {
        (0..self.n)
            .map(|e| {
                let d = if support >> e & 1 == 0 {
                    2
                } else {
                    (values >> e & 1) as usize
                };
                d * self.pow3[e]
            })
            .sum()
    }

    fn cylinder_table(&self) -> &[f64] {
        self.cylinders.get_or_init(|| {
            let total = self.pow3[self.n];
            let mut t = vec![0.0; total];
            for idx in 0..total {
                let mut rest = idx;
                let mut mask = 0usize;
                let mut free = None;
                for e in 0..self.n {
                    match rest % 3 {
                        2 => {
                            free = Some(e);
                            break;
                        }
                        1 => mask |= 1 << e,
                        _ => {}
                    }
                    rest /= 3;
                }
                t[idx] = match free {
                    None => self.probs[mask],
                    Some(e) => t[idx - 2 * self.pow3[e]] + t[idx - self.pow3[e]],
                };
            }
            t
        })
    }

    /// `μ[ω = values on support]`.
    pub fn cylinder(&self, support: u64, values: u64) -> f64 {
        let values = values & support;
        if self.n <= CYLINDER_CAP {
            self.cylinder_table()[self.ternary(support, values)]
        } else {
            self.probs
                .iter()
                .enumerate()
                .filter(|(m, _)| (*m as u64 & support) == values)
                .map(|(_, p)| p)
                .sum()
        }
    }

    /// `μ[ω_e = 1 | ω = values on support]`.
    pub fn cond_one_edge(&self, e: usize, support: u64, values: u64) -> Result<f64> {
        debug_assert_eq!(support >> e & 1, 0);
        let denom = self.cylinder(support, values);
        if denom <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        Ok(self.cylinder(support | 1 << e, values | 1 << e) / denom)
    }

    pub fn marginal(&self, e: usize) -> f64 {
        self.cylinder(1 << e, 1 << e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityWitness {
    pub edge: usize,
    pub conditioned_on: Vec<usize>,
    /// Values on `conditioned_on`, in the same order.
    pub xi: Vec<bool>,
    pub zeta: Vec<bool>,
    pub cond_xi: f64,
    pub cond_zeta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub is_monotonic: bool,
    pub checked_pairs: u64,
    pub witness: Option<MonotonicityWitness>,
}

/// Checks every `e`, `F ∌ e` and comparable `ξ ≤ ζ` in `{0,1}^F` with positive
/// probability. Returns the first violation found.
pub fn monotonicity_audit(m: &Measure) -> Result<MonotonicityReport> {
    let n = m.n_edges();
    if n > AUDIT_CAP {
        return Err(Error::ExactUnavailable {
            size: n,
            cap: AUDIT_CAP,
        });
    }
    let law = m.exact_law(AUDIT_CAP)?;
    Ok(audit_law(&law))
}

pub(crate) fn audit_law(law: &ExactLaw) -> MonotonicityReport {
    let n = law.n;
    let full = law.full_mask();
    let t = law.cylinder_table();
    // tern[mask] = Σ_{e ∈ mask} 3^e
    let tern: Vec<usize> = (0..1usize << n)
        .map(|m| {
            (0..n)
                .filter(|e| m >> e & 1 == 1)
                .map(|e| law.pow3[e])
                .sum()
        })
        .collect();
    let cond = |e: usize, support: u64, values: u64| -> Option<f64> {
        let free = 2 * tern[(full & !support) as usize] + tern[values as usize];
        let denom = t[free];
        (denom > 0.0).then(|| t[free - law.pow3[e]] / denom)
    };
    let mut checked = 0u64;
    for e in 0..n {
        let others = full & !(1 << e);
        let mut support = others;
        loop {
            let mut xi = support;
            loop {
                if let Some(cx) = cond(e, support, xi) {
                    // every ζ ⊇ ξ inside the support
                    let room = support & !xi;
                    let mut extra = room;
                    loop {
                        let zeta = xi | extra;
                        if zeta != xi {
                            if let Some(cz) = cond(e, support, zeta) {
                                checked += 1;
                                if cx > cz + EXACT_TOL {
                                    let ids: Vec<usize> =
                                        (0..n).filter(|f| support >> f & 1 == 1).collect();
                                    return MonotonicityReport {
                                        is_monotonic: false,
                                        checked_pairs: checked,
                                        witness: Some(MonotonicityWitness {
                                            edge: e,
                                            xi: ids.iter().map(|f| xi >> f & 1 == 1).collect(),
                                            zeta: ids.iter().map(|f| zeta >> f & 1 == 1).collect(),
                                            conditioned_on: ids,
                                            cond_xi: cx,
                                            cond_zeta: cz,
                                        }),
                                    };
                                }
                            }
                        }
                        if extra == 0 {
                            break;
                        }
                        extra = (extra - 1) & room;
                    }
                }
                if xi == 0 {
                    break;
                }
                xi = (xi - 1) & support;
            }
            if support == 0 {
                break;
            }
            support = (support - 1) & others;
        }
    }
    MonotonicityReport {
        is_monotonic: true,
        checked_pairs: checked,
        witness: None,
    }
}

/// Largest `|E|` for the up-set enumeration (the number of up-sets grows
/// doubly exponentially).
pub const DOMINATION_CAP: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub dominates: bool,
    pub up_sets_checked: u64,
    /// Largest `μ_lo[A] - μ_hi[A]` over up-sets `A`.
    pub max_excess: f64,
    /// An up-set (list of masks) attaining a violation, if any.
    pub violation: Option<Vec<u64>>,
}

/// Checks `μ_lo[A] ≤ μ_hi[A]` for every up-set `A ⊆ {0,1}^E`.
pub fn stochastic_domination_check(lo: &Measure, hi: &Measure) -> Result<DominationReport> {
    let n = lo.n_edges();
    if hi.n_edges() != n {
        return Err(Error::InvalidParameter(
            "measures live on different edge sets".into(),
        ));
    }
    if n > DOMINATION_CAP {
        return Err(Error::ExactUnavailable {
            size: n,
            cap: DOMINATION_CAP,
        });
    }
    let a = lo.exact_law(DOMINATION_CAP)?;
    let b = hi.exact_law(DOMINATION_CAP)?;
    let diff: Vec<f64> = a
        .probs()
        .iter()
        .zip(b.probs())
        .map(|(x, y)| x - y)
        .collect();
    // Masks by decreasing popcount, so that supersets are decided first.
    let mut order: Vec<u64> = (0..1u64 << n).collect();
    order.sort_by_key(|m| std::cmp::Reverse(m.count_ones()));

    struct Search<'a> {
        n: usize,
        order: &'a [u64],
        diff: &'a [f64],
        chosen: Vec<bool>,
        count: u64,
        best: f64,
        best_set: Vec<u64>,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, acc: f64) {
            if i == self.order.len() {
                self.count += 1;
                if acc > self.best {
                    self.best = acc;
                    self.best_set = (0..self.chosen.len() as u64)
                        .filter(|&m| self.chosen[m as usize])
                        .collect();
                }
                return;
            }
            let m = self.order[i];
            self.go(i + 1, acc);
            let closed = (0..self.n)
                .filter(|e| m >> e & 1 == 0)
                .all(|e| self.chosen[(m | 1 << e) as usize]);
            if closed {
                self.chosen[m as usize] = true;
                self.go(i + 1, acc + self.diff[m as usize]);
                self.chosen[m as usize] = false;
            }
        }
    }
    let mut s = Search {
        n,
        order: &order,
        diff: &diff,
        chosen: vec![false; 1 << n],
        count: 0,
        best: 0.0,
        best_set: Vec::new(),
    };
    s.go(0, 0.0);
    let dominates = s.best <= EXACT_TOL;
    Ok(DominationReport {
        dominates,
        up_sets_checked: s.count,
        max_excess: s.best,
        violation: (!dominates).then_some(s.best_set),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::FiniteGraph;
    use crate::measure::{
        BoundaryCondition, PartialConfig, ProductMeasure, RandomCluster, TableMeasure,
    };

    fn cycle() -> Arc<FiniteGraph> {
        Arc::new(
            FiniteGraph::new(
                vec![0, 1, 2, 3],
                vec![[0, 1], [1, 2], [2, 3], [0, 3]],
                vec![1.0; 4],
                vec![0, 2],
                0,
            )
            .unwrap(),
        )
    }

    #[test]
    fn cylinder_table_matches_direct_sums() {
        let m: Measure = RandomCluster::with_p(cycle(), 2.5, 0.3, BoundaryCondition::Wired)
            .unwrap()
            .into();
        let law = m.exact_law(20).unwrap();
        for support in 0..16u64 {
            for values in 0..16u64 {
                let values = values & support;
                let direct: f64 = (0..16u64)
                    .filter(|x| x & support == values)
                    .map(|x| law.prob(x))
                    .sum();
                assert!((law.cylinder(support, values) - direct).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn anti_correlated_pair_is_caught() {
        let t = TableMeasure::from_json(r#"{"configs":["01","10"],"probs":[0.5,0.5]}"#).unwrap();
        let r = monotonicity_audit(&t.into()).unwrap();
        assert!(!r.is_monotonic);
        let w = r.witness.unwrap();
        assert_eq!(w.edge, 0);
        assert_eq!(w.conditioned_on, vec![1]);
        assert_eq!((w.xi.clone(), w.zeta.clone()), (vec![false], vec![true]));
        assert_eq!((w.cond_xi, w.cond_zeta), (1.0, 0.0));
    }

    #[test]
    fn product_and_random_cluster_are_monotonic() {
        let p: Measure = ProductMeasure::new(vec![0.1, 0.5, 0.9]).unwrap().into();
        assert!(monotonicity_audit(&p).unwrap().is_monotonic);
        for q in [1.0, 1.5, 2.0, 4.0] {
            for bc in [BoundaryCondition::Free, BoundaryCondition::Wired] {
                let m: Measure = RandomCluster::with_p(cycle(), q, 0.4, bc).unwrap().into();
                let r = monotonicity_audit(&m).unwrap();
                assert!(r.is_monotonic, "q={q} {bc:?}");
                assert!(r.checked_pairs > 0);
            }
        }
    }

    #[test]
    fn random_cluster_below_one_is_not_monotonic() {
        let m: Measure = RandomCluster::with_p(cycle(), 0.3, 0.5, BoundaryCondition::Free)
            .unwrap()
            .into();
        assert!(!monotonicity_audit(&m).unwrap().is_monotonic);
    }

    #[test]
    fn audit_witness_is_consistent_with_cond_one_edge() {
        let m: Measure = RandomCluster::with_p(cycle(), 0.3, 0.5, BoundaryCondition::Free)
            .unwrap()
            .into();
        let w = monotonicity_audit(&m).unwrap().witness.unwrap();
        let part = |vals: &[bool]| {
            PartialConfig::from_pairs(w.conditioned_on.iter().copied().zip(vals.iter().copied()))
                .unwrap()
        };
        assert!((m.cond_one_edge(w.edge, &part(&w.xi)).unwrap() - w.cond_xi).abs() < 1e-14);
        assert!((m.cond_one_edge(w.edge, &part(&w.zeta)).unwrap() - w.cond_zeta).abs() < 1e-14);
        assert!(w.xi.iter().zip(&w.zeta).all(|(a, b)| a <= b));
    }

    #[test]
    fn domination_examples() {
        let lo: Measure = ProductMeasure::uniform(3, 0.3).unwrap().into();
        let hi: Measure = ProductMeasure::uniform(3, 0.6).unwrap().into();
        assert!(stochastic_domination_check(&lo, &hi).unwrap().dominates);
        assert!(!stochastic_domination_check(&hi, &lo).unwrap().dominates);
        let same = stochastic_domination_check(&lo, &lo).unwrap();
        assert!(same.dominates && same.max_excess.abs() < 1e-15);
        // up-sets of {0,1}^3: the Dedekind number M(3) = 20
        assert_eq!(same.up_sets_checked, 20);

        let free: Measure = RandomCluster::with_p(cycle(), 2.0, 0.5, BoundaryCondition::Free)
            .unwrap()
            .into();
        let wired: Measure = RandomCluster::with_p(cycle(), 2.0, 0.5, BoundaryCondition::Wired)
            .unwrap()
            .into();
        let r = stochastic_domination_check(&free, &wired).unwrap();
        assert!(r.dominates);
        assert_eq!(r.up_sets_checked, 168);
        assert!(
            !stochastic_domination_check(&wired, &free)
                .unwrap()
                .dominates
        );
    }
}
