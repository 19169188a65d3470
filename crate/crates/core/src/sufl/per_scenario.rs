//! Filtered rounding with per-scenario guarantees: each client clusters in
//! the stage whose closest unit of scaled mass lies nearer, which bounds
//! every realized connection by a fixed multiple of the client's
//! fractional connection cost.

use rand::Rng;

use super::{build_clusters, Candidate, ClusterPlan, RoundedSolution};
use crate::error::{Error, Result};
use crate::instances::SuflInstance;
use crate::lp::{
    decompose, solve_sufl, split_to_saturation, CostScale, FractionalSolution, SaturatedSupport,
    Stage,
};

pub const DEFAULT_GAMMA: f64 = 2.4957;
pub const STRICT_GAMMA: f64 = 5.0;

/// Expected connection factor `1 + (2 gamma + 2) / (gamma - 2) * e^-gamma`.
pub fn connection_factor(gamma: f64) -> f64 {
    1.0 + (2.0 * gamma + 2.0) / (gamma - 2.0) * (-gamma).exp()
}

/// Deterministic per-client stretch `3 gamma / (gamma - 2)`.
pub fn stretch_bound(gamma: f64) -> f64 {
    3.0 * gamma / (gamma - 2.0)
}

/// Root of `connection_factor(gamma) = gamma` on `(2, 4)`, by bisection.
pub fn equalizing_gamma() -> f64 {
    let f = |g: f64| connection_factor(g) - g;
    let (mut lo, mut hi) = (2.0 + 1e-9, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Filtered neighborhoods of one client-scenario pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredPair {
    pub scenario: usize,
    pub pos: usize,
    pub client: usize,
    /// Set ids of the stage-I and stage-II prefixes, when defined.
    pub first: Option<usize>,
    pub second: Option<usize>,
    pub d_first: Option<f64>,
    pub d_second: Option<f64>,
    pub d: f64,
    /// Ties go to stage I.
    pub first_stage_clustered: bool,
    /// `C_(j,A)` of the unscaled solution.
    pub fractional_connection: f64,
}

#[derive(Debug, Clone)]
pub struct FilteredNeighborhoods {
    pub gamma: f64,
    pub support: SaturatedSupport,
    pub pairs: Vec<FilteredPair>,
}

impl FilteredNeighborhoods {
    /// Scales by `gamma`, splits to saturation and carves the closest unit
    /// prefix of each client's stage-I and stage-II support.
    pub fn build(inst: &SuflInstance, frac: &FractionalSolution, gamma: f64) -> Result<Self> {
        if !(gamma > 2.0 && gamma.is_finite()) {
            return Err(Error::OutOfRange(format!("gamma {gamma} must exceed 2")));
        }
        let dec = decompose(frac)?;
        let mut support = split_to_saturation(inst, frac, &dec, gamma)?;
        let mut pairs = Vec::new();
        for (a, sc) in inst.scenarios.iter().enumerate() {
            for (pos, &j) in sc.clients.iter().enumerate() {
                let first = support.carve_prefix(inst, a, pos, true);
                let second = support.carve_prefix(inst, a, pos, false);
                let d_first = first.map(|s| support.radius(inst, s, j));
                let d_second = second.map(|s| support.radius(inst, s, j));
                let (d, first_stage_clustered) = match (d_first, d_second) {
                    (Some(x), Some(y)) => (x.min(y), x <= y),
                    (Some(x), None) => (x, true),
                    (None, Some(y)) => (y, false),
                    (None, None) => {
                        return Err(Error::Internal(format!(
                            "client {j} of scenario {a} has less than unit mass in both stages"
                        )))
                    }
                };
                pairs.push(FilteredPair {
                    scenario: a,
                    pos,
                    client: j,
                    first,
                    second,
                    d_first,
                    d_second,
                    d,
                    first_stage_clustered,
                    fractional_connection: frac.pair_connection(inst, a, pos),
                });
            }
        }
        Ok(FilteredNeighborhoods {
            gamma,
            support,
            pairs,
        })
    }

    /// Pairs violating `d <= gamma / (gamma - 2) * C_(j,A)`.
    pub fn radius_audit(&self) -> Vec<usize> {
        let factor = self.gamma / (self.gamma - 2.0);
        (0..self.pairs.len())
            .filter(|&k| {
                let p = &self.pairs[k];
                let bound = factor * p.fractional_connection;
                p.d > bound + 1e-9 * (1.0 + bound)
            })
            .collect()
    }
}

/// Prepared filtered rounding.
#[derive(Debug, Clone)]
pub struct PerScenarioRounding {
    pub gamma: f64,
    pub fractional: FractionalSolution,
    pub pairs: Vec<FilteredPair>,
    pub plan: ClusterPlan,
    /// Pairs failing the radius audit; empty for an optimal LP solution.
    pub audit_failures: Vec<usize>,
}

impl PerScenarioRounding {
    pub fn new(inst: &SuflInstance, frac: &FractionalSolution, gamma: f64) -> Result<Self> {
        let filtered = FilteredNeighborhoods::build(inst, frac, gamma)?;
        let audit_failures = filtered.radius_audit();
        let candidates = filtered
            .pairs
            .iter()
            .map(|p| Candidate {
                scenario: p.scenario,
                pos: p.pos,
                client: p.client,
                stage: if p.first_stage_clustered {
                    Stage::First
                } else {
                    Stage::Second(p.scenario)
                },
                set: if p.first_stage_clustered {
                    p.first
                } else {
                    p.second
                }
                .expect("chosen side exists"),
                radius: p.d,
            })
            .collect();
        Ok(PerScenarioRounding {
            gamma,
            fractional: frac.clone(),
            pairs: filtered.pairs,
            plan: build_clusters(filtered.support, candidates),
            audit_failures,
        })
    }

    pub fn from_instance(inst: &SuflInstance, gamma: f64) -> Result<Self> {
        let (frac, _) = solve_sufl(inst, CostScale::UNIT)?;
        Self::new(inst, &frac, gamma)
    }

    pub fn sample<R: Rng + ?Sized>(&self, inst: &SuflInstance, rng: &mut R) -> RoundedSolution {
        self.plan.sample(inst, rng)
    }

    /// Clients whose connection exceeds `stretch_bound(gamma) * C_(j,A)`.
    pub fn stretch_violations(&self, inst: &SuflInstance, sol: &RoundedSolution) -> usize {
        self.stretch_violations_at(inst, sol, stretch_bound(self.gamma))
    }

    pub fn stretch_violations_at(
        &self,
        inst: &SuflInstance,
        sol: &RoundedSolution,
        factor: f64,
    ) -> usize {
        self.pairs
            .iter()
            .filter(|p| {
                let bound = factor * p.fractional_connection;
                sol.connection_distance(inst, p.scenario, p.pos) > bound + 1e-9 * (1.0 + bound)
            })
            .count()
    }

    /// Largest ratio of realized to fractional connection cost in `sol`.
    pub fn max_stretch(&self, inst: &SuflInstance, sol: &RoundedSolution) -> f64 {
        self.pairs
            .iter()
            .map(|p| {
                let c = sol.connection_distance(inst, p.scenario, p.pos);
                if c <= 0.0 {
                    0.0
                } else if p.fractional_connection <= 0.0 {
                    f64::INFINITY
                } else {
                    c / p.fractional_connection
                }
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{dual_budget_example, generate_sufl, GeneratorConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn factors_at_reference_points() {
        assert!((connection_factor(5.0) - 1.0270).abs() < 1e-4);
        assert!((connection_factor(DEFAULT_GAMMA) - 2.163).abs() < 1e-3);
        assert!(connection_factor(DEFAULT_GAMMA) < DEFAULT_GAMMA);
        assert!((connection_factor(60.0) - 1.0).abs() < 1e-20);
        assert_eq!(stretch_bound(5.0), 5.0);
        assert_eq!(stretch_bound(3.0), 9.0);
        let s = stretch_bound(DEFAULT_GAMMA);
        assert!((15.10..=15.11).contains(&s));
    }

    #[test]
    fn equalizing_root_is_below_default() {
        let g = equalizing_gamma();
        assert!((connection_factor(g) - g).abs() < 1e-9);
        assert!((2.42..2.44).contains(&g));
    }

    #[test]
    fn rejects_small_gamma() {
        let inst = dual_budget_example(0.01);
        assert!(PerScenarioRounding::from_instance(&inst, 2.0).is_err());
    }

    #[test]
    fn all_stage_one_mass_clusters_first() {
        let inst = dual_budget_example(0.01);
        let r = PerScenarioRounding::from_instance(&inst, DEFAULT_GAMMA).unwrap();
        assert!(r
            .pairs
            .iter()
            .all(|p| p.first_stage_clustered && p.second.is_none()));
    }

    #[test]
    fn hand_split_masses() {
        // one client, y = 0.52 / y_A = 0.48 on two facilities at distance 1 and 2
        use crate::instances::{Client, Facility, Scenario};
        let fac = |id: &str| Facility {
            id: id.into(),
            opening_first: 1.0,
            opening_second: vec![1.0],
            position: None,
        };
        let inst = SuflInstance {
            facilities: vec![fac("a"), fac("b")],
            clients: vec![Client {
                id: "c".into(),
                demand: 1.0,
                position: None,
            }],
            distances: vec![vec![1.0], vec![2.0]],
            scenarios: vec![Scenario {
                prob: 1.0,
                clients: vec![0],
            }],
            metric: None,
        };
        let frac = FractionalSolution {
            y: vec![0.52, 0.0],
            y_scen: vec![vec![0.0, 0.48]],
            x: vec![vec![vec![0.52, 0.48]]],
        };
        // scaled masses 1.298 and 1.198: both prefixes defined
        let f = FilteredNeighborhoods::build(&inst, &frac, DEFAULT_GAMMA).unwrap();
        let p = &f.pairs[0];
        assert_eq!((p.d_first, p.d_second), (Some(1.0), Some(2.0)));
        assert_eq!(p.d, 1.0);
        assert!(p.first_stage_clustered);
        assert!(f.radius_audit().is_empty());
    }

    #[test]
    fn strict_stretch_holds_on_random_instances() {
        for seed in 0..5 {
            let inst = generate_sufl(&GeneratorConfig {
                seed,
                ..GeneratorConfig::default()
            })
            .unwrap();
            for gamma in [DEFAULT_GAMMA, STRICT_GAMMA] {
                let r = PerScenarioRounding::from_instance(&inst, gamma).unwrap();
                assert!(r.audit_failures.is_empty());
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..100 {
                    let sol = r.sample(&inst, &mut rng);
                    assert!(sol.is_feasible(&inst));
                    assert_eq!(r.stretch_violations(&inst, &sol), 0);
                }
            }
        }
    }
}
