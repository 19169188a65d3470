//! Clustered rounding of the doubled fractional solution, its cost-scaled
//! variant, and the best-of-two combination with the threshold algorithm.

use rand::Rng;

use super::{build_clusters, Candidate, ClusterPlan, CopyCosting, PrimalDual, RoundedSolution};
use crate::error::{Error, Result};
use crate::instances::SuflInstance;
use crate::lp::{
    decompose, solve_sufl, split_to_saturation, CostScale, DecomposedSolution, FractionalSolution,
    Stage,
};

/// Probability of running the cost-scaled rounding in the coin variant.
pub const ALG3_COIN: f64 = 0.3396;

/// `in_first[a][pos]` iff `r1 >= 1/2`.
pub fn threshold_select_half(dec: &DecomposedSolution) -> Vec<Vec<bool>> {
    dec.r1
        .iter()
        .map(|ra| ra.iter().map(|&r| r >= 0.5).collect())
        .collect()
}

/// Prepared clustered rounding for one fractional solution.
#[derive(Debug, Clone)]
pub struct ClusteredRounding {
    pub fractional: FractionalSolution,
    pub decomposed: DecomposedSolution,
    pub plan: ClusterPlan,
}

impl ClusteredRounding {
    /// Scales the solution by 2, carves each client's unit-mass candidate
    /// from the stage it is clustered in, and builds the clusters.
    pub fn new(inst: &SuflInstance, frac: &FractionalSolution) -> Result<Self> {
        let decomposed = decompose(frac)?;
        let mut support = split_to_saturation(inst, frac, &decomposed, 2.0)?;
        let first = threshold_select_half(&decomposed);
        let mut candidates = Vec::new();
        for (a, sc) in inst.scenarios.iter().enumerate() {
            for (pos, &j) in sc.clients.iter().enumerate() {
                let in_first = first[a][pos];
                let set = support
                    .carve_prefix(inst, a, pos, in_first)
                    .ok_or_else(|| {
                        Error::Internal(format!("client {j} of scenario {a} lacks unit mass"))
                    })?;
                candidates.push(Candidate {
                    scenario: a,
                    pos,
                    client: j,
                    stage: if in_first {
                        Stage::First
                    } else {
                        Stage::Second(a)
                    },
                    set,
                    radius: support.radius(inst, set, j),
                });
            }
        }
        Ok(ClusteredRounding {
            fractional: frac.clone(),
            decomposed,
            plan: build_clusters(support, candidates),
        })
    }

    /// Solves the LP with the given cost scaling and prepares the rounding.
    pub fn from_instance(inst: &SuflInstance, scale: CostScale) -> Result<Self> {
        let (frac, _) = solve_sufl(inst, scale)?;
        Self::new(inst, &frac)
    }

    pub fn sample<R: Rng + ?Sized>(&self, inst: &SuflInstance, rng: &mut R) -> RoundedSolution {
        self.plan.sample(inst, rng)
    }

    /// Clients whose connection exceeds three times their candidate radius.
    pub fn three_hop_violations(&self, inst: &SuflInstance, sol: &RoundedSolution) -> usize {
        let mut bad = 0;
        for (a, sc) in inst.scenarios.iter().enumerate() {
            for pos in 0..sc.clients.len() {
                let r = self.plan.candidate(a, pos).radius;
                if sol.connection_distance(inst, a, pos) > 3.0 * r + 1e-9 * (1.0 + r) {
                    bad += 1;
                }
            }
        }
        bad
    }
}

/// Runs the cost-scaled clustered rounding and the threshold algorithm with
/// `alpha = 0.37`, keeping the cheaper result, or with `coin` set, picking
/// one of them at random.
#[derive(Debug, Clone)]
pub struct BestOfTwo {
    pub scaled: ClusteredRounding,
    pub threshold: PrimalDual,
    pub coin: bool,
}

impl BestOfTwo {
    pub fn new(inst: &SuflInstance, coin: bool) -> Result<Self> {
        let (frac, _) = solve_sufl(inst, CostScale::UNIT)?;
        Ok(BestOfTwo {
            scaled: ClusteredRounding::from_instance(inst, CostScale::BIFACTOR)?,
            threshold: PrimalDual::new(&frac, 0.37)?,
            coin,
        })
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        inst: &SuflInstance,
        rng: &mut R,
    ) -> Result<RoundedSolution> {
        if self.coin {
            return if rng.random::<f64>() < ALG3_COIN {
                Ok(self.scaled.sample(inst, rng))
            } else {
                self.threshold.run(inst, rng)
            };
        }
        let first = self.scaled.sample(inst, rng);
        let second = self.threshold.run(inst, rng)?;
        let c1 = first.expected_cost(inst, CopyCosting::Dedupe);
        let c2 = second.expected_cost(inst, CopyCosting::Dedupe);
        Ok(if c1 <= c2 { first } else { second })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{dual_budget_example, generate_sufl, GeneratorConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(seed: u64) -> SuflInstance {
        generate_sufl(&GeneratorConfig {
            seed,
            ..GeneratorConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn half_threshold_boundary() {
        let dec = DecomposedSolution {
            x1: vec![],
            x2: vec![],
            r1: vec![vec![0.5, 0.49]],
            r2: vec![vec![0.5, 0.51]],
        };
        assert_eq!(threshold_select_half(&dec), vec![vec![true, false]]);
    }

    #[test]
    fn clusters_are_disjoint_unit_masses() {
        for seed in 0..5 {
            let inst = random(seed);
            let r = ClusteredRounding::from_instance(&inst, CostScale::UNIT).unwrap();
            let mut seen = std::collections::HashSet::new();
            for c in &r.plan.clusters {
                let set = r.plan.support.set(r.plan.candidates[c.candidate].set);
                assert!(
                    (r.plan.support.mass(r.plan.candidates[c.candidate].set) - 1.0).abs() < 1e-9
                );
                for &p in set {
                    assert!(seen.insert(p));
                }
            }
            for &(k, c) in &r.plan.skipped {
                let blocker = &r.plan.candidates[r.plan.clusters[c].candidate];
                assert!(blocker.radius <= r.plan.candidates[k].radius);
            }
        }
    }

    #[test]
    fn every_trial_is_feasible_within_three_hops() {
        for seed in 0..5 {
            let inst = random(seed);
            let r = ClusteredRounding::from_instance(&inst, CostScale::UNIT).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..200 {
                let sol = r.sample(&inst, &mut rng);
                assert!(sol.is_feasible(&inst));
                assert_eq!(r.three_hop_violations(&inst, &sol), 0);
            }
        }
    }

    #[test]
    fn integral_solution_rounds_to_itself() {
        let inst = dual_budget_example(0.01);
        let r = ClusteredRounding::from_instance(&inst, CostScale::UNIT).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let sol = r.sample(&inst, &mut rng);
            for a in 0..2 {
                let cost = sol.scenario_cost(&inst, a, CopyCosting::Dedupe).total();
                assert!((cost - r.fractional.value(&inst, a)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn best_of_two_is_no_worse_than_either() {
        let inst = random(7);
        let b = BestOfTwo::new(&inst, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let mut probe = rng.clone();
            let s1 = b.scaled.sample(&inst, &mut probe);
            let s2 = b.threshold.run(&inst, &mut probe).unwrap();
            let best = b.sample(&inst, &mut rng).unwrap();
            let c = best.expected_cost(&inst, CopyCosting::Dedupe);
            assert!(c <= s1.expected_cost(&inst, CopyCosting::Dedupe) + 1e-12);
            assert!(c <= s2.expected_cost(&inst, CopyCosting::Dedupe) + 1e-12);
        }
    }
}
