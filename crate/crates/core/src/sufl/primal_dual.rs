//! Randomized-threshold rounding: a threshold `Z` splits the client-scenario
//! pairs into a stage-I facility-location instance and one stage-II instance
//! per scenario, each solved by the greedy bifactor algorithm.

use std::collections::BTreeMap;

use rand::Rng;

use super::RoundedSolution;
use crate::error::{Error, Result};
use crate::instances::SuflInstance;
use crate::jms::{jms_solve, UflSubinstance};
use crate::lp::{decompose, DecomposedSolution, FractionalSolution};

/// `Z = 1/2` with probability `alpha / (1 - alpha)`, otherwise uniform on
/// `[alpha, 1 - alpha]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdDistribution {
    alpha: f64,
}

impl ThresholdDistribution {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(Error::OutOfRange(format!(
                "alpha {alpha} must lie in (0, 1/2]"
            )));
        }
        Ok(ThresholdDistribution { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Probability of the point mass at 1/2.
    pub fn atom(&self) -> f64 {
        self.alpha / (1.0 - self.alpha)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.alpha;
        if rng.random::<f64>() < self.atom() {
            0.5
        } else {
            a + (1.0 - 2.0 * a) * rng.random::<f64>()
        }
    }

    /// `P(Z <= z)`
    pub fn cdf(&self, z: f64) -> f64 {
        let a = self.alpha;
        let w = self.atom();
        let uniform = if a >= 0.5 {
            f64::from(z >= 0.5)
        } else {
            ((z - a) / (1.0 - 2.0 * a)).clamp(0.0, 1.0)
        };
        (1.0 - w) * uniform + if z >= 0.5 { w } else { 0.0 }
    }

    /// Probability that a pair with stage-I mass `r1` is selected.
    pub fn selection_probability(&self, r1: f64) -> f64 {
        self.cdf(r1)
    }

    /// `E[1/Z] = (2 alpha + ln((1 - alpha) / alpha)) / (1 - alpha)`
    pub fn expected_inverse(&self) -> f64 {
        let a = self.alpha;
        (2.0 * a + ((1.0 - a) / a).ln()) / (1.0 - a)
    }
}

/// `(facility factor, connection factor, max)` of the threshold algorithm
/// run with the (1.11, 1.78) bifactor subroutine.
pub fn evaluate_ratio(alpha: f64) -> Result<(f64, f64, f64)> {
    let d = ThresholdDistribution::new(alpha)?;
    let f = 1.11 * d.expected_inverse();
    let c = 1.78 / (1.0 - alpha);
    Ok((f, c, f.max(c)))
}

/// `selected[a][pos]` iff `Z <= r1`.
pub fn select_pairs(dec: &DecomposedSolution, z: f64) -> Vec<Vec<bool>> {
    dec.r1
        .iter()
        .map(|ra| ra.iter().map(|&r| z <= r).collect())
        .collect()
}

/// Prepared threshold rounding for one fractional solution.
#[derive(Debug, Clone)]
pub struct PrimalDual {
    pub threshold: ThresholdDistribution,
    pub decomposed: DecomposedSolution,
}

impl PrimalDual {
    pub fn new(sol: &FractionalSolution, alpha: f64) -> Result<Self> {
        Ok(PrimalDual {
            threshold: ThresholdDistribution::new(alpha)?,
            decomposed: decompose(sol)?,
        })
    }

    /// Runs the algorithm for a fixed threshold.
    pub fn run_with_threshold(&self, inst: &SuflInstance, z: f64) -> Result<RoundedSolution> {
        let selected = select_pairs(&self.decomposed, z);
        let nf = inst.num_facilities();
        // co-located copies of a client are merged, demand p_A * d_j each
        let mut stage_one: BTreeMap<usize, f64> = BTreeMap::new();
        for (a, sc) in inst.scenarios.iter().enumerate() {
            for (pos, &j) in sc.clients.iter().enumerate() {
                if selected[a][pos] {
                    *stage_one.entry(j).or_insert(0.0) += sc.prob * inst.clients[j].demand;
                }
            }
        }
        stage_one.retain(|_, d| *d > 0.0);
        let mut first_stage = Vec::new();
        let mut first_choice = BTreeMap::new();
        if !stage_one.is_empty() {
            let clients: Vec<usize> = stage_one.keys().copied().collect();
            let sub = UflSubinstance {
                opening: inst.facilities.iter().map(|f| f.opening_first).collect(),
                demand: stage_one.values().copied().collect(),
                distance: (0..nf)
                    .map(|i| clients.iter().map(|&j| inst.dist(i, j)).collect())
                    .collect(),
            };
            let sol = jms_solve(&sub)?;
            first_stage = sol.open.clone();
            first_stage.sort_unstable();
            for (k, &j) in clients.iter().enumerate() {
                first_choice.insert(j, sol.assignment[k]);
            }
        }
        let mut second_stage = Vec::with_capacity(inst.num_scenarios());
        let mut assignment = Vec::with_capacity(inst.num_scenarios());
        for (a, sc) in inst.scenarios.iter().enumerate() {
            let rest: Vec<usize> = (0..sc.clients.len())
                .filter(|&pos| !selected[a][pos])
                .collect();
            let mut choice = vec![usize::MAX; sc.clients.len()];
            let mut opened = Vec::new();
            // zero-demand clients are not part of the subinstance; they use
            // the closest facility opened for anyone
            let weighted: Vec<usize> = rest
                .iter()
                .copied()
                .filter(|&pos| inst.clients[sc.clients[pos]].demand > 0.0)
                .collect();
            if !weighted.is_empty() {
                let sub = UflSubinstance {
                    opening: inst
                        .facilities
                        .iter()
                        .map(|f| f.opening_second[a])
                        .collect(),
                    demand: weighted
                        .iter()
                        .map(|&pos| inst.clients[sc.clients[pos]].demand)
                        .collect(),
                    distance: (0..nf)
                        .map(|i| {
                            weighted
                                .iter()
                                .map(|&pos| inst.dist(i, sc.clients[pos]))
                                .collect()
                        })
                        .collect(),
                };
                let sol = jms_solve(&sub)?;
                opened = sol.open.clone();
                opened.sort_unstable();
                for (k, &pos) in weighted.iter().enumerate() {
                    choice[pos] = sol.assignment[k];
                }
            }
            for (pos, &j) in sc.clients.iter().enumerate() {
                if selected[a][pos] {
                    if let Some(&i) = first_choice.get(&j) {
                        choice[pos] = i;
                    }
                }
            }
            let closest = super::connect_closest(inst, a, &first_stage, &opened);
            for (pos, c) in choice.iter_mut().enumerate() {
                if *c == usize::MAX {
                    *c = closest[pos];
                }
            }
            if choice.contains(&usize::MAX) {
                // only zero-demand clients with nothing open anywhere: open
                // their cheapest stage-II facility
                let cheapest = (0..nf)
                    .min_by(|&p, &q| {
                        inst.facilities[p].opening_second[a]
                            .total_cmp(&inst.facilities[q].opening_second[a])
                            .then(p.cmp(&q))
                    })
                    .expect("instances have facilities");
                opened.push(cheapest);
                for c in choice.iter_mut().filter(|c| **c == usize::MAX) {
                    *c = cheapest;
                }
            }
            second_stage.push(opened);
            assignment.push(choice);
        }
        Ok(RoundedSolution {
            first_stage,
            second_stage,
            assignment,
        })
    }

    /// Draws `Z` and runs the algorithm.
    pub fn run<R: Rng + ?Sized>(
        &self,
        inst: &SuflInstance,
        rng: &mut R,
    ) -> Result<RoundedSolution> {
        let z = self.threshold.sample(rng);
        self.run_with_threshold(inst, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_sufl, GeneratorConfig};
    use crate::lp::{solve_sufl, CostScale};
    use crate::sufl::CopyCosting;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_alpha_is_a_point_mass() {
        let d = ThresholdDistribution::new(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..100).all(|_| d.sample(&mut rng) == 0.5));
        assert_eq!(d.atom(), 1.0);
    }

    #[test]
    fn atom_weight() {
        let d = ThresholdDistribution::new(0.2485).unwrap();
        assert!((d.atom() - 0.2485 / 0.7515).abs() < 1e-15);
        assert!((d.atom() - 0.3307).abs() < 1e-4);
    }

    #[test]
    fn ratio_at_recommended_alpha() {
        let (f, c, m) = evaluate_ratio(0.2485).unwrap();
        assert!(m < 2.369);
        assert!((f - 2.36864).abs() < 1e-5 && (c - 2.36860).abs() < 1e-5);
    }

    #[test]
    fn ratio_for_second_algorithm() {
        let (f, c, _) = evaluate_ratio(0.37).unwrap();
        assert!((f - 2.24152).abs() < 1e-4);
        assert!((c - 2.8254).abs() < 1e-4);
    }

    #[test]
    fn ratio_at_quarter() {
        let (f, c, m) = evaluate_ratio(0.25).unwrap();
        assert!((f - 2.3660).abs() < 1e-4);
        assert!((c - 2.3733).abs() < 1e-4);
        assert_eq!(m, c);
    }

    #[test]
    fn selection_boundaries() {
        let dec = DecomposedSolution {
            x1: vec![],
            x2: vec![],
            r1: vec![vec![1.0, 0.0, 0.4]],
            r2: vec![vec![0.0, 1.0, 0.6]],
        };
        assert_eq!(select_pairs(&dec, 0.4), vec![vec![true, false, true]]);
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(ThresholdDistribution::new(0.0).is_err());
        assert!(ThresholdDistribution::new(0.6).is_err());
    }

    #[test]
    fn feasible_on_random_instances() {
        for seed in 0..5 {
            let inst = generate_sufl(&GeneratorConfig {
                seed,
                ..GeneratorConfig::default()
            })
            .unwrap();
            let (frac, _) = solve_sufl(&inst, CostScale::UNIT).unwrap();
            let pd = PrimalDual::new(&frac, 0.2485).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                let sol = pd.run(&inst, &mut rng).unwrap();
                assert!(sol.is_feasible(&inst));
                assert!(
                    sol.expected_cost(&inst, CopyCosting::Dedupe) >= frac.objective(&inst) - 1e-6
                );
            }
        }
    }

    #[test]
    fn pure_first_stage_leaves_second_stage_empty() {
        let inst = crate::instances::dual_budget_example(0.01);
        let (frac, _) = solve_sufl(&inst, CostScale::UNIT).unwrap();
        let pd = PrimalDual::new(&frac, 0.2485).unwrap();
        let sol = pd.run_with_threshold(&inst, 0.5).unwrap();
        assert!(sol.second_stage.iter().all(Vec::is_empty));
        assert_eq!(sol.first_stage, vec![1]);
    }
}
