//! Rounding algorithms for two-stage stochastic facility location.

mod clusters;
pub mod lp_rounding;
pub mod per_scenario;
pub mod primal_dual;

pub use clusters::{build_clusters, connect_closest, Candidate, Cluster, ClusterPlan};
pub use lp_rounding::{threshold_select_half, BestOfTwo, ClusteredRounding, ALG3_COIN};
pub use per_scenario::{
    connection_factor, equalizing_gamma, stretch_bound, FilteredNeighborhoods, FilteredPair,
    PerScenarioRounding, DEFAULT_GAMMA, STRICT_GAMMA,
};
pub use primal_dual::{evaluate_ratio, select_pairs, PrimalDual, ThresholdDistribution};

use serde::Serialize;

use crate::instances::SuflInstance;

/// How opened copies of one facility are paid for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CopyCosting {
    /// Each facility is paid once per stage; stage-II openings of a facility
    /// already open in stage I are free.
    Dedupe,
    /// Every opened copy is paid.
    PerCopy,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ScenarioCost {
    pub first_stage: f64,
    pub second_stage: f64,
    pub connection: f64,
}

impl ScenarioCost {
    pub fn opening(&self) -> f64 {
        self.first_stage + self.second_stage
    }

    pub fn total(&self) -> f64 {
        self.first_stage + self.second_stage + self.connection
    }
}

/// Unassigned clients (facility `usize::MAX`) are infinitely far away.
fn distance_or_inf(inst: &SuflInstance, i: usize, j: usize) -> f64 {
    inst.distances.get(i).map_or(f64::INFINITY, |row| row[j])
}

/// An integral two-stage policy. Opened facilities are listed once per
/// opened copy, so a facility may repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundedSolution {
    pub first_stage: Vec<usize>,
    pub second_stage: Vec<Vec<usize>>,
    /// `assignment[a][pos]` serves the `pos`-th client of scenario `a`.
    pub assignment: Vec<Vec<usize>>,
}

impl RoundedSolution {
    pub fn scenario_cost(&self, inst: &SuflInstance, a: usize, mode: CopyCosting) -> ScenarioCost {
        let (first, second): (Vec<usize>, Vec<usize>) = match mode {
            CopyCosting::PerCopy => (self.first_stage.clone(), self.second_stage[a].clone()),
            CopyCosting::Dedupe => {
                let mut first = self.first_stage.clone();
                first.sort_unstable();
                first.dedup();
                let mut second: Vec<usize> = self.second_stage[a]
                    .iter()
                    .copied()
                    .filter(|i| first.binary_search(i).is_err())
                    .collect();
                second.sort_unstable();
                second.dedup();
                (first, second)
            }
        };
        ScenarioCost {
            first_stage: first
                .iter()
                .map(|&i| inst.facilities[i].opening_first)
                .sum(),
            second_stage: second
                .iter()
                .map(|&i| inst.facilities[i].opening_second[a])
                .sum(),
            connection: inst.scenarios[a]
                .clients
                .iter()
                .zip(&self.assignment[a])
                .map(|(&j, &i)| inst.clients[j].demand * distance_or_inf(inst, i, j))
                .sum(),
        }
    }

    /// `sum_A p_A COST(A)`
    pub fn expected_cost(&self, inst: &SuflInstance, mode: CopyCosting) -> f64 {
        inst.scenarios
            .iter()
            .enumerate()
            .map(|(a, s)| s.prob * self.scenario_cost(inst, a, mode).total())
            .sum()
    }

    pub fn connection_distance(&self, inst: &SuflInstance, a: usize, pos: usize) -> f64 {
        distance_or_inf(
            inst,
            self.assignment[a][pos],
            inst.scenarios[a].clients[pos],
        )
    }

    /// Moves every client to its closest facility open in stage I or in its
    /// scenario; connection costs can only drop.
    pub fn reassign_closest(&mut self, inst: &SuflInstance) {
        for a in 0..inst.num_scenarios() {
            self.assignment[a] = connect_closest(inst, a, &self.first_stage, &self.second_stage[a]);
        }
    }

    /// Every client is served by a facility open in stage I or in its scenario.
    pub fn is_feasible(&self, inst: &SuflInstance) -> bool {
        self.assignment.len() == inst.num_scenarios()
            && inst.scenarios.iter().enumerate().all(|(a, sc)| {
                self.assignment[a].len() == sc.clients.len()
                    && self.assignment[a]
                        .iter()
                        .all(|i| self.first_stage.contains(i) || self.second_stage[a].contains(i))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::dual_budget_example;

    #[test]
    fn costing_modes() {
        let inst = dual_budget_example(0.01);
        let sol = RoundedSolution {
            first_stage: vec![1, 1],
            second_stage: vec![vec![1, 0], vec![]],
            assignment: vec![vec![0], vec![1]],
        };
        let per_copy = sol.scenario_cost(&inst, 0, CopyCosting::PerCopy);
        assert!((per_copy.first_stage - 0.02).abs() < 1e-12);
        assert_eq!(per_copy.second_stage, 8.0);
        let dedupe = sol.scenario_cost(&inst, 0, CopyCosting::Dedupe);
        assert!((dedupe.first_stage - 0.01).abs() < 1e-12);
        assert_eq!(dedupe.second_stage, 4.0);
        assert_eq!(dedupe.connection, 1.0);
        assert!(sol.is_feasible(&inst));
    }

    #[test]
    fn reassignment_never_increases_connection() {
        let inst = dual_budget_example(0.01);
        let mut sol = RoundedSolution {
            first_stage: vec![0, 1],
            second_stage: vec![vec![], vec![]],
            assignment: vec![vec![1], vec![0]],
        };
        let before = sol.expected_cost(&inst, CopyCosting::Dedupe);
        sol.reassign_closest(&inst);
        assert!(sol.expected_cost(&inst, CopyCosting::Dedupe) <= before);
        assert_eq!(sol.assignment, vec![vec![0], vec![0]]);
    }

    #[test]
    fn unopened_assignment_is_infeasible() {
        let inst = dual_budget_example(0.01);
        let sol = RoundedSolution {
            first_stage: vec![],
            second_stage: vec![vec![0], vec![]],
            assignment: vec![vec![0], vec![0]],
        };
        assert!(!sol.is_feasible(&inst));
    }
}
