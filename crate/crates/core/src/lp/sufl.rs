//! Primal and dual relaxations of two-stage stochastic facility location.

use serde::{Deserialize, Serialize};

use super::{solve, Direction, LinearProgram, Sense};
use crate::error::{Error, Result};
use crate::instances::SuflInstance;
use crate::jms::UflSubinstance;

/// Multipliers applied to opening and connection costs before solving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostScale {
    pub facility: f64,
    pub connection: f64,
}

impl CostScale {
    pub const UNIT: CostScale = CostScale {
        facility: 1.0,
        connection: 1.0,
    };
    /// The bifactor scaling used by the cost-scaled clustered rounding.
    pub const BIFACTOR: CostScale = CostScale {
        facility: 2.4061,
        connection: 1.2707,
    };
}

impl Default for CostScale {
    fn default() -> Self {
        CostScale::UNIT
    }
}

/// The facility-location relaxation with its variable and row maps.
/// Client positions `pos` index into `scenarios[a].clients`.
#[derive(Debug, Clone)]
pub struct SuflLp {
    pub lp: LinearProgram,
    pub y: Vec<usize>,
    pub y_scen: Vec<Vec<usize>>,
    /// `x[a][pos][i]`
    pub x: Vec<Vec<Vec<usize>>>,
    pub assign_rows: Vec<Vec<usize>>,
    pub link_rows: Vec<Vec<Vec<usize>>>,
}

pub fn build_sufl_primal(inst: &SuflInstance, scale: CostScale) -> Result<SuflLp> {
    if !(scale.facility > 0.0 && scale.connection > 0.0) {
        return Err(Error::OutOfRange(
            "cost scale factors must be positive".into(),
        ));
    }
    let nf = inst.num_facilities();
    let mut lp = LinearProgram::new(Direction::Minimize);
    let y = (0..nf)
        .map(|i| {
            lp.add_var(
                format!("y[{i}]"),
                scale.facility * inst.facilities[i].opening_first,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut y_scen = Vec::new();
    let mut x = Vec::new();
    for (a, sc) in inst.scenarios.iter().enumerate() {
        y_scen.push(
            (0..nf)
                .map(|i| {
                    lp.add_var(
                        format!("yA[{a}][{i}]"),
                        scale.facility * sc.prob * inst.facilities[i].opening_second[a],
                    )
                })
                .collect::<Result<Vec<_>>>()?,
        );
        let mut xa = Vec::new();
        for &j in &sc.clients {
            let d = inst.clients[j].demand;
            xa.push(
                (0..nf)
                    .map(|i| {
                        lp.add_var(
                            format!("x[{a}][{j}][{i}]"),
                            scale.connection * sc.prob * d * inst.dist(i, j),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        x.push(xa);
    }
    let mut assign_rows = Vec::new();
    let mut link_rows = Vec::new();
    for (a, xa) in x.iter().enumerate() {
        let mut ar = Vec::new();
        let mut lr = Vec::new();
        for xs in xa {
            ar.push(lp.add_row(xs.iter().map(|&v| (v, 1.0)).collect(), Sense::Ge, 1.0));
            lr.push(
                (0..nf)
                    .map(|i| {
                        lp.add_row(
                            vec![(y[i], 1.0), (y_scen[a][i], 1.0), (xs[i], -1.0)],
                            Sense::Ge,
                            0.0,
                        )
                    })
                    .collect(),
            );
        }
        assign_rows.push(ar);
        link_rows.push(lr);
    }
    Ok(SuflLp {
        lp,
        y,
        y_scen,
        x,
        assign_rows,
        link_rows,
    })
}

/// The dual program: variables `v[a][pos]` and `w[a][pos][i]`.
#[derive(Debug, Clone)]
pub struct SuflDualLp {
    pub lp: LinearProgram,
    pub v: Vec<Vec<usize>>,
    pub w: Vec<Vec<Vec<usize>>>,
}

pub fn build_sufl_dual(inst: &SuflInstance) -> Result<SuflDualLp> {
    let nf = inst.num_facilities();
    let mut lp = LinearProgram::new(Direction::Maximize);
    let mut v = Vec::new();
    let mut w = Vec::new();
    for (a, sc) in inst.scenarios.iter().enumerate() {
        let mut va = Vec::new();
        let mut wa = Vec::new();
        for &j in &sc.clients {
            let d = inst.clients[j].demand;
            va.push(lp.add_var(format!("v[{a}][{j}]"), sc.prob * d)?);
            wa.push(
                (0..nf)
                    .map(|i| lp.add_var(format!("w[{a}][{j}][{i}]"), 0.0))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        v.push(va);
        w.push(wa);
    }
    for (a, sc) in inst.scenarios.iter().enumerate() {
        for (pos, &j) in sc.clients.iter().enumerate() {
            for i in 0..nf {
                lp.add_row(
                    vec![(v[a][pos], 1.0), (w[a][pos][i], -1.0)],
                    Sense::Le,
                    inst.dist(i, j),
                );
            }
        }
    }
    for i in 0..nf {
        let mut coeffs = Vec::new();
        for (a, sc) in inst.scenarios.iter().enumerate() {
            for (pos, &j) in sc.clients.iter().enumerate() {
                coeffs.push((w[a][pos][i], sc.prob * inst.clients[j].demand));
            }
        }
        lp.add_row(coeffs, Sense::Le, inst.facilities[i].opening_first);
        for (a, sc) in inst.scenarios.iter().enumerate() {
            let coeffs = sc
                .clients
                .iter()
                .enumerate()
                .map(|(pos, &j)| (w[a][pos][i], inst.clients[j].demand))
                .collect();
            lp.add_row(coeffs, Sense::Le, inst.facilities[i].opening_second[a]);
        }
    }
    Ok(SuflDualLp { lp, v, w })
}

/// Fractional openings and assignments. `x[a][pos][i]` is the extent to
/// which the `pos`-th client of scenario `a` is served by facility `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalSolution {
    pub y: Vec<f64>,
    #[serde(rename = "yA")]
    pub y_scen: Vec<Vec<f64>>,
    pub x: Vec<Vec<Vec<f64>>>,
}

impl FractionalSolution {
    pub fn first_stage_cost(&self, inst: &SuflInstance) -> f64 {
        self.y
            .iter()
            .zip(&inst.facilities)
            .map(|(y, f)| y * f.opening_first)
            .sum()
    }

    pub fn second_stage_cost(&self, inst: &SuflInstance, a: usize) -> f64 {
        self.y_scen[a]
            .iter()
            .zip(&inst.facilities)
            .map(|(y, f)| y * f.opening_second[a])
            .sum()
    }

    /// `F_A`: stage-I plus scenario-`a` opening cost.
    pub fn facility_cost(&self, inst: &SuflInstance, a: usize) -> f64 {
        self.first_stage_cost(inst) + self.second_stage_cost(inst, a)
    }

    /// `C_(j,A)`: fractional connection distance of one client (unweighted).
    pub fn pair_connection(&self, inst: &SuflInstance, a: usize, pos: usize) -> f64 {
        let j = inst.scenarios[a].clients[pos];
        self.x[a][pos]
            .iter()
            .enumerate()
            .map(|(i, x)| x * inst.dist(i, j))
            .sum()
    }

    /// `C_A`: demand-weighted connection cost of scenario `a`.
    pub fn connection_cost(&self, inst: &SuflInstance, a: usize) -> f64 {
        inst.scenarios[a]
            .clients
            .iter()
            .enumerate()
            .map(|(pos, &j)| inst.clients[j].demand * self.pair_connection(inst, a, pos))
            .sum()
    }

    /// `Val_A = F_A + C_A`.
    pub fn value(&self, inst: &SuflInstance, a: usize) -> f64 {
        self.facility_cost(inst, a) + self.connection_cost(inst, a)
    }

    /// `F*`
    pub fn expected_facility_cost(&self, inst: &SuflInstance) -> f64 {
        self.first_stage_cost(inst)
            + inst
                .scenarios
                .iter()
                .enumerate()
                .map(|(a, s)| s.prob * self.second_stage_cost(inst, a))
                .sum::<f64>()
    }

    /// `C*`
    pub fn expected_connection_cost(&self, inst: &SuflInstance) -> f64 {
        inst.scenarios
            .iter()
            .enumerate()
            .map(|(a, s)| s.prob * self.connection_cost(inst, a))
            .sum()
    }

    pub fn objective(&self, inst: &SuflInstance) -> f64 {
        self.expected_facility_cost(inst) + self.expected_connection_cost(inst)
    }

    pub fn assignment_total(&self, a: usize, pos: usize) -> f64 {
        self.x[a][pos].iter().sum()
    }

    /// Largest violation of the assignment, linking and sign constraints.
    pub fn max_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for v in self.y.iter().chain(self.y_scen.iter().flatten()) {
            worst = worst.max(-v);
        }
        for (a, xa) in self.x.iter().enumerate() {
            for xs in xa {
                worst = worst.max(1.0 - xs.iter().sum::<f64>());
                for (i, &x) in xs.iter().enumerate() {
                    worst = worst.max(-x).max(x - self.y[i] - self.y_scen[a][i]);
                }
            }
        }
        worst
    }

    /// Rescales every assignment so that `sum_i x[a][pos][i] = 1` exactly.
    pub fn tighten(&mut self) {
        for xs in self.x.iter_mut().flatten() {
            let total: f64 = xs.iter().sum();
            if total > 0.0 {
                for x in xs.iter_mut() {
                    *x /= total;
                }
            }
        }
    }
}

/// Dual values; `v[a][pos]` is the budget of a client in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub v: Vec<Vec<f64>>,
    pub w: Vec<Vec<Vec<f64>>>,
}

impl DualSolution {
    /// `V_A`: demand-weighted dual budget of scenario `a`.
    pub fn budget(&self, inst: &SuflInstance, a: usize) -> f64 {
        inst.scenarios[a]
            .clients
            .iter()
            .zip(&self.v[a])
            .map(|(&j, v)| inst.clients[j].demand * v)
            .sum()
    }

    pub fn objective(&self, inst: &SuflInstance) -> f64 {
        inst.scenarios
            .iter()
            .enumerate()
            .map(|(a, s)| s.prob * self.budget(inst, a))
            .sum()
    }

    pub fn max_violation(&self, inst: &SuflInstance) -> f64 {
        let nf = inst.num_facilities();
        let mut worst = 0.0f64;
        let mut first_load = vec![0.0; nf];
        for (a, sc) in inst.scenarios.iter().enumerate() {
            let mut second_load = vec![0.0; nf];
            for (pos, &j) in sc.clients.iter().enumerate() {
                let d = inst.clients[j].demand;
                worst = worst.max(-self.v[a][pos]);
                for i in 0..nf {
                    let w = self.w[a][pos][i];
                    worst = worst.max(-w).max(self.v[a][pos] - inst.dist(i, j) - w);
                    first_load[i] += sc.prob * d * w;
                    second_load[i] += d * w;
                }
            }
            for i in 0..nf {
                worst = worst.max(second_load[i] - inst.facilities[i].opening_second[a]);
            }
        }
        for i in 0..nf {
            worst = worst.max(first_load[i] - inst.facilities[i].opening_first);
        }
        worst
    }
}

fn clean(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else {
        v
    }
}

/// Solves the (optionally cost-scaled) primal, tightens the assignment
/// constraints to equality, and returns the primal solution together with
/// the dual read from the simplex shadow prices.
pub fn solve_sufl(
    inst: &SuflInstance,
    scale: CostScale,
) -> Result<(FractionalSolution, DualSolution)> {
    let model = build_sufl_primal(inst, scale)?;
    let sol = solve(&model.lp)?;
    let val = |v: usize| clean(sol.x[v]).max(0.0);
    let mut frac = FractionalSolution {
        y: model.y.iter().map(|&v| val(v)).collect(),
        y_scen: model
            .y_scen
            .iter()
            .map(|ys| ys.iter().map(|&v| val(v)).collect())
            .collect(),
        x: model
            .x
            .iter()
            .map(|xa| {
                xa.iter()
                    .map(|xs| xs.iter().map(|&v| val(v)).collect())
                    .collect()
            })
            .collect(),
    };
    frac.tighten();
    let nf = inst.num_facilities();
    let mut v = Vec::new();
    let mut w = Vec::new();
    for (a, sc) in inst.scenarios.iter().enumerate() {
        let mut va = Vec::new();
        let mut wa = Vec::new();
        for (pos, &j) in sc.clients.iter().enumerate() {
            let weight = sc.prob * inst.clients[j].demand;
            if weight > 0.0 {
                // shadow prices are in scaled units; report unscaled-cost duals
                va.push(clean(sol.row_duals[model.assign_rows[a][pos]] / weight).max(0.0));
                wa.push(
                    (0..nf)
                        .map(|i| clean(sol.row_duals[model.link_rows[a][pos][i]] / weight).max(0.0))
                        .collect(),
                );
            } else {
                va.push(0.0);
                wa.push(vec![0.0; nf]);
            }
        }
        v.push(va);
        w.push(wa);
    }
    Ok((frac, DualSolution { v, w }))
}

/// Solves the dual program directly.
pub fn solve_sufl_dual(inst: &SuflInstance) -> Result<DualSolution> {
    let model = build_sufl_dual(inst)?;
    let sol = solve(&model.lp)?;
    Ok(DualSolution {
        v: model
            .v
            .iter()
            .map(|va| va.iter().map(|&k| clean(sol.x[k])).collect())
            .collect(),
        w: model
            .w
            .iter()
            .map(|wa| {
                wa.iter()
                    .map(|ws| ws.iter().map(|&k| clean(sol.x[k])).collect())
                    .collect()
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlacknessViolation {
    pub scenario: usize,
    pub client: usize,
    pub facility: usize,
    pub x: f64,
    pub distance: f64,
    pub budget: f64,
}

/// Lists every `(i, j, A)` with `x > 1e-7` whose distance exceeds the
/// client's dual budget by more than `1e-6`.
pub fn check_complementary_slackness(
    inst: &SuflInstance,
    primal: &FractionalSolution,
    dual: &DualSolution,
) -> Vec<SlacknessViolation> {
    let mut out = Vec::new();
    for (a, sc) in inst.scenarios.iter().enumerate() {
        for (pos, &j) in sc.clients.iter().enumerate() {
            for (i, &x) in primal.x[a][pos].iter().enumerate() {
                let c = inst.dist(i, j);
                if x > 1e-7 && c > dual.v[a][pos] + 1e-6 {
                    out.push(SlacknessViolation {
                        scenario: a,
                        client: j,
                        facility: i,
                        x,
                        distance: c,
                        budget: dual.v[a][pos],
                    });
                }
            }
        }
    }
    out
}

/// Deterministic facility-location relaxation of a weighted subinstance.
#[derive(Debug, Clone)]
pub struct UflLp {
    pub lp: LinearProgram,
    pub y: Vec<usize>,
    /// `x[j][i]`
    pub x: Vec<Vec<usize>>,
}

impl UflLp {
    /// Optimal `(facility cost, connection cost)` of the relaxation.
    pub fn solve_breakdown(&self, sub: &UflSubinstance) -> Result<(f64, f64)> {
        let sol = solve(&self.lp)?;
        let fc = self
            .y
            .iter()
            .enumerate()
            .map(|(i, &v)| sub.opening[i] * sol.x[v])
            .sum();
        let cc = self
            .x
            .iter()
            .enumerate()
            .map(|(j, xs)| {
                xs.iter()
                    .enumerate()
                    .map(|(i, &v)| sub.demand[j] * sub.distance[i][j] * sol.x[v])
                    .sum::<f64>()
            })
            .sum();
        Ok((fc, cc))
    }
}

pub fn build_ufl_lp(sub: &UflSubinstance) -> Result<UflLp> {
    let nf = sub.opening.len();
    let nd = sub.demand.len();
    let mut lp = LinearProgram::new(Direction::Minimize);
    let y = (0..nf)
        .map(|i| lp.add_var(format!("y[{i}]"), sub.opening[i]))
        .collect::<Result<Vec<_>>>()?;
    let mut x = Vec::new();
    for j in 0..nd {
        let xs = (0..nf)
            .map(|i| lp.add_var(format!("x[{j}][{i}]"), sub.demand[j] * sub.distance[i][j]))
            .collect::<Result<Vec<_>>>()?;
        lp.add_row(xs.iter().map(|&v| (v, 1.0)).collect(), Sense::Ge, 1.0);
        for i in 0..nf {
            lp.add_row(vec![(y[i], 1.0), (xs[i], -1.0)], Sense::Ge, 0.0);
        }
        x.push(xs);
    }
    Ok(UflLp { lp, y, x })
}

/// Solution document: `{"objective", "y", "yA", "x", "duals": {"v", "w"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub objective: f64,
    #[serde(flatten)]
    pub primal: FractionalSolution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duals: Option<DualSolution>,
}

impl SolutionDocument {
    /// Checks the document's shape against an instance and the primal
    /// constraints within `1e-7`.
    pub fn validate_for(&self, inst: &SuflInstance) -> Result<()> {
        let nf = inst.num_facilities();
        let p = &self.primal;
        let shape_ok = p.y.len() == nf
            && p.y_scen.len() == inst.num_scenarios()
            && p.y_scen.iter().all(|r| r.len() == nf)
            && p.x.len() == inst.num_scenarios()
            && p.x
                .iter()
                .zip(&inst.scenarios)
                .all(|(xa, sc)| xa.len() == sc.clients.len() && xa.iter().all(|r| r.len() == nf));
        if !shape_ok {
            return Err(Error::validation(
                "solution",
                "shape does not match the instance",
            ));
        }
        if p.max_violation() > 1e-7 {
            return Err(Error::validation(
                "solution",
                format!("primal constraints violated by {}", p.max_violation()),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{dual_budget_example, Client, Facility, Scenario};

    fn tiny() -> SuflInstance {
        SuflInstance {
            facilities: vec![Facility {
                id: "f".into(),
                opening_first: 2.0,
                opening_second: vec![3.0],
                position: None,
            }],
            clients: vec![Client {
                id: "c".into(),
                demand: 1.0,
                position: None,
            }],
            distances: vec![vec![1.5]],
            scenarios: vec![Scenario {
                prob: 1.0,
                clients: vec![0],
            }],
            metric: None,
        }
    }

    #[test]
    fn variable_and_row_counts() {
        let m = build_sufl_primal(&tiny(), CostScale::UNIT).unwrap();
        assert_eq!(m.lp.num_vars(), 3);
        assert_eq!(m.lp.num_rows(), 2);
    }

    #[test]
    fn tiny_optimum() {
        let inst = tiny();
        let (p, d) = solve_sufl(&inst, CostScale::UNIT).unwrap();
        assert!((p.objective(&inst) - 3.5).abs() < 1e-9);
        assert!((d.objective(&inst) - 3.5).abs() < 1e-9);
        assert!(d.max_violation(&inst) < 1e-9);
    }

    #[test]
    fn free_facility_bounds_budget_by_distance() {
        let mut inst = tiny();
        inst.facilities[0].opening_first = 0.0;
        let d = solve_sufl_dual(&inst).unwrap();
        assert!(d.v[0][0] <= 1.5 + 1e-9);
        assert!((d.objective(&inst) - 1.5).abs() < 1e-9);
    }

    #[test]
    fn dual_budget_example_optimum_is_two_plus_epsilon() {
        // Brute force over integral openings: {f1} costs 2 + 1 = 3,
        // {f2} costs 0.01 + (3 + 1) / 2 = 2.01; the relaxation attains 2.01.
        let inst = dual_budget_example(0.01);
        let (p, d) = solve_sufl(&inst, CostScale::UNIT).unwrap();
        assert!((p.objective(&inst) - 2.01).abs() < 1e-9);
        assert!((p.y[1] - 1.0).abs() < 1e-9);
        assert!(p.y[0].abs() < 1e-9);
        assert!((d.objective(&inst) - 2.01).abs() < 1e-9);
        assert!(check_complementary_slackness(&inst, &p, &d).is_empty());
    }

    #[test]
    fn scaled_objective_on_dual_budget_example() {
        // scaled: {f1} -> 2.4061*2 + 1.2707*1, {f2} -> 2.4061*0.01 + 1.2707*2
        let inst = dual_budget_example(0.01);
        let m = build_sufl_primal(&inst, CostScale::BIFACTOR).unwrap();
        let sol = solve(&m.lp).unwrap();
        let open_f2 = 2.4061 * 0.01 + 1.2707 * 2.0;
        assert!((sol.objective - open_f2).abs() < 1e-9);
        assert!(open_f2 < 2.4061 * 2.0 + 1.2707);
    }

    #[test]
    fn halved_dual_breaks_slackness() {
        let inst = dual_budget_example(0.01);
        let (p, mut d) = solve_sufl(&inst, CostScale::UNIT).unwrap();
        for v in d.v.iter_mut().flatten() {
            *v *= 0.5;
        }
        assert!(!check_complementary_slackness(&inst, &p, &d).is_empty());
    }

    #[test]
    fn solution_document_round_trip() {
        let inst = dual_budget_example(0.01);
        let (p, d) = solve_sufl(&inst, CostScale::UNIT).unwrap();
        let doc = SolutionDocument {
            objective: p.objective(&inst),
            primal: p,
            duals: Some(d),
        };
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.contains("\"yA\""));
        let back: SolutionDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
        back.validate_for(&inst).unwrap();
    }
}
