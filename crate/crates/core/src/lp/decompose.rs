//! Stage decomposition of fractional assignments and the facility splitting
//! that lets candidate neighborhoods carry opening mass exactly 1.

use super::FractionalSolution;
use crate::error::{Error, Result};
use crate::instances::{Facility, SuflInstance};

const SPLIT_TOL: f64 = 1e-12;

/// `x = x1 + x2` with `x1 <= y` and `x2 <= y_A`, plus the row totals.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedSolution {
    pub x1: Vec<Vec<Vec<f64>>>,
    pub x2: Vec<Vec<Vec<f64>>>,
    pub r1: Vec<Vec<f64>>,
    pub r2: Vec<Vec<f64>>,
}

/// Splits every assignment proportionally to the stage-I and stage-II
/// openings of its facility.
pub fn decompose(sol: &FractionalSolution) -> Result<DecomposedSolution> {
    let mut x1 = Vec::with_capacity(sol.x.len());
    let mut x2 = Vec::with_capacity(sol.x.len());
    for (a, xa) in sol.x.iter().enumerate() {
        let mut xa1 = Vec::with_capacity(xa.len());
        let mut xa2 = Vec::with_capacity(xa.len());
        for (pos, xs) in xa.iter().enumerate() {
            let mut r1 = Vec::with_capacity(xs.len());
            let mut r2 = Vec::with_capacity(xs.len());
            for (i, &x) in xs.iter().enumerate() {
                let y = sol.y[i];
                let ya = sol.y_scen[a][i];
                if x <= 0.0 {
                    r1.push(0.0);
                    r2.push(0.0);
                } else if y + ya <= 0.0 {
                    return Err(Error::validation(
                        format!("x[{a}][{pos}][{i}]"),
                        "positive assignment to a facility with zero opening",
                    ));
                } else {
                    let first = x * y / (y + ya);
                    r1.push(first);
                    r2.push(x - first);
                }
            }
            xa1.push(r1);
            xa2.push(r2);
        }
        x1.push(xa1);
        x2.push(xa2);
    }
    let totals = |x: &Vec<Vec<Vec<f64>>>| -> Vec<Vec<f64>> {
        x.iter()
            .map(|xa| xa.iter().map(|xs| xs.iter().sum()).collect())
            .collect()
    };
    let r1 = totals(&x1);
    let r2 = totals(&x2);
    Ok(DecomposedSolution { x1, x2, r1, r2 })
}

/// `origin[k]` is the facility of the input instance that copy `k` came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CopyTable {
    pub origin: Vec<usize>,
}

/// Replaces every facility opened in both stages by a stage-I copy and a
/// stage-II copy, so that no facility carries both kinds of opening.
pub fn split_stage_copies(
    inst: &SuflInstance,
    sol: &FractionalSolution,
) -> Result<(SuflInstance, FractionalSolution, CopyTable)> {
    let dec = decompose(sol)?;
    let nf = inst.num_facilities();
    let mut origin = Vec::new();
    // (original, keeps stage I, keeps stage II)
    let mut plan = Vec::new();
    for i in 0..nf {
        let both = sol.y[i] > 0.0 && sol.y_scen.iter().any(|ys| ys[i] > 0.0);
        if both {
            plan.push((i, true, false));
            plan.push((i, false, true));
        } else {
            plan.push((i, true, true));
        }
    }
    let mut facilities: Vec<Facility> = Vec::new();
    let mut distances = Vec::new();
    for &(i, first, second) in &plan {
        let mut f = inst.facilities[i].clone();
        if !(first && second) {
            f.id = format!("{}#{}", f.id, if first { "I" } else { "II" });
        }
        facilities.push(f);
        distances.push(inst.distances[i].clone());
        origin.push(i);
    }
    let metric = inst.metric.as_ref().map(|m| {
        let index = |k: usize| {
            if k < origin.len() {
                origin[k]
            } else {
                k - origin.len() + nf
            }
        };
        let n = origin.len() + inst.num_clients();
        (0..n)
            .map(|p| (0..n).map(|q| m[index(p)][index(q)]).collect())
            .collect()
    });
    let y = plan
        .iter()
        .map(|&(i, first, _)| if first { sol.y[i] } else { 0.0 })
        .collect();
    let y_scen = sol
        .y_scen
        .iter()
        .map(|ys| {
            plan.iter()
                .map(|&(i, _, second)| if second { ys[i] } else { 0.0 })
                .collect()
        })
        .collect();
    let x = (0..sol.x.len())
        .map(|a| {
            (0..sol.x[a].len())
                .map(|pos| {
                    plan.iter()
                        .map(|&(i, first, second)| match (first, second) {
                            (true, true) => sol.x[a][pos][i],
                            (true, false) => dec.x1[a][pos][i],
                            _ => dec.x2[a][pos][i],
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let split = SuflInstance {
        facilities,
        clients: inst.clients.clone(),
        distances,
        scenarios: inst.scenarios.clone(),
        metric,
    };
    Ok((
        split,
        FractionalSolution { y, y_scen, x },
        CopyTable { origin },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    First,
    Second(usize),
}

/// A piece of a scaled facility opening. Every client that uses a piece
/// uses all of it, so its scaled assignment equals the piece's opening.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub origin: usize,
    pub stage: Stage,
    pub opening: f64,
}

/// Scaled, split support of a fractional solution.
///
/// Sets of pieces live in an arena; whenever a piece is split in two, the
/// new half joins every set that held the old piece, so all recorded sets
/// keep their mass.
#[derive(Debug, Clone)]
pub struct SaturatedSupport {
    pub scale: f64,
    pub pieces: Vec<Piece>,
    sets: Vec<Vec<usize>>,
    members: Vec<Vec<usize>>,
    /// `serving[a][pos] = (stage-I set, stage-II set)`
    serving: Vec<Vec<(usize, usize)>>,
}

/// Scales openings and assignments by `gamma` and cuts every facility into
/// pieces of opening at most 1 such that each client's scaled assignment to
/// a facility is a union of whole pieces. Cut points are the distinct
/// assignment values, in increasing order.
pub fn split_to_saturation(
    inst: &SuflInstance,
    sol: &FractionalSolution,
    dec: &DecomposedSolution,
    gamma: f64,
) -> Result<SaturatedSupport> {
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "scale {gamma} must be at least 1"
        )));
    }
    let mut sup = SaturatedSupport {
        scale: gamma,
        pieces: Vec::new(),
        sets: Vec::new(),
        members: Vec::new(),
        serving: Vec::new(),
    };
    let nf = inst.num_facilities();
    let mut first_sets = Vec::new();
    let mut second_sets = Vec::new();
    for sc in &inst.scenarios {
        first_sets.push(
            (0..sc.clients.len())
                .map(|_| sup.new_set())
                .collect::<Vec<_>>(),
        );
        second_sets.push(
            (0..sc.clients.len())
                .map(|_| sup.new_set())
                .collect::<Vec<_>>(),
        );
    }
    // stage I: one pass per facility over every (scenario, client)
    for i in 0..nf {
        let total = gamma * sol.y[i];
        let mut users = Vec::new();
        for (a, sc) in inst.scenarios.iter().enumerate() {
            for pos in 0..sc.clients.len() {
                let v = (gamma * dec.x1[a][pos][i]).min(total);
                if v > SPLIT_TOL {
                    users.push((v, first_sets[a][pos]));
                }
            }
        }
        sup.cut_facility(i, Stage::First, total, users);
    }
    for (a, sc) in inst.scenarios.iter().enumerate() {
        for i in 0..nf {
            let total = gamma * sol.y_scen[a][i];
            let users = (0..sc.clients.len())
                .filter_map(|pos| {
                    let v = (gamma * dec.x2[a][pos][i]).min(total);
                    (v > SPLIT_TOL).then_some((v, second_sets[a][pos]))
                })
                .collect();
            sup.cut_facility(i, Stage::Second(a), total, users);
        }
    }
    sup.serving = first_sets
        .into_iter()
        .zip(second_sets)
        .map(|(f, s)| f.into_iter().zip(s).collect())
        .collect();
    Ok(sup)
}

impl SaturatedSupport {
    fn new_set(&mut self) -> usize {
        self.sets.push(Vec::new());
        self.sets.len() - 1
    }

    fn push_piece(&mut self, piece: Piece) -> usize {
        self.pieces.push(piece);
        self.members.push(Vec::new());
        self.pieces.len() - 1
    }

    fn add_to_set(&mut self, set: usize, piece: usize) {
        self.sets[set].push(piece);
        self.members[piece].push(set);
    }

    fn cut_facility(
        &mut self,
        origin: usize,
        stage: Stage,
        total: f64,
        mut users: Vec<(f64, usize)>,
    ) {
        if total <= SPLIT_TOL {
            return;
        }
        users.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
        let mut cuts: Vec<f64> = Vec::new();
        for &(v, _) in &users {
            if cuts.last().is_none_or(|&c| v > c + SPLIT_TOL) {
                cuts.push(v);
            }
        }
        if cuts.last().is_none_or(|&c| total > c + SPLIT_TOL) {
            cuts.push(total);
        }
        let mut lo = 0.0;
        for &hi in &cuts {
            let width = hi - lo;
            let parts = width.ceil().max(1.0) as usize;
            let piece_ids: Vec<usize> = (0..parts)
                .map(|k| {
                    let opening = if k + 1 < parts {
                        1.0
                    } else {
                        width - (parts - 1) as f64
                    };
                    self.push_piece(Piece {
                        origin,
                        stage,
                        opening,
                    })
                })
                .collect();
            for &(v, set) in &users {
                if v > lo + SPLIT_TOL {
                    for &p in &piece_ids {
                        self.add_to_set(set, p);
                    }
                }
            }
            lo = hi;
        }
    }

    /// Splits piece `p` so that it keeps opening `keep`; the remainder
    /// becomes a new piece in every set that contained `p`.
    fn split_piece(&mut self, p: usize, keep: f64) -> usize {
        let rest = self.pieces[p].opening - keep;
        self.pieces[p].opening = keep;
        let q = self.push_piece(Piece {
            opening: rest,
            ..self.pieces[p].clone()
        });
        for s in self.members[p].clone() {
            self.add_to_set(s, q);
        }
        q
    }

    pub fn set(&self, id: usize) -> &[usize] {
        &self.sets[id]
    }

    pub fn mass(&self, id: usize) -> f64 {
        self.sets[id].iter().map(|&p| self.pieces[p].opening).sum()
    }

    /// Set of pieces serving the `pos`-th client of scenario `a` in a stage.
    pub fn serving(&self, a: usize, pos: usize, first: bool) -> usize {
        let (f, s) = self.serving[a][pos];
        if first {
            f
        } else {
            s
        }
    }

    /// Largest distance from `client` to a piece of the set.
    pub fn radius(&self, inst: &SuflInstance, id: usize, client: usize) -> f64 {
        self.sets[id]
            .iter()
            .map(|&p| inst.dist(self.pieces[p].origin, client))
            .fold(0.0, f64::max)
    }

    /// Carves the closest prefix of the serving set with mass exactly 1,
    /// ordering pieces by (distance, piece index) and splitting the boundary
    /// piece. Returns `None` when the serving mass is below 1.
    pub fn carve_prefix(
        &mut self,
        inst: &SuflInstance,
        a: usize,
        pos: usize,
        first: bool,
    ) -> Option<usize> {
        let client = inst.scenarios[a].clients[pos];
        let from = self.serving(a, pos, first);
        if self.mass(from) < 1.0 - 1e-9 {
            return None;
        }
        let mut order = self.sets[from].clone();
        order.sort_by(|&p, &q| {
            inst.dist(self.pieces[p].origin, client)
                .total_cmp(&inst.dist(self.pieces[q].origin, client))
                .then(p.cmp(&q))
        });
        let out = self.new_set();
        let mut mass = 0.0;
        for p in order {
            let o = self.pieces[p].opening;
            if mass + o > 1.0 + 1e-12 {
                self.split_piece(p, 1.0 - mass);
                mass = 1.0;
            } else {
                mass += o;
            }
            self.add_to_set(out, p);
            if mass >= 1.0 - 1e-12 {
                break;
            }
        }
        Some(out)
    }

    /// Sum of piece openings per (facility, stage).
    pub fn opening_totals(
        &self,
        num_facilities: usize,
        num_scenarios: usize,
    ) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut first = vec![0.0; num_facilities];
        let mut second = vec![vec![0.0; num_facilities]; num_scenarios];
        for p in &self.pieces {
            match p.stage {
                Stage::First => first[p.origin] += p.opening,
                Stage::Second(a) => second[a][p.origin] += p.opening,
            }
        }
        (first, second)
    }

    /// Pieces belonging to one stage, in index order.
    pub fn stage_pieces(&self, stage: Stage) -> Vec<usize> {
        (0..self.pieces.len())
            .filter(|&p| self.pieces[p].stage == stage)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{Client, Scenario};

    /// One facility, one scenario, clients all at distance 1.
    fn one_facility(y: f64, ya: f64, xs: &[f64]) -> (SuflInstance, FractionalSolution) {
        let inst = SuflInstance {
            facilities: vec![Facility {
                id: "f".into(),
                opening_first: 1.0,
                opening_second: vec![2.0],
                position: None,
            }],
            clients: (0..xs.len())
                .map(|j| Client {
                    id: format!("c{j}"),
                    demand: 1.0,
                    position: None,
                })
                .collect(),
            distances: vec![vec![1.0; xs.len()]],
            scenarios: vec![Scenario {
                prob: 1.0,
                clients: (0..xs.len()).collect(),
            }],
            metric: None,
        };
        let sol = FractionalSolution {
            y: vec![y],
            y_scen: vec![vec![ya]],
            x: vec![xs.iter().map(|&x| vec![x]).collect()],
        };
        (inst, sol)
    }

    #[test]
    fn symmetric_split() {
        let (_, sol) = one_facility(0.5, 0.5, &[0.6]);
        let d = decompose(&sol).unwrap();
        assert!((d.x1[0][0][0] - 0.3).abs() < 1e-12);
        assert!((d.x2[0][0][0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn proportional_split() {
        let (_, sol) = one_facility(0.2, 0.6, &[0.4]);
        let d = decompose(&sol).unwrap();
        assert!((d.x1[0][0][0] - 0.1).abs() < 1e-12);
        assert!((d.x2[0][0][0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn zero_assignment_splits_to_zero() {
        let (_, sol) = one_facility(0.0, 0.0, &[0.0]);
        let d = decompose(&sol).unwrap();
        assert_eq!((d.x1[0][0][0], d.x2[0][0][0]), (0.0, 0.0));
    }

    #[test]
    fn assignment_without_opening_rejected() {
        let (_, sol) = one_facility(0.0, 0.0, &[0.5]);
        assert!(decompose(&sol).is_err());
    }

    #[test]
    fn stage_copies_separate_openings() {
        let (inst, sol) = one_facility(0.3, 0.2, &[0.5]);
        let (split, s2, table) = split_stage_copies(&inst, &sol).unwrap();
        assert_eq!(table.origin, vec![0, 0]);
        assert_eq!(s2.y, vec![0.3, 0.0]);
        assert_eq!(s2.y_scen[0], vec![0.0, 0.2]);
        assert!((sol.objective(&inst) - s2.objective(&split)).abs() < 1e-12);
        assert_eq!(split.facilities[0].id, "f#I");
    }

    #[test]
    fn separated_solution_is_identity() {
        let (inst, sol) = one_facility(0.0, 1.0, &[1.0]);
        let (split, s2, _) = split_stage_copies(&inst, &sol).unwrap();
        assert_eq!(split, inst);
        assert_eq!(s2, sol);
    }

    #[test]
    fn unit_cap() {
        let (inst, sol) = one_facility(0.8, 0.0, &[0.8]);
        let d = decompose(&sol).unwrap();
        let sup = split_to_saturation(&inst, &sol, &d, 2.0).unwrap();
        let openings: Vec<f64> = sup.pieces.iter().map(|p| p.opening).collect();
        assert_eq!(openings.len(), 2);
        assert!((openings[0] - 1.0).abs() < 1e-12 && (openings[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn unequal_users_cut_at_smaller_value_first() {
        let (inst, sol) = one_facility(0.9, 0.0, &[0.3, 0.9]);
        let d = decompose(&sol).unwrap();
        let sup = split_to_saturation(&inst, &sol, &d, 1.0).unwrap();
        assert!((sup.pieces[0].opening - 0.3).abs() < 1e-12);
        for pos in 0..2 {
            let s = sup.serving(0, pos, true);
            assert!((sup.mass(s) - sol.x[0][pos][0]).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_input_is_identity() {
        let (inst, sol) = one_facility(1.0, 0.0, &[1.0]);
        let d = decompose(&sol).unwrap();
        let sup = split_to_saturation(&inst, &sol, &d, 1.0).unwrap();
        assert_eq!(sup.pieces.len(), 1);
        assert_eq!(sup.pieces[0].opening, 1.0);
    }

    #[test]
    fn carving_keeps_other_sets_whole() {
        let (inst, sol) = one_facility(0.9, 0.0, &[0.9, 0.9]);
        let d = decompose(&sol).unwrap();
        let mut sup = split_to_saturation(&inst, &sol, &d, 2.0).unwrap();
        let c = sup.carve_prefix(&inst, 0, 0, true).unwrap();
        assert!((sup.mass(c) - 1.0).abs() < 1e-12);
        for pos in 0..2 {
            assert!((sup.mass(sup.serving(0, pos, true)) - 1.8).abs() < 1e-12);
        }
        let (first, _) = sup.opening_totals(1, 1);
        assert!((first[0] - 1.8).abs() < 1e-12);
    }

    #[test]
    fn carving_needs_unit_mass() {
        let (inst, sol) = one_facility(0.4, 0.6, &[1.0]);
        let d = decompose(&sol).unwrap();
        let mut sup = split_to_saturation(&inst, &sol, &d, 2.0).unwrap();
        assert!(sup.carve_prefix(&inst, 0, 0, true).is_none());
        assert!(sup.carve_prefix(&inst, 0, 0, false).is_some());
    }
}
