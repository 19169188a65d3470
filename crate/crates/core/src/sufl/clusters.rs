use rand::Rng;

use super::RoundedSolution;
use crate::instances::SuflInstance;
use crate::lp::{SaturatedSupport, Stage};

/// The unit-mass candidate neighborhood chosen for one client of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub scenario: usize,
    pub pos: usize,
    pub client: usize,
    pub stage: Stage,
    /// Set id in the support arena.
    pub set: usize,
    /// Largest distance from the client to the set, the ordering key.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub candidate: usize,
    pub stage: Stage,
}

/// Greedy facility-disjoint clusters over a saturated support.
#[derive(Debug, Clone)]
pub struct ClusterPlan {
    pub support: SaturatedSupport,
    pub candidates: Vec<Candidate>,
    /// `index[a][pos]` is the candidate of that client.
    pub index: Vec<Vec<usize>>,
    pub clusters: Vec<Cluster>,
    /// `(candidate, earliest cluster sharing a piece with it)`
    pub skipped: Vec<(usize, usize)>,
    piece_cluster: Vec<Option<usize>>,
}

/// Processes candidates by nondecreasing radius, ties by (scenario,
/// client); a candidate becomes a cluster unless it shares a piece with an
/// earlier cluster.
pub fn build_clusters(support: SaturatedSupport, candidates: Vec<Candidate>) -> ClusterPlan {
    let num_scenarios = candidates.iter().map(|c| c.scenario + 1).max().unwrap_or(0);
    let mut index = vec![Vec::new(); num_scenarios];
    for (k, c) in candidates.iter().enumerate() {
        let row = &mut index[c.scenario];
        if row.len() <= c.pos {
            row.resize(c.pos + 1, usize::MAX);
        }
        row[c.pos] = k;
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&p, &q| {
        let (a, b) = (&candidates[p], &candidates[q]);
        a.radius
            .total_cmp(&b.radius)
            .then(a.scenario.cmp(&b.scenario))
            .then(a.client.cmp(&b.client))
    });
    let mut piece_cluster = vec![None; support.pieces.len()];
    let mut clusters = Vec::new();
    let mut skipped = Vec::new();
    for k in order {
        let set = support.set(candidates[k].set);
        let blocking = set.iter().filter_map(|&p| piece_cluster[p]).min();
        match blocking {
            Some(c) => skipped.push((k, c)),
            None => {
                let id = clusters.len();
                for &p in set {
                    piece_cluster[p] = Some(id);
                }
                clusters.push(Cluster {
                    candidate: k,
                    stage: candidates[k].stage,
                });
            }
        }
    }
    ClusterPlan {
        support,
        candidates,
        index,
        clusters,
        skipped,
        piece_cluster,
    }
}

impl ClusterPlan {
    pub fn cluster_of(&self, piece: usize) -> Option<usize> {
        self.piece_cluster[piece]
    }

    pub fn candidate(&self, a: usize, pos: usize) -> &Candidate {
        &self.candidates[self.index[a][pos]]
    }

    /// Opens pieces of one stage: one per cluster, drawn with probability
    /// proportional to opening, then every unclustered piece independently.
    /// Pushes piece ids.
    fn open_stage<R: Rng + ?Sized>(&self, stage: Stage, rng: &mut R, out: &mut Vec<usize>) {
        for cluster in self.clusters.iter().filter(|c| c.stage == stage) {
            let set = self.support.set(self.candidates[cluster.candidate].set);
            let total: f64 = set.iter().map(|&p| self.support.pieces[p].opening).sum();
            let mut u = rng.random::<f64>() * total;
            let mut chosen = *set.last().expect("clusters are nonempty");
            for &p in set {
                u -= self.support.pieces[p].opening;
                if u < 0.0 {
                    chosen = p;
                    break;
                }
            }
            out.push(chosen);
        }
        for p in self.support.stage_pieces(stage) {
            if self.piece_cluster[p].is_none() {
                let o = self.support.pieces[p].opening.min(1.0);
                if rng.random::<f64>() < o {
                    out.push(p);
                }
            }
        }
    }

    /// Opened piece ids: stage I, then one list per scenario.
    pub fn sample_pieces<R: Rng + ?Sized>(
        &self,
        num_scenarios: usize,
        rng: &mut R,
    ) -> (Vec<usize>, Vec<Vec<usize>>) {
        let mut first = Vec::new();
        self.open_stage(Stage::First, rng, &mut first);
        let second = (0..num_scenarios)
            .map(|a| {
                let mut opened = Vec::new();
                self.open_stage(Stage::Second(a), rng, &mut opened);
                opened
            })
            .collect();
        (first, second)
    }

    /// One draw of the rounding: the stage-I openings are shared by all
    /// scenarios, and each client connects to the closest open facility.
    pub fn sample<R: Rng + ?Sized>(&self, inst: &SuflInstance, rng: &mut R) -> RoundedSolution {
        let (first, second) = self.sample_pieces(inst.num_scenarios(), rng);
        let origin = |ps: Vec<usize>| -> Vec<usize> {
            ps.into_iter()
                .map(|p| self.support.pieces[p].origin)
                .collect()
        };
        let first_stage = origin(first);
        let second_stage: Vec<Vec<usize>> = second.into_iter().map(origin).collect();
        let assignment = (0..inst.num_scenarios())
            .map(|a| connect_closest(inst, a, &first_stage, &second_stage[a]))
            .collect();
        RoundedSolution {
            first_stage,
            second_stage,
            assignment,
        }
    }
}

/// Closest facility among both lists for every client of scenario `a`,
/// ties to the lower facility index. Clients with no open facility get
/// `usize::MAX`.
pub fn connect_closest(
    inst: &SuflInstance,
    a: usize,
    first: &[usize],
    second: &[usize],
) -> Vec<usize> {
    inst.scenarios[a]
        .clients
        .iter()
        .map(|&j| {
            first
                .iter()
                .chain(second)
                .copied()
                .min_by(|&p, &q| inst.dist(p, j).total_cmp(&inst.dist(q, j)).then(p.cmp(&q)))
                .unwrap_or(usize::MAX)
        })
        .collect()
}
