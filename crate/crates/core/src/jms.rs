//! Greedy bifactor algorithm for uncapacitated facility location with
//! weighted demands (Jain, Mahdian and Saberi).
//!
//! Time runs continuously. An unconnected client offers
//! `d_j * max(t - c_ij, 0)` to every closed facility; a connected client
//! offers `d_j * max(c_phi(j)j - c_ij, 0)`, the saving from switching. A
//! facility opens once its offers reach its cost, and every client that
//! gains from it moves there. Unconnected clients also connect to an open
//! facility as soon as `t` reaches the distance.

use crate::error::{Error, Result};

const TIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct UflSubinstance {
    pub opening: Vec<f64>,
    pub demand: Vec<f64>,
    /// `distance[i][j]`
    pub distance: Vec<Vec<f64>>,
}

impl UflSubinstance {
    pub fn num_facilities(&self) -> usize {
        self.opening.len()
    }

    pub fn num_clients(&self) -> usize {
        self.demand.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.opening.is_empty() {
            return Err(Error::validation(
                "opening",
                "at least one facility is required",
            ));
        }
        if let Some(f) = self.opening.iter().find(|f| !(f.is_finite() && **f >= 0.0)) {
            return Err(Error::validation("opening", format!("invalid cost {f}")));
        }
        if let Some(d) = self.demand.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::validation(
                "demand",
                format!("demands must be positive, got {d}"),
            ));
        }
        if self.distance.len() != self.opening.len()
            || self.distance.iter().any(|r| r.len() != self.demand.len())
        {
            return Err(Error::validation("distance", "matrix shape does not match"));
        }
        if self
            .distance
            .iter()
            .flatten()
            .any(|c| !(c.is_finite() && *c >= 0.0))
        {
            return Err(Error::validation(
                "distance",
                "distances must be finite and nonnegative",
            ));
        }
        Ok(())
    }

    /// Cost of opening `open` and serving each client at its closest member.
    pub fn cost_of(&self, open: &[usize]) -> (f64, f64) {
        let fc = open.iter().map(|&i| self.opening[i]).sum();
        let cc = (0..self.num_clients())
            .map(|j| {
                self.demand[j]
                    * open
                        .iter()
                        .map(|&i| self.distance[i][j])
                        .fold(f64::INFINITY, f64::min)
            })
            .sum();
        (fc, cc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UflSolution {
    /// Opened facilities in opening order.
    pub open: Vec<usize>,
    pub assignment: Vec<usize>,
    pub facility_cost: f64,
    pub connection_cost: f64,
}

impl UflSolution {
    pub fn cost(&self) -> f64 {
        self.facility_cost + self.connection_cost
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Open {
        time: f64,
        facility: usize,
    },
    Connect {
        time: f64,
        facility: usize,
        client: usize,
    },
}

impl Event {
    pub fn time(&self) -> f64 {
        match *self {
            Event::Open { time, .. } | Event::Connect { time, .. } => time,
        }
    }

    /// `(facility, client)` with opening ordered before any client.
    fn tie_key(&self) -> (usize, Option<usize>) {
        match *self {
            Event::Open { facility, .. } => (facility, None),
            Event::Connect {
                facility, client, ..
            } => (facility, Some(client)),
        }
    }
}

/// State of the greedy run.
#[derive(Debug, Clone)]
pub struct GreedyState<'a> {
    sub: &'a UflSubinstance,
    pub time: f64,
    pub is_open: Vec<bool>,
    pub open_order: Vec<usize>,
    /// `Some(i)` once the client is connected to facility `i`.
    pub connected: Vec<Option<usize>>,
}

impl<'a> GreedyState<'a> {
    pub fn new(sub: &'a UflSubinstance) -> Self {
        GreedyState {
            sub,
            time: 0.0,
            is_open: vec![false; sub.num_facilities()],
            open_order: Vec::new(),
            connected: vec![None; sub.num_clients()],
        }
    }

    pub fn done(&self) -> bool {
        self.connected.iter().all(Option::is_some)
    }

    /// Offers to closed facility `i` from connected clients (time-invariant).
    fn frozen_offer(&self, i: usize) -> f64 {
        let c = &self.sub.distance;
        self.connected
            .iter()
            .enumerate()
            .filter_map(|(j, phi)| phi.map(|p| self.sub.demand[j] * (c[p][j] - c[i][j]).max(0.0)))
            .sum()
    }

    /// Total offer to closed facility `i` at time `t`.
    pub fn offer(&self, i: usize, t: f64) -> f64 {
        let c = &self.sub.distance;
        self.frozen_offer(i)
            + (0..self.sub.num_clients())
                .filter(|&j| self.connected[j].is_none())
                .map(|j| self.sub.demand[j] * (t - c[i][j]).max(0.0))
                .sum::<f64>()
    }

    /// Earliest time at which the offers to closed facility `i` reach its
    /// cost, solved segment by segment in closed form.
    fn opening_time(&self, i: usize) -> f64 {
        let f = self.sub.opening[i];
        let frozen = self.frozen_offer(i);
        if self.offer(i, self.time) >= f - TIME_TOL * (1.0 + f) {
            return self.time;
        }
        let c = &self.sub.distance[i];
        let mut open: Vec<usize> = (0..self.sub.num_clients())
            .filter(|&j| self.connected[j].is_none())
            .collect();
        open.sort_by(|&p, &q| c[p].total_cmp(&c[q]).then(p.cmp(&q)));
        let mut weight = 0.0;
        let mut weighted = 0.0;
        for (k, &j) in open.iter().enumerate() {
            weight += self.sub.demand[j];
            weighted += self.sub.demand[j] * c[j];
            let t = (f - frozen + weighted) / weight;
            if k + 1 == open.len() || t <= c[open[k + 1]] {
                return t.max(self.time);
            }
        }
        f64::INFINITY
    }

    /// The next event, ties broken by (time, facility, client) with an
    /// opening ordered before connections to the same facility.
    pub fn next_event(&self) -> Option<Event> {
        if self.done() {
            return None;
        }
        let mut events = Vec::new();
        for i in 0..self.sub.num_facilities() {
            if self.is_open[i] {
                for j in 0..self.sub.num_clients() {
                    if self.connected[j].is_none() {
                        events.push(Event::Connect {
                            time: self.sub.distance[i][j].max(self.time),
                            facility: i,
                            client: j,
                        });
                    }
                }
            } else {
                events.push(Event::Open {
                    time: self.opening_time(i),
                    facility: i,
                });
            }
        }
        let earliest = events.iter().map(Event::time).fold(f64::INFINITY, f64::min);
        events
            .into_iter()
            .filter(|e| e.time() <= earliest + TIME_TOL * (1.0 + earliest))
            .min_by_key(Event::tie_key)
    }

    pub fn apply(&mut self, event: Event) {
        self.time = self.time.max(event.time());
        match event {
            Event::Connect {
                facility, client, ..
            } => self.connected[client] = Some(facility),
            Event::Open { facility: i, .. } => {
                self.is_open[i] = true;
                self.open_order.push(i);
                let c = &self.sub.distance;
                for j in 0..self.sub.num_clients() {
                    match self.connected[j] {
                        None if c[i][j] <= self.time + TIME_TOL * (1.0 + self.time) => {
                            self.connected[j] = Some(i)
                        }
                        Some(p) if c[i][j] < c[p][j] => self.connected[j] = Some(i),
                        _ => {}
                    }
                }
            }
        }
    }
}

pub fn jms_solve(sub: &UflSubinstance) -> Result<UflSolution> {
    sub.validate()?;
    let mut state = GreedyState::new(sub);
    while let Some(event) = state.next_event() {
        if !event.time().is_finite() {
            return Err(Error::Internal("greedy produced no finite event".into()));
        }
        state.apply(event);
    }
    let assignment: Vec<usize> = state
        .connected
        .iter()
        .map(|c| c.expect("all connected"))
        .collect();
    let facility_cost = state.open_order.iter().map(|&i| sub.opening[i]).sum();
    let connection_cost = assignment
        .iter()
        .enumerate()
        .map(|(j, &i)| sub.demand[j] * sub.distance[i][j])
        .sum();
    Ok(UflSolution {
        open: state.open_order,
        assignment,
        facility_cost,
        connection_cost,
    })
}
