use std::fmt;

use super::{SuflInstance, METRIC_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Point {
    Facility(usize),
    Client(usize),
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Facility(i) => write!(f, "F{i}"),
            Point::Client(j) => write!(f, "C{j}"),
        }
    }
}

/// A pair of points whose direct distance exceeds a detour through `via`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricViolation {
    pub from: Point,
    pub to: Point,
    pub via: Vec<Point>,
    pub direct: f64,
    pub detour: f64,
}

impl fmt::Display for MetricViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "d({}, {}) = {} > {} via",
            self.from, self.to, self.direct, self.detour
        )?;
        for p in &self.via {
            write!(f, " {p}")?;
        }
        Ok(())
    }
}

fn exceeds(direct: f64, detour: f64) -> bool {
    direct > detour + METRIC_TOL * (1.0 + direct.abs())
}

/// Exhaustive triangle-inequality check.
///
/// With a full `metric` matrix every ordered triple is checked once per
/// unordered endpoint pair. Without one only facility-client distances are
/// known, and the check is the bipartite form
/// `c(i,j) <= c(i,j') + c(i',j') + c(i',j)`.
pub fn validate_metric(instance: &SuflInstance) -> Vec<MetricViolation> {
    let nf = instance.num_facilities();
    let nd = instance.num_clients();
    let point = |k: usize| {
        if k < nf {
            Point::Facility(k)
        } else {
            Point::Client(k - nf)
        }
    };
    let mut out = Vec::new();
    if let Some(metric) = &instance.metric {
        let n = metric.len();
        for a in 0..n {
            for c in (a + 1)..n {
                for b in 0..n {
                    if b == a || b == c {
                        continue;
                    }
                    let detour = metric[a][b] + metric[b][c];
                    if exceeds(metric[a][c], detour) {
                        out.push(MetricViolation {
                            from: point(a),
                            to: point(c),
                            via: vec![point(b)],
                            direct: metric[a][c],
                            detour,
                        });
                    }
                }
            }
        }
        return out;
    }
    let d = &instance.distances;
    for i in 0..nf {
        for j in 0..nd {
            for i2 in 0..nf {
                if i2 == i {
                    continue;
                }
                for j2 in 0..nd {
                    if j2 == j {
                        continue;
                    }
                    let detour = d[i][j2] + d[i2][j2] + d[i2][j];
                    if exceeds(d[i][j], detour) {
                        out.push(MetricViolation {
                            from: Point::Facility(i),
                            to: Point::Client(j),
                            via: vec![Point::Client(j2), Point::Facility(i2)],
                            direct: d[i][j],
                            detour,
                        });
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{dual_budget_example, Client, Facility, Scenario};

    fn three_points(ab: f64, bc: f64, ac: f64) -> SuflInstance {
        // a = facility 0, b = client 0, c = client 1
        let metric = vec![vec![0.0, ab, ac], vec![ab, 0.0, bc], vec![ac, bc, 0.0]];
        SuflInstance {
            facilities: vec![Facility {
                id: "a".into(),
                opening_first: 1.0,
                opening_second: vec![1.0],
                position: None,
            }],
            clients: vec![
                Client {
                    id: "b".into(),
                    demand: 1.0,
                    position: None,
                },
                Client {
                    id: "c".into(),
                    demand: 1.0,
                    position: None,
                },
            ],
            distances: vec![vec![ab, ac]],
            scenarios: vec![Scenario {
                prob: 1.0,
                clients: vec![0, 1],
            }],
            metric: Some(metric),
        }
    }

    #[test]
    fn constructed_breach_gives_one_triple() {
        let v = validate_metric(&three_points(1.0, 1.0, 5.0));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].from, Point::Facility(0));
        assert_eq!(v[0].to, Point::Client(1));
        assert_eq!(v[0].via, vec![Point::Client(0)]);
    }

    #[test]
    fn consistent_triangle_is_clean() {
        assert!(validate_metric(&three_points(1.0, 1.0, 2.0)).is_empty());
    }

    #[test]
    fn dual_budget_example_is_metric() {
        // exhaustive check: the only long edge c(c1, f2) = 3 equals the
        // three-hop path c1 - f1 - c2 - f2.
        assert!(validate_metric(&dual_budget_example(0.01)).is_empty());
        let mut stretched = dual_budget_example(0.01);
        stretched.distances[1][0] = 3.5;
        assert_eq!(validate_metric(&stretched).len(), 1);
    }
}
