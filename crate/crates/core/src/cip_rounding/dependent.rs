use rand::Rng;

use crate::error::{Error, Result};

/// Case II(a) fires when `s + z >= 1 - FORCE_TOL`.
const FORCE_TOL: f64 = 1e-12;
pub const MAX_EXACT_LEN: usize = 20;

/// Online dependent rounding of a stream `z_1, z_2, ...` in `[0, 1]`.
///
/// Each output is 1 with probability at most its input, at most one output
/// is 1, and an output is forced to 1 once the prefix sum reaches 1. The
/// random source is passed to every call so that a state can be cloned at a
/// branch point and continued independently on each branch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DependentRounder {
    sum: f64,
    compensation: f64,
    fired: bool,
}

impl DependentRounder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Prefix sum of the inputs fed while not fired.
    pub fn prefix_sum(&self) -> f64 {
        self.sum
    }

    pub fn fired(&self) -> bool {
        self.fired
    }

    fn add(&mut self, z: f64) {
        let y = z - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    /// Probability that the next input `z` fires, given the current state.
    pub fn fire_probability(&self, z: f64) -> f64 {
        if self.fired {
            0.0
        } else if self.sum + z >= 1.0 - FORCE_TOL {
            1.0
        } else {
            z / (1.0 - self.sum)
        }
    }

    pub fn feed<R: Rng + ?Sized>(&mut self, z: f64, rng: &mut R) -> Result<bool> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::OutOfRange(format!("input {z} is outside [0, 1]")));
        }
        let p = self.fire_probability(z);
        let out = p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p);
        if !self.fired {
            self.add(z);
        }
        self.fired |= out;
        Ok(out)
    }
}

/// Exact output distribution of the procedure on a fixed input vector, as
/// `(mask, probability)` pairs with bit `i` standing for output `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub len: usize,
    pub outcomes: Vec<(u32, f64)>,
}

impl Distribution {
    pub fn probability(&self, mask: u32) -> f64 {
        self.outcomes
            .iter()
            .filter(|(m, _)| *m == mask)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn marginal(&self, i: usize) -> f64 {
        self.outcomes
            .iter()
            .filter(|(m, _)| m & (1 << i) != 0)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.outcomes.iter().map(|(_, p)| p).sum()
    }
}

/// Walks the decision tree of the procedure: the run stays unfired with
/// some probability mass and, at step `i`, sends the fire probability of
/// that mass to the outcome with only bit `i` set.
pub fn exact_distribution(z: &[f64]) -> Result<Distribution> {
    if z.len() > MAX_EXACT_LEN {
        return Err(Error::TooLarge(format!(
            "exact distribution supports at most {MAX_EXACT_LEN} inputs, got {}",
            z.len()
        )));
    }
    let mut state = DependentRounder::new();
    let mut alive = 1.0;
    let mut outcomes = Vec::new();
    for (i, &zi) in z.iter().enumerate() {
        if !(0.0..=1.0).contains(&zi) {
            return Err(Error::OutOfRange(format!("input {zi} is outside [0, 1]")));
        }
        let p = state.fire_probability(zi);
        if p > 0.0 {
            outcomes.push((1u32 << i, alive * p));
        }
        alive *= 1.0 - p;
        state.add(zi);
        if alive == 0.0 {
            break;
        }
    }
    if alive > 0.0 {
        outcomes.push((0, alive));
    }
    Ok(Distribution {
        len: z.len(),
        outcomes,
    })
}

/// Rounds a fractional solution of a covering system in which every row
/// has at most `degree` variables. `values[v][l]` is the stage-`l` value of
/// variable `v`; each variable's stages are fed to its own rounder after
/// scaling by `degree` and capping at 1. Every row whose fractional total
/// is at least 1 is covered with certainty.
pub fn round_bounded_cover<R: Rng + ?Sized>(
    rows: &[Vec<usize>],
    values: &[Vec<f64>],
    degree: usize,
    rng: &mut R,
) -> Result<Vec<Vec<bool>>> {
    for (r, row) in rows.iter().enumerate() {
        if row.len() > degree {
            return Err(Error::validation(
                format!("row {r}"),
                "more variables than the degree",
            ));
        }
        let total: f64 = row.iter().map(|&v| values[v].iter().sum::<f64>()).sum();
        if total < 1.0 - 1e-9 {
            return Err(Error::validation(
                format!("row {r}"),
                format!("fractional coverage {total} is below 1"),
            ));
        }
    }
    let b = degree as f64;
    values
        .iter()
        .map(|stages| {
            let mut r = DependentRounder::new();
            stages
                .iter()
                .map(|&x| r.feed((b * x).min(1.0), rng))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_input_fires_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut r = DependentRounder::new();
        assert!(r.feed(1.0, &mut rng).unwrap());
        let d = exact_distribution(&[1.0]).unwrap();
        assert_eq!(d.outcomes, vec![(1, 1.0)]);
    }

    #[test]
    fn halves_split_evenly() {
        let d = exact_distribution(&[0.5, 0.5]).unwrap();
        assert_eq!(d.probability(0b01), 0.5);
        assert_eq!(d.probability(0b10), 0.5);
        assert_eq!(d.probability(0b00), 0.0);
        assert_eq!(d.probability(0b11), 0.0);
    }

    #[test]
    fn partial_sum_leaves_zero_outcome() {
        let d = exact_distribution(&[0.3, 0.2]).unwrap();
        assert!((d.marginal(0) - 0.3).abs() < 1e-15);
        assert!((d.marginal(1) - 0.2).abs() < 1e-15);
        assert!((d.probability(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zeros_never_fire() {
        let d = exact_distribution(&[0.0; 5]).unwrap();
        assert_eq!(d.outcomes, vec![(0, 1.0)]);
    }

    #[test]
    fn fired_state_outputs_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut r = DependentRounder::new();
        r.feed(1.0, &mut rng).unwrap();
        for _ in 0..10 {
            assert!(!r.feed(0.9, &mut rng).unwrap());
        }
    }

    #[test]
    fn rejects_out_of_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(DependentRounder::new().feed(1.5, &mut rng).is_err());
        assert!(exact_distribution(&[-0.1]).is_err());
        assert!(exact_distribution(&[0.0; 21]).is_err());
    }

    #[test]
    fn roundoff_still_forces() {
        // 0.1 ten times sums to slightly less than 1 in floating point
        let d = exact_distribution(&[0.1; 10]).unwrap();
        assert_eq!(d.probability(0), 0.0);
    }

    #[test]
    fn single_edge_always_covered() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let y =
                round_bounded_cover(&[vec![0, 1]], &[vec![0.5], vec![0.5]], 2, &mut rng).unwrap();
            assert!(y[0][0] && y[1][0]);
        }
    }

    #[test]
    fn undercovered_row_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(round_bounded_cover(&[vec![0, 1]], &[vec![0.4], vec![0.5]], 2, &mut rng).is_err());
    }
}
