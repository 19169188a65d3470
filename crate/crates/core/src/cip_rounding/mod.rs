//! Rounding for multi-stage covering programs: independent rounding of a
//! scaled fractional solution, and the online dependent rounding procedure
//! that keeps marginals while guaranteeing coverage of bounded-degree rows.

mod dependent;
mod tree;

pub use dependent::{exact_distribution, round_bounded_cover, DependentRounder, Distribution};
pub use tree::{
    coverage_failures, round_tree_dependent, round_tree_independent, tree_cost, tree_degree,
    TreeRounding,
};

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaKind {
    SetCover,
    General,
}

/// Slowly growing term added to `ln n` for set cover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psi {
    /// `ln ln (n + 16)`
    LogLog,
    Constant(f64),
}

impl Psi {
    pub fn eval(&self, n: usize) -> f64 {
        match *self {
            Psi::LogLog => ((n as f64 + 16.0).ln()).ln(),
            Psi::Constant(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaConfig {
    pub kind: LambdaKind,
    /// Number of covering rows.
    pub n: usize,
    /// Smallest right-hand side among rows with `b_i >= 1`.
    pub b_min: f64,
    /// Per-row failure budget; `None` means `1 / (2n)`.
    pub row_failure: Option<f64>,
    pub psi: Psi,
}

impl LambdaConfig {
    pub fn set_cover(n: usize) -> Self {
        LambdaConfig {
            kind: LambdaKind::SetCover,
            n,
            b_min: 1.0,
            row_failure: None,
            psi: Psi::LogLog,
        }
    }

    pub fn general(n: usize, b_min: f64) -> Self {
        LambdaConfig {
            kind: LambdaKind::General,
            n,
            b_min,
            row_failure: None,
            psi: Psi::LogLog,
        }
    }

    pub fn row_failure(&self) -> f64 {
        self.row_failure.unwrap_or(1.0 / (2.0 * self.n as f64))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("n", "at least one row is required"));
        }
        if self.kind == LambdaKind::General && !(self.b_min >= 1.0 && self.b_min.is_finite()) {
            return Err(Error::validation(
                "b_min",
                "must be a finite value of at least 1",
            ));
        }
        let eps = self.row_failure();
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::validation("row_failure", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Lower-tail Chernoff bound `exp(-mu * delta^2 / 2)` with `mu = lambda * B`
/// and `delta = 1 - 1/lambda`.
pub fn chernoff_lower_tail(lambda: f64, b: f64) -> f64 {
    let delta = 1.0 - 1.0 / lambda;
    (-lambda * b * delta * delta / 2.0).exp()
}

/// Scaling factor for independent rounding.
///
/// Set cover uses `ln n + psi(n)`. General programs use the smallest
/// `lambda >= 1` whose Chernoff lower-tail bound meets the per-row budget,
/// found by bisection to `1e-12`.
pub fn choose_lambda(config: &LambdaConfig) -> Result<f64> {
    config.validate()?;
    match config.kind {
        LambdaKind::SetCover => Ok((config.n as f64).ln() + config.psi.eval(config.n)),
        LambdaKind::General => {
            let eps = config.row_failure();
            let b = config.b_min;
            let mut lo = 1.0;
            let mut hi = 2.0;
            while chernoff_lower_tail(hi, b) > eps {
                hi *= 2.0;
            }
            while hi - lo > 1e-12 * hi {
                let mid = 0.5 * (lo + hi);
                if chernoff_lower_tail(mid, b) > eps {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(hi)
        }
    }
}

/// Fractional values of one stage's variables.
#[derive(Debug, Clone, PartialEq)]
pub struct StageBlock {
    pub stage: usize,
    pub values: Vec<f64>,
    pub costs: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
}

impl StageBlock {
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.costs.len() || self.values.len() != self.columns.len() {
            return Err(Error::validation(
                "block",
                "values, costs and columns differ in length",
            ));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::validation(
                "values",
                "must be finite and nonnegative",
            ));
        }
        if self
            .columns
            .iter()
            .flatten()
            .any(|a| !(0.0..=1.0).contains(a))
        {
            return Err(Error::validation("columns", "entries must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Rounds `x' = lambda * x` to `ceil(x')` with probability `x' - floor(x')`
/// and to `floor(x')` otherwise.
pub fn round_scaled<R: Rng + ?Sized>(x: f64, lambda: f64, rng: &mut R) -> u64 {
    let scaled = lambda * x;
    let base = scaled.floor();
    let frac = scaled - base;
    base as u64 + u64::from(frac > 0.0 && rng.random::<f64>() < frac)
}

/// Independent rounding, block by block in the given order.
pub fn independent_round<R: Rng + ?Sized>(
    blocks: &[StageBlock],
    lambda: f64,
    rng: &mut R,
) -> Result<Vec<Vec<u64>>> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "lambda {lambda} must be at least 1"
        )));
    }
    let mut out = Vec::with_capacity(blocks.len());
    for block in blocks {
        block.validate()?;
        out.push(
            block
                .values
                .iter()
                .map(|&x| round_scaled(x, lambda, rng))
                .collect(),
        );
    }
    Ok(out)
}
