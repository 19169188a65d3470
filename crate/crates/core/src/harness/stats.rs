use serde::{Deserialize, Serialize};

/// z-value of a two-sided 99% normal interval.
pub const Z99: f64 = 2.576;

/// Sample summary with a normal-approximation 99% interval for the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub ci99: [f64; 2],
}

impl Summary {
    /// Two-pass mean and unbiased variance, in input order.
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary {
                count: 0,
                mean: f64::NAN,
                std_dev: f64::NAN,
                std_error: f64::NAN,
                ci99: [f64::NAN, f64::NAN],
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let std_dev = var.sqrt();
        let std_error = std_dev / (n as f64).sqrt();
        Summary {
            count: n,
            mean,
            std_dev,
            std_error,
            ci99: [mean - Z99 * std_error, mean + Z99 * std_error],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_sample() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std_dev - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((s.ci99[1] - s.mean - 2.576 * s.std_dev / 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_sample_has_zero_spread() {
        let s = Summary::of(&[7.0; 10]);
        assert_eq!(s.std_error, 0.0);
        assert_eq!(s.ci99, [7.0, 7.0]);
    }
}
