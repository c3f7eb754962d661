use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub sd: f64,
    pub t: f64,
    pub dof: f64,
    pub p_two_tailed: f64,
    pub cohens_d: f64,
}

/// `t = mean / (sd / √n)` from summary statistics.
pub fn t_statistic(mean: f64, sd: f64, n: usize) -> f64 {
    mean / (sd / (n as f64).sqrt())
}

/// Paired t-test on per-subject differences with `n − 1` degrees of freedom, plus Cohen's d
/// (mean over SD of the differences). All-equal differences give `t = d = 0`, `p = 1` when the
/// mean is zero, and infinite statistics with `p = 0` otherwise.
pub fn paired_t_and_effect(deltas: &[f64]) -> Result<PairedTest, MetricsError> {
    let n = deltas.len();
    if n < 2 {
        return Err(MetricsError::TooFew { needed: 2, got: n });
    }
    if deltas.iter().any(|d| !d.is_finite()) {
        return Err(MetricsError::Degenerate("differences must be finite".into()));
    }
    let mean = deltas.iter().sum::<f64>() / n as f64;
    let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let dof = (n - 1) as f64;
    let (t, cohens_d, p) = if sd == 0.0 {
        if mean == 0.0 {
            (0.0, 0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = t_statistic(mean, sd, n);
        let dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| MetricsError::Degenerate(e.to_string()))?;
        (t, mean / sd, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    Ok(PairedTest { n, mean, sd, t, dof, p_two_tailed: p, cohens_d })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_differences() {
        let r = paired_t_and_effect(&[0.0; 5]).unwrap();
        assert_eq!((r.t, r.cohens_d, r.p_two_tailed), (0.0, 0.0, 1.0));
    }

    #[test]
    fn matches_high_precision_reference() {
        let deltas = [1.5, -0.25, 2.75, 0.5, 3.125, 1.0, -0.75, 2.0, 0.875];
        let r = paired_t_and_effect(&deltas).unwrap();
        assert!((r.t - 2.770_951_614_937_162).abs() < 1e-10, "{}", r.t);
        assert!((r.cohens_d - 0.923_650_538_312_387_3).abs() < 1e-10);
        assert!((r.p_two_tailed - 0.024_261_016_912_885_2).abs() < 1e-10, "{}", r.p_two_tailed);
        assert_eq!(r.dof, 8.0);
    }

    #[test]
    fn formula_on_reported_summary() {
        // 61.6 / (18.75 / 3) as printed; the arithmetic gives 9.856.
        assert!((t_statistic(61.6, 18.75, 9) - 9.856).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        assert!(paired_t_and_effect(&[1.0]).is_err());
        assert!(paired_t_and_effect(&[1.0, f64::NAN]).is_err());
        let r = paired_t_and_effect(&[2.0, 2.0]).unwrap();
        assert_eq!((r.t, r.p_two_tailed), (f64::INFINITY, 0.0));
    }
}
