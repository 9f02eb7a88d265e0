//! Weighted running averages of iterates.

use crate::error::{check_len, DpdError, Result};
use crate::vector;

/// Running `Σ wₜ vₜ / Σ wₜ`.
#[derive(Debug, Clone)]
pub struct WeightedAverage {
    sum: Vec<f64>,
    weight: f64,
}

impl WeightedAverage {
    pub fn new(dim: usize) -> Self {
        Self {
            sum: vec![0.0; dim],
            weight: 0.0,
        }
    }

    pub fn push(&mut self, weight: f64, v: &[f64]) {
        vector::axpy(weight, v, &mut self.sum);
        self.weight += weight;
    }

    pub fn total_weight(&self) -> f64 {
        self.weight
    }

    /// `None` before the first push.
    pub fn mean(&self) -> Option<Vec<f64>> {
        (self.weight > 0.0).then(|| self.sum.iter().map(|s| s / self.weight).collect())
    }
}

/// `Σ wᵢ vᵢ / Σ wᵢ` over a finished list of iterates.
pub fn aggregate_closed_form(iterates: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    let first = iterates
        .first()
        .ok_or_else(|| DpdError::InvalidInput("no iterates to aggregate".into()))?;
    check_len("aggregation weights", iterates.len(), weights.len())?;
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(DpdError::InvalidInput("aggregation weights must be positive".into()));
    }
    let mut avg = WeightedAverage::new(first.len());
    for (v, w) in iterates.iter().zip(weights) {
        check_len("aggregated iterate", first.len(), v.len())?;
        avg.push(*w, v);
    }
    Ok(avg.mean().expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_iterate_is_itself() {
        let v = vec![1.5, -2.0];
        assert_eq!(aggregate_closed_form(std::slice::from_ref(&v), &[3.0]).unwrap(), v);
    }

    #[test]
    fn equal_weights_give_mean() {
        let out = aggregate_closed_form(&[vec![1.0, 0.0], vec![3.0, 2.0]], &[2.0, 2.0]).unwrap();
        assert_eq!(out, vec![2.0, 1.0]);
    }

    #[test]
    fn weights_one_two() {
        let out = aggregate_closed_form(&[vec![3.0], vec![6.0]], &[1.0, 2.0]).unwrap();
        assert!((out[0] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(aggregate_closed_form(&[], &[]).is_err());
        assert!(aggregate_closed_form(&[vec![1.0]], &[0.0]).is_err());
        assert!(aggregate_closed_form(&[vec![1.0]], &[1.0, 2.0]).is_err());
    }
}
