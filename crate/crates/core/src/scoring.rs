//! Accuracy penalty, scalar fitness and fitness-proportionate selection
//! probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest penalty, in percentage points. Keeps the fitness finite when a
/// compressed model loses no accuracy.
pub const PENALTY_FLOOR: f64 = 1e-3;

/// Top-1 accuracy in percentage points, `0..=100`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Accuracy(f64);

impl Accuracy {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=100.0).contains(&value) {
            return Err(Error::config(format!("accuracy {value} outside [0, 100]")));
        }
        Ok(Accuracy(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Score of one individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub individual_id: usize,
    pub accuracy: f64,
    pub cost_total: u64,
    pub delta_c: f64,
    pub penalty: f64,
    pub fitness: f64,
}

impl Evaluation {
    pub fn new(
        individual_id: usize,
        accuracy: Accuracy,
        cost_total: u64,
        delta_c: f64,
        original: Accuracy,
        threshold: Accuracy,
    ) -> Self {
        let penalty = pen_acc(original, accuracy, threshold);
        Evaluation {
            individual_id,
            accuracy: accuracy.value(),
            cost_total,
            delta_c,
            penalty,
            fitness: fitness(delta_c, penalty),
        }
    }
}

/// Accuracy degradation penalty with an exponential cliff below
/// `threshold`, floored at [`PENALTY_FLOOR`].
pub fn pen_acc(original: Accuracy, compressed: Accuracy, threshold: Accuracy) -> f64 {
    let a_hat = compressed.value();
    let mut p = original.value() - a_hat;
    if a_hat < threshold.value() {
        p += (threshold.value() - a_hat).exp();
    }
    p.max(PENALTY_FLOOR)
}

/// `exp(delta_c) / penalty`.
pub fn fitness(delta_c: f64, penalty: f64) -> f64 {
    delta_c.exp() / penalty
}

/// Selection distribution `p_n = (f_n - f_min) / sum(f - f_min)`.
///
/// The weakest individuals get probability exactly zero. When every fitness
/// is equal the distribution is uniform.
pub fn selection_probs(fitnesses: &[f64]) -> Result<Vec<f64>> {
    let n = fitnesses.len();
    if n < 2 {
        return Err(Error::config(format!(
            "selection needs at least 2 individuals, got {n}"
        )));
    }
    if let Some(bad) = fitnesses.iter().find(|f| !f.is_finite()) {
        return Err(Error::Invariant(format!("non-finite fitness {bad}")));
    }
    let min = fitnesses.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = fitnesses.iter().map(|f| f - min).collect();
    let total: f64 = shifted.iter().sum();
    if total <= 0.0 {
        return Ok(vec![1.0 / n as f64; n]);
    }
    Ok(shifted.into_iter().map(|s| s / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acc(v: f64) -> Accuracy {
        Accuracy::new(v).unwrap()
    }

    #[test]
    fn penalty_above_threshold() {
        assert!((pen_acc(acc(93.5), acc(90.0), acc(80.0)) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn penalty_below_threshold() {
        let p = pen_acc(acc(93.5), acc(75.0), acc(80.0));
        let expected = 18.5 + 5f64.exp();
        assert!(((p - expected) / expected).abs() < 1e-12);
        assert!((p - 166.913).abs() < 1e-3);
    }

    #[test]
    fn penalty_floor() {
        assert_eq!(pen_acc(acc(93.5), acc(93.5), acc(80.0)), PENALTY_FLOOR);
        assert_eq!(pen_acc(acc(93.5), acc(95.0), acc(80.0)), PENALTY_FLOOR);
    }

    #[test]
    fn fitness_examples() {
        assert!((fitness(0.5, 3.5) - 0.5f64.exp() / 3.5).abs() < 1e-15);
        assert!((fitness(0.5, 3.5) - 0.4711).abs() < 1e-4);
        assert_eq!(fitness(0.0, 1.0), 1.0);
        let low = fitness(0.5, 18.5 + 5f64.exp());
        assert!((low - 0.00988).abs() < 1e-5);
    }

    #[test]
    fn selection_examples() {
        let p = selection_probs(&[1.0, 3.0, 5.0]).unwrap();
        assert_eq!(p, vec![0.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(
            selection_probs(&[2.0, 2.0, 2.0]).unwrap(),
            vec![1.0 / 3.0; 3]
        );
        assert!(selection_probs(&[1.0]).is_err());
    }

    #[test]
    fn accuracy_range() {
        assert!(Accuracy::new(-0.1).is_err());
        assert!(Accuracy::new(100.1).is_err());
        assert!(Accuracy::new(f64::NAN).is_err());
    }

    #[test]
    fn evaluation_consistency() {
        let e = Evaluation::new(0, acc(90.0), 10, 0.5, acc(93.5), acc(80.0));
        assert_eq!(e.fitness, e.delta_c.exp() / e.penalty);
        assert!((e.fitness.ln() - (e.delta_c - e.penalty.ln())).abs() < 1e-12);
    }
}
