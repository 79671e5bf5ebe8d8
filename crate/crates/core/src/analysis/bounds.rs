use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants entering the nonconvex convergence bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Stepsize h.
    pub h: f64,
    /// Iteration count T, a multiple of `k`.
    pub iterations: usize,
    /// Slow refresh period.
    pub k: usize,
    /// Lipschitz constant of the gradient.
    pub lipschitz: f64,
    /// Bound on the second moment of the stochastic gradient.
    pub second_moment: f64,
    /// Number of parameter groups.
    pub groups: usize,
    pub f0: f64,
    pub fstar: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let positive = [("h", self.h), ("lipschitz", self.lipschitz), ("second_moment", self.second_moment)];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
        if self.k == 0 || self.iterations == 0 || self.iterations % self.k != 0 {
            return Err(Error::Domain(format!(
                "iterations ({}) must be a positive multiple of k ({})",
                self.iterations, self.k
            )));
        }
        if self.groups == 0 {
            return Err(Error::Domain("need at least one parameter group".into()));
        }
        if self.f0 < self.fstar {
            return Err(Error::Domain(format!("f0 ({}) is below fstar ({})", self.f0, self.fstar)));
        }
        Ok(())
    }

    fn optimality_term(&self) -> f64 {
        2.0 * (self.f0 - self.fstar) / (self.h * self.iterations as f64)
    }
}

/// `2(f0 − f*)/(hT) + hLMℓ(hLk²/3 + 1)`.
pub fn theorem1_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let (h, l, m) = (b.h, b.lipschitz, b.second_moment);
    let k = b.k as f64;
    Ok(b.optimality_term() + h * l * m * b.groups as f64 * (h * l * k * k / 3.0 + 1.0))
}

/// Vanilla SGD: `2(f0 − f*)/(hT) + hLM/2`.
pub fn sgd_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    Ok(b.optimality_term() + b.h * b.lipschitz * b.second_moment / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> BoundInputs {
        BoundInputs {
            h: 0.1,
            iterations: 100,
            k: 5,
            lipschitz: 1.0,
            second_moment: 1.0,
            groups: 2,
            f0: 1.0,
            fstar: 0.0,
        }
    }

    #[test]
    fn worked_values() {
        assert!((theorem1_bound(&example()).unwrap() - 0.566_666_666_666_666_7).abs() < 1e-12);
        assert!((sgd_bound(&example()).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_k() {
        let b10 = BoundInputs { k: 10, ..example() };
        assert!(theorem1_bound(&b10).unwrap() > theorem1_bound(&example()).unwrap());
    }

    #[test]
    fn infinite_horizon_floor() {
        let b = BoundInputs {
            iterations: 5_000_000_000,
            ..example()
        };
        let floor = 0.1 * 2.0 * (0.1 * 25.0 / 3.0 + 1.0);
        assert!((theorem1_bound(&b).unwrap() - floor).abs() < 1e-8);
    }

    #[test]
    fn vanishing_noise_floor() {
        // h → 0 with hT fixed
        let b = BoundInputs {
            h: 1e-9,
            iterations: 10_000_000_000,
            ..example()
        };
        assert!((sgd_bound(&b).unwrap() - 0.2).abs() < 1e-8);
        assert!((theorem1_bound(&b).unwrap() - 0.2).abs() < 1e-8);
    }

    #[test]
    fn validation() {
        assert!(theorem1_bound(&BoundInputs { iterations: 101, ..example() }).is_err());
        assert!(theorem1_bound(&BoundInputs { h: 0.0, ..example() }).is_err());
        assert!(theorem1_bound(&BoundInputs { fstar: 2.0, ..example() }).is_err());
        assert!(sgd_bound(&BoundInputs { second_moment: -1.0, ..example() }).is_err());
    }
}
