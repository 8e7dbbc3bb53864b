use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetComponent {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
}

impl BudgetComponent {
    pub fn new(name: impl Into<String>, value: f64, sigma: f64) -> Self {
        Self {
            name: name.into(),
            value,
            sigma,
        }
    }
}

/// Uncorrelated components combined in quadrature of relative sigmas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBudget {
    pub components: Vec<BudgetComponent>,
    /// `sigma_i / |value_i|` in component order.
    pub relative_contributions: Vec<f64>,
    pub combined_relative: f64,
}

impl UncertaintyBudget {
    /// Absolute sigma of a derived quantity with the given value.
    pub fn combined_sigma(&self, value: f64) -> f64 {
        self.combined_relative * value.abs()
    }
}

pub fn combine_budget(components: &[BudgetComponent]) -> Result<UncertaintyBudget> {
    if components.is_empty() {
        return Err(Error::InvalidInput("empty uncertainty budget".into()));
    }
    let mut rel = Vec::with_capacity(components.len());
    for c in components {
        if !(c.value.is_finite() && c.sigma.is_finite() && c.sigma >= 0.0) {
            return Err(Error::InvalidInput(format!("component {} is not finite", c.name)));
        }
        if c.value == 0.0 {
            if c.sigma != 0.0 {
                return Err(Error::Domain {
                    name: "value",
                    value: c.value,
                    expected: "nonzero when sigma is nonzero",
                });
            }
            rel.push(0.0);
        } else {
            rel.push(c.sigma / c.value.abs());
        }
    }
    let combined = rel.iter().map(|r| r * r).sum::<f64>().sqrt();
    Ok(UncertaintyBudget {
        components: components.to_vec(),
        relative_contributions: rel,
        combined_relative: combined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_and_pair() {
        let one = combine_budget(&[BudgetComponent::new("a", 2.0, 0.01)]).unwrap();
        assert_eq!(one.combined_relative, 0.005);
        let two = combine_budget(&[BudgetComponent::new("a", 1.0, 1e-3), BudgetComponent::new("b", -5.0, 5e-3)])
            .unwrap();
        assert!((two.combined_relative - 2f64.sqrt() * 1e-3).abs() < 1e-18);
        let sq: f64 = two.relative_contributions.iter().map(|r| r * r).sum();
        assert_eq!(two.combined_relative.powi(2), sq.sqrt().powi(2));
    }

    #[test]
    fn rejects_bad_components() {
        assert!(combine_budget(&[]).is_err());
        assert!(combine_budget(&[BudgetComponent::new("z", 0.0, 1.0)]).is_err());
        assert_eq!(combine_budget(&[BudgetComponent::new("z", 0.0, 0.0)]).unwrap().combined_relative, 0.0);
    }
}
