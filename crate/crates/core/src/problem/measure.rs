use serde::{Deserialize, Serialize};

use super::ProblemError;

/// Minimum separation between two support points.
pub const SUPPORT_SEPARATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub tau: f64,
    pub weight: f64,
}

/// Finitely supported nonnegative measure on the index set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiscreteMeasure {
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(atoms: Vec<Atom>) -> Result<Self, ProblemError> {
        for a in &atoms {
            if !(a.weight >= 0.0) || !a.weight.is_finite() || !a.tau.is_finite() {
                return Err(ProblemError::InvalidWeight {
                    tau: a.tau,
                    weight: a.weight,
                });
            }
        }
        let mut sorted: Vec<f64> = atoms.iter().map(|a| a.tau).collect();
        sorted.sort_by(f64::total_cmp);
        if let Some(w) = sorted
            .windows(2)
            .find(|w| (w[1] - w[0]).abs() <= SUPPORT_SEPARATION)
        {
            return Err(ProblemError::DuplicateSupport(w[0], w[1]));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn support(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.tau)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Total variation `‖y‖ = Σ yᵢ` (weights are nonnegative).
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Copy without the atom at position `index`.
    pub fn without(&self, index: usize) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.remove(index);
        Self { atoms }
    }
}
