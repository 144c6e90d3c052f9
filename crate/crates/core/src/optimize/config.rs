use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tuning shared by the optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub seed: u64,
    pub max_passes: usize,
    /// A pass that raises the log-determinant by less than this ends the run.
    pub rel_tol: f64,
    /// Final weights below this are zeroed before renormalizing.
    pub weight_floor: f64,
    /// Grid size for the profile maximizer when root finding fails.
    pub grid_fallback_points: usize,
    /// Extra exchange runs from seeded random starts.
    pub restarts: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_passes: 100,
            rel_tol: 1e-10,
            weight_floor: 1e-8,
            grid_fallback_points: 200,
            restarts: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument("rel_tol must be positive".into()));
        }
        if self.max_passes == 0 {
            return Err(Error::InvalidArgument(
                "max_passes must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.weight_floor) {
            return Err(Error::InvalidArgument(
                "weight_floor must lie in [0, 1)".into(),
            ));
        }
        if self.grid_fallback_points < 2 {
            return Err(Error::InvalidArgument(
                "grid_fallback_points must be at least 2".into(),
            ));
        }
        Ok(())
    }
}
