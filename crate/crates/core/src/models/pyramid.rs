use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer structure of a pyramid: `m` layers of sizes
/// `N_i = (c + a (i - 1))^(D - 1)` for `i = 1..m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PyramidSpec {
    pub layers: usize,
    pub aperture: usize,
    pub base: usize,
    pub dimension: usize,
}

impl PyramidSpec {
    pub fn new(layers: usize, aperture: usize, base: usize, dimension: usize) -> Result<Self> {
        if layers < 2 {
            return Err(Error::InvalidArgument(format!("pyramid needs at least 2 layers, got {layers}")));
        }
        if aperture < 1 || base < 1 {
            return Err(Error::InvalidArgument("aperture and base must be at least 1".into()));
        }
        if !(2..=3).contains(&dimension) {
            return Err(Error::InvalidArgument(format!("dimension must be 2 or 3, got {dimension}")));
        }
        Ok(PyramidSpec { layers, aperture, base, dimension })
    }

    pub fn layer_sizes(&self) -> Vec<u64> {
        (0..self.layers)
            .map(|i| ((self.base + self.aperture * i) as u64).pow(self.dimension as u32 - 1))
            .collect()
    }

    pub fn n_total(&self) -> u64 {
        self.layer_sizes().iter().sum()
    }
}
