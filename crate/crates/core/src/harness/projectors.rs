//! Spatial surrogates of the three-way split `𝒫 ⊕ 𝒬 ⊕ ℛ` of a difference segment.
//!
//! `𝒫` projects the `Ω_K` part onto the first `k` Dirichlet sine modes of `(−K, K)`,
//! `𝒬` keeps the remainder inside `Ω_K`, and `ℛ` is the far-field part.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Grid, Mask};
use crate::integrator::{SampleProbe, Segment};

#[derive(Clone, Debug)]
pub struct ProjectorSet {
    grid: Grid,
    near: Mask,
    far: Mask,
    near_indices: Vec<usize>,
    /// Discretely orthonormal modes, restricted to `near_indices`.
    modes: Vec<Vec<f64>>,
}

/// `(‖𝒫u‖, ‖𝒬u‖, ‖ℛu‖)`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentNorms {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl ProjectorSet {
    pub fn new(grid: Grid, radius: f64, k: usize) -> Result<Self> {
        if grid.dim != 1 {
            return Err(Error::Unsupported(
                "spectral projectors are only available for d = 1".into(),
            ));
        }
        if k == 0 {
            return Err(Error::param("k", "need at least one mode"));
        }
        let near = Mask::ball(grid, radius);
        let far = near.complement();
        let near_indices: Vec<usize> = near.indices().collect();
        if near_indices.len() < k {
            return Err(Error::InvalidGrid(format!(
                "only {} nodes inside the split ball, cannot hold {k} modes",
                near_indices.len()
            )));
        }
        let dx = grid.dx();
        let mut modes: Vec<Vec<f64>> = Vec::with_capacity(k);
        for m in 1..=k {
            let wave = m as f64 * std::f64::consts::PI / (2.0 * radius);
            let mut v: Vec<f64> = near_indices
                .iter()
                .map(|&i| (wave * (grid.coordinate(i) + radius)).sin())
                .collect();
            // modified Gram–Schmidt in the grid-weighted inner product
            for e in &modes {
                let c: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum::<f64>() * dx;
                for (vi, ei) in v.iter_mut().zip(e) {
                    *vi -= c * ei;
                }
            }
            let norm = (v.iter().map(|a| a * a).sum::<f64>() * dx).sqrt();
            if norm < 1e-12 {
                return Err(Error::InvalidGrid(format!(
                    "mode {m} is not resolved by the grid"
                )));
            }
            for vi in &mut v {
                *vi /= norm;
            }
            modes.push(v);
        }
        Ok(ProjectorSet {
            grid,
            near,
            far,
            near_indices,
            modes,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn near_mask(&self) -> &Mask {
        &self.near
    }

    pub fn far_mask(&self) -> &Mask {
        &self.far
    }

    /// Mode `m` (1-based) as a field, zero outside `Ω_K`.
    pub fn mode_field(&self, m: usize) -> Result<Field> {
        let mode = self.modes.get(m.wrapping_sub(1)).ok_or(Error::OutOfRange {
            index: m,
            max: self.modes.len(),
        })?;
        let mut f = Field::zeros(self.grid);
        for (&i, &v) in self.near_indices.iter().zip(mode) {
            f.values_mut()[i] = v;
        }
        Ok(f)
    }

    /// Coefficients of `χ_{Ω_K}u` on the retained modes.
    pub fn coefficients(&self, field: &Field) -> Result<Vec<f64>> {
        if field.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let dx = self.grid.dx();
        let values = field.values();
        Ok(self
            .modes
            .iter()
            .map(|e| {
                self.near_indices
                    .iter()
                    .zip(e)
                    .map(|(&i, &w)| values[i] * w)
                    .sum::<f64>()
                    * dx
            })
            .collect())
    }

    /// Component norms of a single time sample.
    pub fn sample_components(&self, field: &Field) -> Result<ComponentNorms> {
        let coeffs = self.coefficients(field)?;
        let dx = self.grid.dx();
        let values = field.values();
        let mut remainder: Vec<f64> = self.near_indices.iter().map(|&i| values[i]).collect();
        for (c, e) in coeffs.iter().zip(&self.modes) {
            for (ri, ei) in remainder.iter_mut().zip(e) {
                *ri -= c * ei;
            }
        }
        let p = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        let q = (remainder.iter().map(|v| v * v).sum::<f64>() * dx).sqrt();
        let r = (self
            .far
            .indices()
            .map(|i| values[i] * values[i])
            .sum::<f64>()
            * dx)
            .sqrt();
        Ok(ComponentNorms { p, q, r })
    }
}

/// Sup over the time samples of each component.
pub fn project_components(segment: &Segment, proj: &ProjectorSet) -> Result<ComponentNorms> {
    let mut out = ComponentNorms {
        p: 0.0,
        q: 0.0,
        r: 0.0,
    };
    for s in segment.samples() {
        let c = proj.sample_components(s)?;
        out.p = out.p.max(c.p);
        out.q = out.q.max(c.q);
        out.r = out.r.max(c.r);
    }
    Ok(out)
}

impl SampleProbe for ProjectorSet {
    fn labels(&self) -> Vec<String> {
        vec!["p".into(), "q".into(), "rho".into()]
    }

    fn component_norms(&self, sample: &Field) -> Result<Vec<f64>> {
        let c = self.sample_components(sample)?;
        Ok(vec![c.p, c.q, c.r])
    }
}
