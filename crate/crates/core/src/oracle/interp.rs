use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Linear log-likelihood predictor for models merged from three parents:
/// `ℓ̂(α, β) = ℓ₀ + α(ℓ₁ − ℓ₀) + β(ℓ₂ − ℓ₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub l0: Vec<f64>,
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
}

pub const DEFAULT_GRID: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

impl InterpolationGrid {
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>, l0: Vec<f64>, l1: Vec<f64>, l2: Vec<f64>) -> Result<Self> {
        if l1.len() != l0.len() || l2.len() != l0.len() {
            return Err(Error::Shape(alloc::format!(
                "vector lengths {}, {}, {}",
                l0.len(),
                l1.len(),
                l2.len()
            )));
        }
        if alphas.iter().chain(&betas).any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::range("grid", "values must lie in [0, 1]"));
        }
        Ok(Self {
            alphas,
            betas,
            l0,
            l1,
            l2,
        })
    }

    pub fn with_default_grid(l0: Vec<f64>, l1: Vec<f64>, l2: Vec<f64>) -> Result<Self> {
        Self::new(DEFAULT_GRID.to_vec(), DEFAULT_GRID.to_vec(), l0, l1, l2)
    }

    /// Every `(α, β)` on the grid, α-major.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.alphas
            .iter()
            .flat_map(|&a| self.betas.iter().map(move |&b| (a, b)))
            .collect()
    }
}

pub fn interpolate_loglik(grid: &InterpolationGrid, alpha: f64, beta: f64) -> Result<Vec<f64>> {
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::range("alpha/beta", "must be finite"));
    }
    Ok((0..grid.l0.len())
        .map(|s| {
            let base = grid.l0[s];
            base + alpha * (grid.l1[s] - base) + beta * (grid.l2[s] - base)
        })
        .collect())
}

/// Placement `(α r₁ + β r₂ cos φ, β r₂ sin φ)` in the plane spanned by the
/// two weight differences.
pub fn weight_plane_coords(r1: f64, r2: f64, phi: f64, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    if !(r1 >= 0.0 && r2 >= 0.0) {
        return Err(Error::range("r1/r2", "must be non-negative"));
    }
    if !(0.0..=core::f64::consts::PI).contains(&phi) {
        return Err(Error::range("phi", alloc::format!("{phi} outside [0, π]")));
    }
    Ok((alpha * r1 + beta * r2 * math::cos(phi), beta * r2 * math::sin(phi)))
}

/// `r₁ = ‖w₁ − w₀‖`, `r₂ = ‖w₂ − w₀‖` and the angle between the two
/// differences.
pub fn weight_plane_geometry(w0: &[f64], w1: &[f64], w2: &[f64]) -> Result<(f64, f64, f64)> {
    if w1.len() != w0.len() || w2.len() != w0.len() {
        return Err(Error::Shape("weight vectors differ in length".into()));
    }
    let d1: Vec<f64> = w1.iter().zip(w0).map(|(a, b)| a - b).collect();
    let d2: Vec<f64> = w2.iter().zip(w0).map(|(a, b)| a - b).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (r1, r2) = (math::sqrt(dot(&d1, &d1)), math::sqrt(dot(&d2, &d2)));
    if r1 == 0.0 || r2 == 0.0 {
        return Err(Error::Constant("a parent coincides with the base weights".into()));
    }
    let cos = (dot(&d1, &d2) / (r1 * r2)).clamp(-1.0, 1.0);
    Ok((r1, r2, math::acos(cos)))
}
