//! JSON document form of a learned model, one file per skill (`<name>.dmp.json`).

use serde::{Deserialize, Serialize};

use super::{basis_layout, DmpConfig, DmpError, DmpModel, ForcingScaling};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpConfigDocument {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_x: f64,
    pub n_basis: usize,
    pub tau: f64,
    #[serde(default)]
    pub scaling: ForcingScaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpDocument {
    pub name: String,
    pub created_at: String,
    pub config: DmpConfigDocument,
    pub dims: usize,
    pub weights: Vec<Vec<f64>>,
    pub y0_demo: Vec<f64>,
    pub g_demo: Vec<f64>,
    pub basis_centers: Vec<f64>,
    pub basis_widths: Vec<f64>,
    pub degenerate_dims: Vec<usize>,
}

impl<T: Real> DmpModel<T> {
    pub fn to_document(&self, name: &str, created_at: &str) -> DmpDocument {
        let f = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
        let c = &self.config;
        DmpDocument {
            name: name.to_string(),
            created_at: created_at.to_string(),
            config: DmpConfigDocument {
                alpha: c.alpha.to_f64_lossy(),
                beta: c.beta.to_f64_lossy(),
                alpha_x: c.alpha_x.to_f64_lossy(),
                n_basis: c.n_basis,
                tau: c.tau.to_f64_lossy(),
                scaling: c.scaling,
            },
            dims: self.dims(),
            weights: self.weights.iter().map(|w| f(w)).collect(),
            y0_demo: f(&self.y0_demo),
            g_demo: f(&self.g_demo),
            basis_centers: f(&self.basis_centers),
            basis_widths: f(&self.basis_widths),
            degenerate_dims: self.degenerate_dims.clone(),
        }
    }

    /// Rebuilds a model, checking that array shapes agree with `dims` and `n_basis`.
    pub fn from_document(doc: &DmpDocument) -> Result<Self, DmpError> {
        let c = &doc.config;
        let config = DmpConfig {
            alpha: T::lit(c.alpha),
            beta: T::lit(c.beta),
            alpha_x: T::lit(c.alpha_x),
            n_basis: c.n_basis,
            tau: T::lit(c.tau),
            scaling: c.scaling,
        };
        config.validate()?;
        let n = c.n_basis;
        let shape_ok = doc.weights.len() == doc.dims
            && doc.weights.iter().all(|w| w.len() == n)
            && doc.y0_demo.len() == doc.dims
            && doc.g_demo.len() == doc.dims
            && doc.basis_centers.len() == n
            && doc.basis_widths.len() == n
            && doc.degenerate_dims.iter().all(|&d| d < doc.dims);
        if !shape_ok {
            return Err(DmpError::InvalidConfig("document array shapes disagree"));
        }
        let g = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<_>>();
        let model = DmpModel {
            config,
            weights: doc.weights.iter().map(|w| g(w)).collect(),
            y0_demo: g(&doc.y0_demo),
            g_demo: g(&doc.g_demo),
            basis_centers: g(&doc.basis_centers),
            basis_widths: g(&doc.basis_widths),
            degenerate_dims: doc.degenerate_dims.clone(),
        };
        if !model.is_finite()
            || model.basis_widths.iter().any(|&h| h <= T::zero())
            || model.basis_centers.windows(2).any(|w| w[0] <= w[1])
        {
            return Err(DmpError::InvalidConfig("document basis or weights invalid"));
        }
        Ok(model)
    }

    /// True when the stored basis matches the layout its config would produce.
    pub fn has_standard_basis(&self) -> bool {
        let (c, h) = basis_layout(&self.config);
        c == self.basis_centers && h == self.basis_widths
    }
}
