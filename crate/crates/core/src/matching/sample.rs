use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::RealMatrix;

/// Units by covariates, with a treatment flag per unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateSample {
    unit_ids: Vec<String>,
    treated: Vec<bool>,
    covariates: RealMatrix,
    covariate_names: Vec<String>,
}

impl CovariateSample {
    pub fn new(
        unit_ids: Vec<String>,
        treated: Vec<bool>,
        covariates: RealMatrix,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = covariates.rows();
        if unit_ids.len() != n || treated.len() != n {
            return Err(Error::Shape(format!(
                "{} ids and {} treatment flags for {n} covariate rows",
                unit_ids.len(),
                treated.len()
            )));
        }
        if covariate_names.len() != covariates.cols() {
            return Err(Error::Shape(format!(
                "{} covariate names for {} columns",
                covariate_names.len(),
                covariates.cols()
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        if let Some(dup) = unit_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::Invalid(format!("duplicate unit id {dup:?}")));
        }
        let n_treated = treated.iter().filter(|&&t| t).count();
        if n_treated == 0 || n_treated == n {
            return Err(Error::Invalid(format!(
                "sample needs treated and control units ({n_treated} treated of {n})"
            )));
        }
        Ok(Self {
            unit_ids,
            treated,
            covariates,
            covariate_names,
        })
    }

    /// Convenience constructor with ids `u0, u1, ...` and names `z1, z2, ...`.
    pub fn from_matrix(treated: Vec<bool>, covariates: RealMatrix) -> Result<Self> {
        let ids = (0..covariates.rows()).map(|i| format!("u{i}")).collect();
        let names = (1..=covariates.cols()).map(|j| format!("z{j}")).collect();
        Self::new(ids, treated, covariates, names)
    }

    pub fn len(&self) -> usize {
        self.treated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treated.is_empty()
    }

    pub fn n_treated(&self) -> usize {
        self.treated.iter().filter(|&&t| t).count()
    }

    pub fn n_control(&self) -> usize {
        self.len() - self.n_treated()
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn treated(&self) -> &[bool] {
        &self.treated
    }

    pub fn covariates(&self) -> &RealMatrix {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Sample row of each treated unit, in sample order. Distance-matrix rows
    /// follow this order.
    pub fn treated_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.treated[i]).collect()
    }

    /// Sample row of each control unit, in sample order. Distance-matrix
    /// columns follow this order.
    pub fn control_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.treated[i]).collect()
    }

    /// The same units restricted to a subset of covariates.
    pub fn select_covariates(&self, columns: &[usize]) -> Result<Self> {
        let covariates = self.covariates.select_columns(columns)?;
        let names = columns
            .iter()
            .map(|&c| self.covariate_names[c].clone())
            .collect();
        Ok(Self {
            unit_ids: self.unit_ids.clone(),
            treated: self.treated.clone(),
            covariates,
            covariate_names: names,
        })
    }
}
