use serde::Serialize;

use super::dgp::SimulatedStudy;
use crate::error::{Error, Result};
use crate::matching::PairAssignment;

/// Split of the matched estimator's historical-event bias (in units of the
/// event effect) into realized-vs-expected exposure among treated units,
/// the same among their matched controls, and the gap in true exposure
/// probabilities across pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasTerms {
    /// `(1/n) sum_i (H_i - p_i)` over matched treated units.
    pub term_treated: f64,
    /// `(1/n) sum_j (H_j - p_j)` over their matched controls.
    pub term_control: f64,
    /// `(1/n) sum (p_i - p_j)` over pairs.
    pub term_prob_gap: f64,
}

impl BiasTerms {
    /// `term_treated - term_control + term_prob_gap`, which equals the gap in
    /// realized exposure between matched treated and controls.
    pub fn total(&self) -> f64 {
        self.term_treated - self.term_control + self.term_prob_gap
    }
}

pub fn bias_decomposition(
    study: &SimulatedStudy,
    assignment: &PairAssignment,
) -> Result<BiasTerms> {
    let (Some(h), Some(p)) = (&study.hist_impacted, &study.true_event_probs) else {
        return Err(Error::Invalid(
            "study has no historical-event oracle fields".into(),
        ));
    };
    let pairs = assignment.one_to_one()?;
    if pairs.is_empty() {
        return Err(Error::Invalid("empty assignment".into()));
    }
    let treated = study.covariates.treated_indices();
    let controls = study.covariates.control_indices();
    let hv = |i: usize| if h[i] { 1.0 } else { 0.0 };
    let n = pairs.len() as f64;
    let (mut tt, mut tc, mut gap) = (0.0, 0.0, 0.0);
    for (t, c) in pairs {
        let (i, j) = (treated[t], controls[c]);
        tt += hv(i) - p[i];
        tc += hv(j) - p[j];
        gap += p[i] - p[j];
    }
    Ok(BiasTerms {
        term_treated: tt / n,
        term_control: tc / n,
        term_prob_gap: gap / n,
    })
}
