//! Difference-in-differences estimators and the pre-period trend test.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matching::{CovariateSample, PairAssignment};
use crate::stats::{
    mean, ols_fit, ols_fit_named, sample_variance, student_t_quantile, student_t_two_sided_p,
    RealMatrix,
};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// One outcome observation of one unit in one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelRecord {
    pub unit_id: String,
    /// True for the treated group.
    pub group: bool,
    /// Period ordinal; larger is later.
    pub period: usize,
    pub outcome: f64,
}

/// Long-format panel with at most one record per (unit, period).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelDataset {
    records: Vec<PanelRecord>,
}

impl PanelDataset {
    pub fn new(records: Vec<PanelRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        let mut groups: HashMap<&str, bool> = HashMap::new();
        for r in &records {
            if !r.outcome.is_finite() {
                return Err(Error::Invalid(format!(
                    "non-finite outcome for unit {} in period {}",
                    r.unit_id, r.period
                )));
            }
            if !seen.insert((r.unit_id.as_str(), r.period)) {
                return Err(Error::Invalid(format!(
                    "unit {} appears twice in period {}",
                    r.unit_id, r.period
                )));
            }
            if *groups.entry(&r.unit_id).or_insert(r.group) != r.group {
                return Err(Error::Invalid(format!(
                    "unit {} changes group between periods",
                    r.unit_id
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[PanelRecord] {
        &self.records
    }

    /// Distinct period ordinals, ascending.
    pub fn periods(&self) -> Vec<usize> {
        self.records
            .iter()
            .map(|r| r.period)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Records whose period is in `periods`.
    pub fn restrict(&self, periods: &[usize]) -> Self {
        let keep: HashSet<usize> = periods.iter().copied().collect();
        Self {
            records: self
                .records
                .iter()
                .filter(|r| keep.contains(&r.period))
                .cloned()
                .collect(),
        }
    }

    fn outcome_index(&self) -> HashMap<(&str, usize), f64> {
        self.records
            .iter()
            .map(|r| ((r.unit_id.as_str(), r.period), r.outcome))
            .collect()
    }

    /// Units in first-appearance order with their group.
    fn units(&self) -> Vec<(&str, bool)> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.unit_id.as_str()))
            .map(|r| (r.unit_id.as_str(), r.group))
            .collect()
    }

    /// Mean outcome of every (group, period) cell present, ordered by group
    /// (control first) then period.
    pub fn cell_means(&self) -> Vec<CellMean> {
        let mut cells: std::collections::BTreeMap<(bool, usize), (f64, usize)> = Default::default();
        for r in &self.records {
            let e = cells.entry((r.group, r.period)).or_insert((0.0, 0));
            e.0 += r.outcome;
            e.1 += 1;
        }
        cells
            .into_iter()
            .map(|((group, period), (sum, n))| CellMean {
                group,
                period,
                mean: sum / n as f64,
                n,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellMean {
    pub group: bool,
    pub period: usize,
    pub mean: f64,
    pub n: usize,
}

/// Before and after outcomes of one treated unit and its matched control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair {
    pub treated_after: f64,
    pub treated_before: f64,
    pub control_after: f64,
    pub control_before: f64,
}

impl MatchedPair {
    /// Treated change minus control change.
    pub fn difference(&self) -> f64 {
        (self.treated_after - self.treated_before) - (self.control_after - self.control_before)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DidEstimate {
    pub point: f64,
    pub se: f64,
    pub df: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
    /// Pairs for the paired estimator, units for the regression estimator.
    pub n: usize,
}

impl DidEstimate {
    fn with_t_interval(point: f64, se: f64, df: usize, alpha: f64, n: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if df == 0 {
            return Err(Error::Domain("no residual degrees of freedom".into()));
        }
        let half = student_t_quantile(1.0 - alpha / 2.0, df as f64)? * se;
        Ok(Self {
            point,
            se,
            df,
            ci_low: point - half,
            ci_high: point + half,
            alpha,
            n,
        })
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    pub fn ci_length(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Difference of the treated and control before/after changes.
pub fn group_means_did(
    mean_t_after: f64,
    mean_t_before: f64,
    mean_c_after: f64,
    mean_c_before: f64,
) -> f64 {
    (mean_t_after - mean_t_before) - (mean_c_after - mean_c_before)
}

/// Matched-pair estimator: the pair differences are treated as an i.i.d.
/// normal sample and the interval comes from inverting the one-sample t-test.
pub fn paired_did(pairs: &[MatchedPair], alpha: f64) -> Result<DidEstimate> {
    let diffs: Vec<f64> = pairs.iter().map(MatchedPair::difference).collect();
    paired_did_from_differences(&diffs, alpha)
}

/// [`paired_did`] on precomputed pair differences.
pub fn paired_did_from_differences(diffs: &[f64], alpha: f64) -> Result<DidEstimate> {
    let n = diffs.len();
    if n < 2 {
        return Err(Error::Domain(format!(
            "paired estimate needs at least two pairs, got {n}"
        )));
    }
    let se = (sample_variance(diffs) / n as f64).sqrt();
    DidEstimate::with_t_interval(mean(diffs), se, n - 1, alpha, n)
}

/// Two-way fixed-effects regression on a two-period panel: unit effects, a
/// period effect and the treated-after indicator.
///
/// Unit effects are absorbed by within-unit demeaning; classical
/// homoskedastic standard errors with `n_obs - n_units - 2` residual degrees
/// of freedom.
pub fn regression_did(panel: &PanelDataset, alpha: f64) -> Result<DidEstimate> {
    let periods = panel.periods();
    if periods.len() != 2 {
        return Err(Error::Invalid(format!(
            "regression estimate needs exactly two periods, found {}",
            periods.len()
        )));
    }
    let (before, after) = (periods[0], periods[1]);
    let index = panel.outcome_index();
    let units = panel.units();
    let missing: Vec<String> = units
        .iter()
        .filter(|(u, _)| !index.contains_key(&(*u, before)) || !index.contains_key(&(*u, after)))
        .map(|(u, _)| u.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingData(missing));
    }
    let pre: Vec<f64> = units.iter().map(|(u, _)| index[&(*u, before)]).collect();
    let post: Vec<f64> = units.iter().map(|(u, _)| index[&(*u, after)]).collect();
    let treated: Vec<bool> = units.iter().map(|(_, g)| *g).collect();
    two_period_regression_did(&pre, &post, &treated, alpha)
}

/// [`regression_did`] on aligned per-unit outcome vectors.
pub fn two_period_regression_did(
    pre: &[f64],
    post: &[f64],
    treated: &[bool],
    alpha: f64,
) -> Result<DidEstimate> {
    let n_units = treated.len();
    if pre.len() != n_units || post.len() != n_units {
        return Err(Error::Shape(
            "outcome vectors and group flags differ in length".into(),
        ));
    }
    let n_treated = treated.iter().filter(|&&t| t).count();
    if n_treated == 0 || n_treated == n_units {
        return Err(Error::Invalid(
            "regression estimate needs both groups".into(),
        ));
    }
    if n_units < 3 {
        return Err(Error::Domain(
            "regression estimate needs at least three units".into(),
        ));
    }
    let mut design = Vec::with_capacity(4 * n_units);
    let mut y = Vec::with_capacity(2 * n_units);
    for i in 0..n_units {
        let g = if treated[i] { 0.5 } else { 0.0 };
        let centre = 0.5 * (pre[i] + post[i]);
        design.extend_from_slice(&[-0.5, -g]);
        y.push(pre[i] - centre);
        design.extend_from_slice(&[0.5, g]);
        y.push(post[i] - centre);
    }
    let design = RealMatrix::new(2 * n_units, 2, design)?;
    let fit = ols_fit(&design, &y)?;
    // The demeaned fit counts 2 parameters; the unit effects cost n_units more.
    let df = n_units - 2;
    let se = fit.standard_errors[1] * (fit.residual_df as f64 / df as f64).sqrt();
    DidEstimate::with_t_interval(fit.coefficients[1], se, df, alpha, n_units)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendTestResult {
    pub tau_hat: f64,
    pub se: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Tests for differing group trends between two pre-treatment periods by
/// regressing the outcome on period, group and their interaction.
pub fn parallel_trend_test(panel: &PanelDataset) -> Result<TrendTestResult> {
    let periods = panel.periods();
    if periods.len() != 2 {
        return Err(Error::Invalid(format!(
            "trend test needs exactly two periods, found {}",
            periods.len()
        )));
    }
    let later = periods[1];
    for g in [false, true] {
        for &p in &periods {
            if !panel.records.iter().any(|r| r.group == g && r.period == p) {
                return Err(Error::Invalid(format!(
                    "no observations for group {} in period {p}",
                    u8::from(g)
                )));
            }
        }
    }
    let n = panel.records.len();
    let mut data = Vec::with_capacity(4 * n);
    let mut y = Vec::with_capacity(n);
    for r in &panel.records {
        let t = if r.period == later { 1.0 } else { 0.0 };
        let g = if r.group { 1.0 } else { 0.0 };
        data.extend_from_slice(&[1.0, t, g, t * g]);
        y.push(r.outcome);
    }
    let names = ["intercept", "period", "group", "period x group"].map(String::from);
    let fit = ols_fit_named(&RealMatrix::new(n, 4, data)?, &y, &names)?;
    let tau_hat = fit.coefficients[3];
    let se = fit.standard_errors[3];
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let p_value = if se > 1e-13 * scale {
        student_t_two_sided_p(tau_hat / se, fit.residual_df as f64)?
    } else if tau_hat.abs() <= 1e-12 * scale {
        1.0
    } else {
        0.0
    };
    Ok(TrendTestResult {
        tau_hat,
        se,
        df: fit.residual_df,
        p_value,
    })
}

/// Looks up the before/after outcomes of matched `(treated_id, control_id)`
/// pairs.
pub fn pairs_from_ids(
    panel: &PanelDataset,
    id_pairs: &[(String, String)],
    before: usize,
    after: usize,
) -> Result<Vec<MatchedPair>> {
    let index = panel.outcome_index();
    let mut missing = Vec::new();
    let mut note_missing = |id: &str| {
        if !missing.iter().any(|m: &String| m == id) {
            missing.push(id.to_string());
        }
    };
    for (t, c) in id_pairs {
        for id in [t, c] {
            if !index.contains_key(&(id.as_str(), before))
                || !index.contains_key(&(id.as_str(), after))
            {
                note_missing(id);
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingData(missing));
    }
    Ok(id_pairs
        .iter()
        .map(|(t, c)| MatchedPair {
            treated_after: index[&(t.as_str(), after)],
            treated_before: index[&(t.as_str(), before)],
            control_after: index[&(c.as_str(), after)],
            control_before: index[&(c.as_str(), before)],
        })
        .collect())
}

/// Joins a 1:1 assignment on `sample` to panel outcomes by unit id.
pub fn pairs_from_assignment(
    panel: &PanelDataset,
    sample: &CovariateSample,
    assignment: &PairAssignment,
    before: usize,
    after: usize,
) -> Result<Vec<MatchedPair>> {
    let treated = sample.treated_indices();
    let controls = sample.control_indices();
    let ids = sample.unit_ids();
    let id_pairs: Vec<(String, String)> = assignment
        .one_to_one()?
        .into_iter()
        .map(|(t, c)| (ids[treated[t]].clone(), ids[controls[c]].clone()))
        .collect();
    pairs_from_ids(panel, &id_pairs, before, after)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rec(unit: &str, group: bool, period: usize, outcome: f64) -> PanelRecord {
        PanelRecord {
            unit_id: unit.into(),
            group,
            period,
            outcome,
        }
    }

    #[test]
    fn group_means_table_values() {
        assert_eq!(group_means_did(1134.0, 1141.0, 921.0, 1022.0), 94.0);
        assert_eq!(group_means_did(1115.0, 1141.0, 976.0, 1022.0), 20.0);
        assert_abs_diff_eq!(
            group_means_did(143.4, 114.5, 99.5, 80.2),
            9.6,
            epsilon = 1e-9
        );
    }

    #[test]
    fn paired_zero_differences() {
        let p = MatchedPair {
            treated_after: 3.0,
            treated_before: 1.0,
            control_after: 5.0,
            control_before: 3.0,
        };
        let e = paired_did(&[p, p, p], 0.05).unwrap();
        assert_eq!((e.point, e.se, e.ci_low, e.ci_high), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(e.df, 2);
        assert!(paired_did(&[p], 0.05).is_err());
    }

    #[test]
    fn paired_single_record_difference() {
        let p = MatchedPair {
            treated_after: 10.0,
            treated_before: 8.0,
            control_after: 5.0,
            control_before: 4.0,
        };
        assert_eq!(p.difference(), 1.0);
    }

    #[test]
    fn regression_requires_complete_units() {
        let panel = PanelDataset::new(vec![
            rec("a", true, 0, 1.0),
            rec("a", true, 1, 2.0),
            rec("b", false, 0, 1.0),
            rec("c", false, 1, 1.0),
        ])
        .unwrap();
        assert_eq!(
            regression_did(&panel, 0.05),
            Err(Error::MissingData(vec!["b".into(), "c".into()]))
        );
    }

    #[test]
    fn panel_validation() {
        assert!(PanelDataset::new(vec![rec("a", true, 0, 1.0), rec("a", true, 0, 2.0)]).is_err());
        assert!(PanelDataset::new(vec![rec("a", true, 0, 1.0), rec("a", false, 1, 2.0)]).is_err());
        assert!(PanelDataset::new(vec![rec("a", true, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn regression_no_change_gives_zero() {
        let mut recs = Vec::new();
        for (i, g) in [true, true, false, false, false].iter().enumerate() {
            let u = format!("u{i}");
            recs.push(rec(&u, *g, 0, i as f64 * 1.7));
            recs.push(rec(&u, *g, 1, i as f64 * 1.7));
        }
        let e = regression_did(&PanelDataset::new(recs).unwrap(), 0.05).unwrap();
        assert_abs_diff_eq!(e.point, 0.0, epsilon = 1e-12);
        assert_eq!(e.df, 3);
    }

    #[test]
    fn trend_test_exact_divergence() {
        let mut recs = Vec::new();
        for i in 0..4 {
            let c = format!("c{i}");
            let t = format!("t{i}");
            let base = i as f64;
            recs.push(rec(&c, false, 0, base));
            recs.push(rec(&c, false, 1, base + 1.0));
            recs.push(rec(&t, true, 0, base + 5.0));
            recs.push(rec(&t, true, 1, base + 16.0));
        }
        let r = parallel_trend_test(&PanelDataset::new(recs).unwrap()).unwrap();
        assert_abs_diff_eq!(r.tau_hat, 10.0, epsilon = 1e-9);
        // Cell variance 5/3 over four units per cell.
        assert_abs_diff_eq!(r.se, (5.0f64 / 3.0).sqrt(), epsilon = 1e-9);
        assert_eq!(r.df, 12);
        use statrs::distribution::{ContinuousCDF, StudentsT};
        let t = StudentsT::new(0.0, 1.0, 12.0).unwrap();
        let expected = 2.0 * t.sf(10.0 / (5.0f64 / 3.0).sqrt());
        assert_abs_diff_eq!(r.p_value, expected, epsilon = 1e-12);
    }

    #[test]
    fn trend_test_identical_trends() {
        let mut recs = Vec::new();
        for i in 0..4 {
            let base = (i * i) as f64;
            recs.push(rec(&format!("c{i}"), false, 0, base));
            recs.push(rec(&format!("c{i}"), false, 1, base + 2.0 + i as f64));
            recs.push(rec(&format!("t{i}"), true, 0, base + 3.0));
            recs.push(rec(&format!("t{i}"), true, 1, base + 5.0 + i as f64));
        }
        let r = parallel_trend_test(&PanelDataset::new(recs).unwrap()).unwrap();
        assert_abs_diff_eq!(r.tau_hat, 0.0, epsilon = 1e-9);
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn trend_test_missing_cell() {
        let panel = PanelDataset::new(vec![
            rec("a", true, 0, 1.0),
            rec("b", false, 0, 1.0),
            rec("b", false, 1, 1.0),
            rec("c", false, 1, 1.0),
        ])
        .unwrap();
        assert!(parallel_trend_test(&panel).is_err());
    }

    #[test]
    fn pair_lookup() {
        let panel = PanelDataset::new(vec![
            rec("t", true, 0, 8.0),
            rec("t", true, 1, 10.0),
            rec("c", false, 0, 4.0),
            rec("c", false, 1, 5.0),
            rec("x", false, 0, 4.0),
        ])
        .unwrap();
        let pairs = pairs_from_ids(&panel, &[("t".into(), "c".into())], 0, 1).unwrap();
        assert_eq!(
            pairs,
            vec![MatchedPair {
                treated_after: 10.0,
                treated_before: 8.0,
                control_after: 5.0,
                control_before: 4.0
            }]
        );
        assert_eq!(pairs[0].difference(), 1.0);
        assert!(pairs_from_ids(&panel, &[], 0, 1).unwrap().is_empty());
        assert_eq!(
            pairs_from_ids(&panel, &[("t".into(), "x".into())], 0, 1),
            Err(Error::MissingData(vec!["x".into()]))
        );
    }
}
