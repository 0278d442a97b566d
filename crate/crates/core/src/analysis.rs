//! Joins of score tables against external measurements.

use std::collections::BTreeMap;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{AbxError, Result};
use crate::stats::{ols_regress, pearson, spearman, CorrelationResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTerm {
    pub term: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub response: String,
    pub n: usize,
    pub r_squared: f64,
    /// Intercept first.
    pub terms: Vec<RegressionTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedCorrelation {
    pub x: String,
    pub y: String,
    pub pearson: CorrelationResult,
    pub spearman: CorrelationResult,
}

/// Keys present in every map, in order.
fn common_keys<K: Ord + Clone>(maps: &[&BTreeMap<K, f64>]) -> Vec<K> {
    let Some((first, rest)) = maps.split_first() else {
        return Vec::new();
    };
    first
        .keys()
        .filter(|k| rest.iter().all(|m| m.contains_key(*k)))
        .cloned()
        .collect()
}

/// Regresses `response` on the named predictors over their shared keys.
pub fn regress_joined<K: Ord + Clone + Debug>(
    response_name: &str,
    response: &BTreeMap<K, f64>,
    predictors: &[(&str, &BTreeMap<K, f64>)],
) -> Result<RegressionReport> {
    let mut maps = vec![response];
    maps.extend(predictors.iter().map(|(_, m)| *m));
    let keys = common_keys(&maps);
    let y: Vec<f64> = keys.iter().map(|k| response[k]).collect();
    let cols: Vec<Vec<f64>> = predictors
        .iter()
        .map(|(_, m)| keys.iter().map(|k| m[k]).collect())
        .collect();
    let fit = ols_regress(&y, &cols)?;
    let names = std::iter::once("intercept").chain(predictors.iter().map(|(n, _)| *n));
    let terms = names
        .enumerate()
        .map(|(i, name)| RegressionTerm {
            term: name.to_string(),
            coefficient: fit.coefficients[i],
            std_error: fit.std_errors[i],
            t_value: fit.t_values[i],
            p_value: fit.p_values[i],
        })
        .collect();
    Ok(RegressionReport {
        response: response_name.to_string(),
        n: fit.n,
        r_squared: fit.r_squared,
        terms,
    })
}

/// Pearson and Spearman correlation over the keys two maps share.
pub fn correlate_joined<K: Ord + Clone>(
    x_name: &str,
    x: &BTreeMap<K, f64>,
    y_name: &str,
    y: &BTreeMap<K, f64>,
) -> Result<PairedCorrelation> {
    let keys = common_keys(&[x, y]);
    if keys.is_empty() {
        return Err(AbxError::Stats(format!("{x_name} and {y_name} share no keys")));
    }
    let xs: Vec<f64> = keys.iter().map(|k| x[k]).collect();
    let ys: Vec<f64> = keys.iter().map(|k| y[k]).collect();
    Ok(PairedCorrelation {
        x: x_name.to_string(),
        y: y_name.to_string(),
        pearson: pearson(&xs, &ys)?,
        spearman: spearman(&xs, &ys)?,
    })
}
