//! Deterministic generators for the stylized audit scenarios: a basic hiring
//! table, the four-cluster gender/marital geometry, and a protected attribute
//! with a tunable proxy.
//!
//! Everything derives from the seeded splitmix64 stream; identical arguments
//! give identical fingerprints. Outcome assignment uses exact per-cluster
//! counts (the top rows by feature sum) rather than independent coin flips,
//! so configured base rates are hit up to rounding and remain predictable
//! from the features.

use crate::dataset::{ColumnData, ColumnSchema, Dataset, Dtype, Role};
use crate::error::{Error, Result};
use crate::rng::Rng64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const GENDERS: [&str; 2] = ["F", "M"];
const MARITAL: [&str; 2] = ["married", "single"];

/// Cluster geometry and outcome rates for [`gen_gender_marital`], keyed by
/// "gender|marital". Defaults reproduce the unfair Panel-A style geometry:
/// male clusters sit high on both features with high hire rates, the married
/// female cluster drifts toward the male side, and a linear separator ends
/// up aligned with gender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    pub cluster_means: BTreeMap<String, [f64; 2]>,
    pub cluster_spread: f64,
    pub base_rates: BTreeMap<String, f64>,
    pub proxy_target_tau: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        let cluster_means = BTreeMap::from([
            ("F|married".to_string(), [1.2, 1.8]),
            ("F|single".to_string(), [0.2, 0.4]),
            ("M|married".to_string(), [2.0, 2.0]),
            ("M|single".to_string(), [2.4, 0.6]),
        ]);
        let base_rates = BTreeMap::from([
            ("F|married".to_string(), 0.35),
            ("F|single".to_string(), 0.10),
            ("M|married".to_string(), 0.85),
            ("M|single".to_string(), 0.65),
        ]);
        Self {
            cluster_means,
            cluster_spread: 0.45,
            base_rates,
            proxy_target_tau: 0.8,
        }
    }
}

impl ScenarioParams {
    /// Gender-symmetric variant: mirrored cluster geometry and identical
    /// rates, so a trained model cannot separate on gender.
    pub fn symmetric() -> Self {
        let cluster_means = BTreeMap::from([
            ("F|married".to_string(), [1.5, 1.8]),
            ("F|single".to_string(), [0.5, 0.5]),
            ("M|married".to_string(), [1.5, 1.8]),
            ("M|single".to_string(), [0.5, 0.5]),
        ]);
        let base_rates = BTreeMap::from([
            ("F|married".to_string(), 0.6),
            ("F|single".to_string(), 0.25),
            ("M|married".to_string(), 0.6),
            ("M|single".to_string(), 0.25),
        ]);
        Self {
            cluster_means,
            cluster_spread: 0.45,
            base_rates,
            proxy_target_tau: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.cluster_spread <= 0.0 {
            return Err(Error::BadParams(format!(
                "cluster_spread must be positive; got {}",
                self.cluster_spread
            )));
        }
        for g in GENDERS {
            for m in MARITAL {
                let key = format!("{g}|{m}");
                if !self.cluster_means.contains_key(&key) {
                    return Err(Error::BadParams(format!("missing cluster_means['{key}']")));
                }
                match self.base_rates.get(&key) {
                    Some(r) if (0.0..=1.0).contains(r) => {}
                    Some(r) => {
                        return Err(Error::BadParams(format!(
                            "base_rates['{key}'] = {r} outside [0, 1]"
                        )))
                    }
                    None => return Err(Error::BadParams(format!("missing base_rates['{key}']"))),
                }
            }
        }
        Ok(())
    }
}

/// If a generated outcome column collapsed to one class, flip the most
/// extreme row so downstream training always sees both classes.
fn ensure_both_classes(outcome: &mut [u8], strength: &[f64]) {
    if outcome.iter().all(|&y| y == 1) {
        let weakest = (0..strength.len())
            .min_by(|&a, &b| strength[a].total_cmp(&strength[b]))
            .unwrap();
        outcome[weakest] = 0;
    } else if outcome.iter().all(|&y| y == 0) {
        let strongest = (0..strength.len())
            .max_by(|&a, &b| strength[a].total_cmp(&strength[b]))
            .unwrap();
        outcome[strongest] = 1;
    }
}

/// Basic hiring table: binary gender (independent of everything else), two
/// numeric scores, and an outcome linearly separable in the scores with a
/// margin of 0.2.
pub fn gen_hiring_basic(n: usize, seed: u64) -> Result<Dataset> {
    if n < 20 {
        return Err(Error::TooSmall { min: 20, got: n });
    }
    let mut rng = Rng64::new(seed);

    let mut gender: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    rng.shuffle(&mut gender);

    let mut aptitude = Vec::with_capacity(n);
    let mut experience = Vec::with_capacity(n);
    let mut outcome = Vec::with_capacity(n);
    let mut strength = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, e) = loop {
            let a = rng.next_normal();
            let e = rng.next_normal();
            if (a + e).abs() >= 0.2 {
                break (a, e);
            }
        };
        aptitude.push(a);
        experience.push(e);
        strength.push(a + e);
        outcome.push((a + e > 0.0) as u8);
    }
    ensure_both_classes(&mut outcome, &strength);

    Dataset::new(
        vec![
            ColumnSchema::new("gender", Role::Protected, Dtype::Binary),
            ColumnSchema::new("aptitude", Role::Feature, Dtype::Numeric),
            ColumnSchema::new("experience", Role::Feature, Dtype::Numeric),
            ColumnSchema::new("hired", Role::Outcome, Dtype::Binary),
        ],
        vec![
            ColumnData::Binary(gender),
            ColumnData::Numeric(aptitude),
            ColumnData::Numeric(experience),
            ColumnData::Binary(outcome),
        ],
        n,
    )
}

/// Four clusters keyed by (gender, marital) over two numeric features.
/// Within each cluster the configured share of rows with the highest feature
/// sum is hired, so outcomes are predictable from features while per-cluster
/// rates match `base_rates` exactly up to rounding.
pub fn gen_gender_marital(n: usize, seed: u64, params: &ScenarioParams) -> Result<Dataset> {
    if n < 100 {
        return Err(Error::TooSmall { min: 100, got: n });
    }
    params.validate()?;
    let mut rng = Rng64::new(seed);

    let keys: Vec<String> = params.cluster_means.keys().cloned().collect();
    let mut cluster: Vec<usize> = (0..n).map(|i| i % keys.len()).collect();
    rng.shuffle(&mut cluster);

    let mut gender = Vec::with_capacity(n);
    let mut marital = Vec::with_capacity(n);
    let mut aptitude = Vec::with_capacity(n);
    let mut experience = Vec::with_capacity(n);
    for &c in &cluster {
        let key = &keys[c];
        let (g, m) = key.split_once('|').expect("validated key");
        gender.push(g.to_string());
        marital.push(m.to_string());
        let mean = params.cluster_means[key];
        aptitude.push(mean[0] + params.cluster_spread * rng.next_normal());
        experience.push(mean[1] + params.cluster_spread * rng.next_normal());
    }

    let strength: Vec<f64> = aptitude
        .iter()
        .zip(&experience)
        .map(|(a, e)| a + e)
        .collect();
    let mut outcome = vec![0u8; n];
    for (ci, key) in keys.iter().enumerate() {
        let mut rows: Vec<usize> = (0..n).filter(|&r| cluster[r] == ci).collect();
        rows.sort_by(|&a, &b| strength[b].total_cmp(&strength[a]).then(a.cmp(&b)));
        let hires = (params.base_rates[key] * rows.len() as f64).round() as usize;
        for &r in rows.iter().take(hires) {
            outcome[r] = 1;
        }
    }
    ensure_both_classes(&mut outcome, &strength);

    Dataset::new(
        vec![
            ColumnSchema::new("gender", Role::Protected, Dtype::Categorical),
            ColumnSchema::new("marital", Role::Protected, Dtype::Categorical),
            ColumnSchema::new("aptitude", Role::Feature, Dtype::Numeric),
            ColumnSchema::new("experience", Role::Feature, Dtype::Numeric),
            ColumnSchema::new("hired", Role::Outcome, Dtype::Binary),
        ],
        vec![
            ColumnData::Categorical(gender),
            ColumnData::Categorical(marital),
            ColumnData::Numeric(aptitude),
            ColumnData::Numeric(experience),
            ColumnData::Binary(outcome),
        ],
        n,
    )
}

/// Protected binary attribute plus a "region_code" feature coupled to it so
/// that their tau-b lands on `target_tau` up to count rounding.
///
/// Both columns are balanced by construction and the coupling flips an exact
/// share q = (1 - |tau|) / 2 of each class, which for balanced binary pairs
/// gives tau-b = 1 - 2q. The outcome depends on the two clean features and,
/// deliberately, on the region code: proxies that matter for accuracy are
/// the interesting case for the removability question.
pub fn gen_proxy(n: usize, seed: u64, target_tau: f64) -> Result<Dataset> {
    if n < 100 {
        return Err(Error::TooSmall { min: 100, got: n });
    }
    if !target_tau.is_finite() || target_tau.abs() > 0.95 {
        return Err(Error::BadTau(target_tau));
    }
    let mut rng = Rng64::new(seed);

    let mut group: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    rng.shuffle(&mut group);

    // Exact-count noisy coupling.
    let q = (1.0 - target_tau.abs()) / 2.0;
    let mut region = vec![0u8; n];
    for class in [0u8, 1u8] {
        let mut rows: Vec<usize> = (0..n).filter(|&r| group[r] == class).collect();
        rng.shuffle(&mut rows);
        let flips = (q * rows.len() as f64).round() as usize;
        for (i, &r) in rows.iter().enumerate() {
            let aligned = group[r];
            region[r] = if i < flips { 1 - aligned } else { aligned };
        }
    }
    if target_tau < 0.0 {
        for z in region.iter_mut() {
            *z = 1 - *z;
        }
    }

    let aptitude: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
    let experience: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
    let strength: Vec<f64> = (0..n)
        .map(|r| aptitude[r] + experience[r] + 1.2 * (2.0 * region[r] as f64 - 1.0))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| strength[b].total_cmp(&strength[a]).then(a.cmp(&b)));
    let mut outcome = vec![0u8; n];
    for &r in order.iter().take(n / 2) {
        outcome[r] = 1;
    }

    Dataset::new(
        vec![
            ColumnSchema::new("group", Role::Protected, Dtype::Binary),
            ColumnSchema::new("region_code", Role::Feature, Dtype::Numeric),
            ColumnSchema::new("aptitude", Role::Feature, Dtype::Numeric),
            ColumnSchema::new("experience", Role::Feature, Dtype::Numeric),
            ColumnSchema::new("hired", Role::Outcome, Dtype::Binary),
        ],
        vec![
            ColumnData::Binary(group),
            ColumnData::Numeric(region.iter().map(|z| *z as f64).collect()),
            ColumnData::Numeric(aptitude),
            ColumnData::Numeric(experience),
            ColumnData::Binary(outcome),
        ],
        n,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::kendall_tau;
    use crate::dataset::{load_csv_reader, MissingPolicy};

    #[test]
    fn hiring_basic_shape_and_determinism() {
        let ds = gen_hiring_basic(200, 1).unwrap();
        assert_eq!(ds.n_rows(), 200);
        let labels = ds.labels().unwrap();
        assert!(labels.contains(&1));
        assert!(labels.contains(&0));
        assert_eq!(
            ds.fingerprint(),
            gen_hiring_basic(200, 1).unwrap().fingerprint()
        );
        assert_ne!(
            ds.fingerprint(),
            gen_hiring_basic(200, 2).unwrap().fingerprint()
        );
        assert!(matches!(
            gen_hiring_basic(5, 1).unwrap_err(),
            Error::TooSmall { min: 20, .. }
        ));
    }

    #[test]
    fn hiring_basic_csv_roundtrip() {
        let ds = gen_hiring_basic(50, 9).unwrap();
        let mut csv = Vec::new();
        ds.write_csv(&mut csv).unwrap();
        let (back, _) =
            load_csv_reader(csv.as_slice(), ds.schema(), MissingPolicy::Impute).unwrap();
        assert_eq!(ds.fingerprint(), back.fingerprint());
    }

    #[test]
    fn gender_marital_cluster_rates_match() {
        let params = ScenarioParams::default();
        let ds = gen_gender_marital(2000, 42, &params).unwrap();
        let gender = ds.group_labels("gender").unwrap();
        let marital = ds.group_labels("marital").unwrap();
        let labels = ds.labels().unwrap();
        for (key, rate) in &params.base_rates {
            let (g, m) = key.split_once('|').unwrap();
            let rows: Vec<usize> = (0..ds.n_rows())
                .filter(|&r| gender[r] == g && marital[r] == m)
                .collect();
            let hires = rows.iter().filter(|&&r| labels[r] == 1).count() as f64;
            let observed = hires / rows.len() as f64;
            // exact-count assignment: rounding error only, well within 3 sigma
            let sigma = (rate * (1.0 - rate) / rows.len() as f64).sqrt();
            assert!(
                (observed - rate).abs() <= 3.0 * sigma.max(1e-3),
                "{key}: observed {observed} vs {rate}"
            );
        }
    }

    #[test]
    fn gender_marital_determinism_and_params() {
        let params = ScenarioParams::default();
        let a = gen_gender_marital(200, 7, &params).unwrap();
        let b = gen_gender_marital(200, 7, &params).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert!(matches!(
            gen_gender_marital(50, 7, &params).unwrap_err(),
            Error::TooSmall { .. }
        ));
        let mut bad = params.clone();
        bad.cluster_spread = 0.0;
        assert!(matches!(
            gen_gender_marital(200, 7, &bad).unwrap_err(),
            Error::BadParams(_)
        ));
        let mut bad_rate = params;
        bad_rate.base_rates.insert("F|single".into(), 1.5);
        assert!(matches!(
            gen_gender_marital(200, 7, &bad_rate).unwrap_err(),
            Error::BadParams(_)
        ));
    }

    fn proxy_tau(ds: &Dataset) -> f64 {
        let group: Vec<f64> = match ds.column("group").unwrap().1 {
            ColumnData::Binary(v) => v.iter().map(|b| *b as f64).collect(),
            _ => panic!(),
        };
        let region: Vec<f64> = match ds.column("region_code").unwrap().1 {
            ColumnData::Numeric(v) => v.clone(),
            _ => panic!(),
        };
        kendall_tau(&group, &region).unwrap().unwrap()
    }

    #[test]
    fn proxy_tau_calibration() {
        let ds = gen_proxy(1000, 3, 0.8).unwrap();
        let tau = proxy_tau(&ds);
        assert!((0.75..=0.85).contains(&tau), "tau {tau}");

        let ds0 = gen_proxy(1000, 3, 0.0).unwrap();
        let tau0 = proxy_tau(&ds0);
        assert!(tau0.abs() < 0.1, "tau {tau0}");

        let neg = gen_proxy(1000, 5, -0.6).unwrap();
        let tau_neg = proxy_tau(&neg);
        assert!((-0.65..=-0.55).contains(&tau_neg), "tau {tau_neg}");
    }

    #[test]
    fn proxy_rejects_bad_args() {
        assert!(matches!(gen_proxy(1000, 1, 0.99).unwrap_err(), Error::BadTau(_)));
        assert!(matches!(
            gen_proxy(50, 1, 0.5).unwrap_err(),
            Error::TooSmall { .. }
        ));
    }

    #[test]
    fn proxy_outcome_has_both_classes() {
        let ds = gen_proxy(1000, 11, 0.8).unwrap();
        let labels = ds.labels().unwrap();
        let positives = labels.iter().filter(|&&y| y == 1).count();
        assert_eq!(positives, 500);
    }
}
