//! Normalized probability mass over a label set.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Tolerance for accepting a distribution as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// A categorical distribution over string labels. Mass for absent labels is
/// zero; the stored masses sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalDistribution {
    masses: BTreeMap<String, f64>,
}

impl CategoricalDistribution {
    /// Relative frequencies of the given labels.
    pub fn from_labels<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: BTreeMap<String, f64> = BTreeMap::new();
        let mut n = 0usize;
        for label in labels {
            *counts.entry(label.as_ref().to_string()).or_insert(0.0) += 1.0;
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyInput("label list"));
        }
        for mass in counts.values_mut() {
            *mass /= n as f64;
        }
        Ok(Self { masses: counts })
    }

    /// Sums per-label weights and normalizes. Weights must be positive.
    pub fn from_weighted<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut masses: BTreeMap<String, f64> = BTreeMap::new();
        let mut total = 0.0;
        let mut n = 0usize;
        for (label, weight) in pairs {
            if weight <= 0.0 || !weight.is_finite() {
                return Err(Error::Invalid(format!(
                    "non-positive weight {weight} for label `{}`",
                    label.as_ref()
                )));
            }
            *masses.entry(label.as_ref().to_string()).or_insert(0.0) += weight;
            total += weight;
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyInput("weighted label list"));
        }
        for mass in masses.values_mut() {
            *mass /= total;
        }
        Ok(Self { masses })
    }

    /// Builds directly from label -> mass pairs without rescaling.
    /// The masses must already sum to 1 within [`NORMALIZATION_TOL`].
    pub fn from_masses<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut masses: BTreeMap<String, f64> = BTreeMap::new();
        for (label, mass) in pairs {
            if mass < 0.0 || !mass.is_finite() {
                return Err(Error::Invalid(format!("negative mass {mass}")));
            }
            *masses.entry(label.as_ref().to_string()).or_insert(0.0) += mass;
        }
        let dist = Self { masses };
        dist.check_normalized()?;
        Ok(dist)
    }

    /// Mass of a label; zero when absent.
    pub fn mass(&self, label: &str) -> f64 {
        self.masses.get(label).copied().unwrap_or(0.0)
    }

    /// Labels with nonzero recorded mass, in sorted order.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.masses.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.masses.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.values().sum()
    }

    /// Errors unless the total mass is 1 within [`NORMALIZATION_TOL`].
    pub fn check_normalized(&self) -> Result<()> {
        let sum = self.total_mass();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(())
    }

    /// Adds `eps` to every label of `support` (a superset of this
    /// distribution's labels) and renormalizes.
    pub fn smoothed<'a, I>(&self, support: I, eps: f64) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut masses: BTreeMap<String, f64> = BTreeMap::new();
        for label in support {
            masses.insert(label.to_string(), self.mass(label) + eps);
        }
        for (label, &mass) in &self.masses {
            masses.entry(label.clone()).or_insert(mass + eps);
        }
        let total: f64 = masses.values().sum();
        for mass in masses.values_mut() {
            *mass /= total;
        }
        Self { masses }
    }
}
