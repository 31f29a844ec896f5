//! Inclusion/exclusion criteria for the planning day.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Forecast;

pub const DEFAULT_MANDATORY_THRESHOLD: f64 = 0.80;
pub const DEFAULT_OPTIONAL_THRESHOLD: f64 = 0.50;

/// How a fill level is compared with a threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `fill > threshold`; a fill equal to a threshold falls to the lower class.
    #[default]
    Strict,
    /// `fill >= threshold`.
    Inclusive,
}

impl Comparison {
    fn above(self, fill: f64, threshold: f64) -> bool {
        match self {
            Comparison::Strict => fill > threshold,
            Comparison::Inclusive => fill >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionCriteria {
    pub mandatory_threshold: f64,
    pub optional_threshold: f64,
    pub forced_include: BTreeSet<String>,
    pub forced_exclude: BTreeSet<String>,
    pub comparison: Comparison,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        Self {
            mandatory_threshold: DEFAULT_MANDATORY_THRESHOLD,
            optional_threshold: DEFAULT_OPTIONAL_THRESHOLD,
            forced_include: BTreeSet::new(),
            forced_exclude: BTreeSet::new(),
            comparison: Comparison::Strict,
        }
    }
}

impl SelectionCriteria {
    pub fn validate(&self) -> Result<()> {
        let (o, m) = (self.optional_threshold, self.mandatory_threshold);
        if !(0.0 <= o && o <= m && m <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "thresholds must satisfy 0 <= optional ({o}) <= mandatory ({m}) <= 1"
            )));
        }
        if let Some(id) = self.forced_include.intersection(&self.forced_exclude).next() {
            return Err(Error::InvalidParameter(format!(
                "container {id} is both force-included and force-excluded"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionClass {
    Mandatory,
    Optional,
    Excluded,
}

impl SelectionClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionClass::Mandatory => "mandatory",
            SelectionClass::Optional => "optional",
            SelectionClass::Excluded => "excluded",
        }
    }
}

/// The rule that decided a container's class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reason {
    #[serde(rename = "above mandatory threshold")]
    AboveMandatory,
    #[serde(rename = "above optional threshold")]
    AboveOptional,
    #[serde(rename = "below optional threshold")]
    BelowOptional,
    #[serde(rename = "forced")]
    Forced,
    #[serde(rename = "forced exclude")]
    ForcedExclude,
    #[serde(rename = "no data")]
    NoData,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::AboveMandatory => "above mandatory threshold",
            Reason::AboveOptional => "above optional threshold",
            Reason::BelowOptional => "below optional threshold",
            Reason::Forced => "forced",
            Reason::ForcedExclude => "forced exclude",
            Reason::NoData => "no data",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub mandatory: BTreeSet<String>,
    pub optional: BTreeSet<String>,
    pub excluded: BTreeSet<String>,
    pub reasons: BTreeMap<String, Reason>,
    /// Forecast fill used for each container that had one.
    pub fills: BTreeMap<String, f64>,
}

impl SelectionResult {
    pub fn class_of(&self, id: &str) -> Option<SelectionClass> {
        if self.mandatory.contains(id) {
            Some(SelectionClass::Mandatory)
        } else if self.optional.contains(id) {
            Some(SelectionClass::Optional)
        } else if self.excluded.contains(id) {
            Some(SelectionClass::Excluded)
        } else {
            None
        }
    }

    /// Mandatory and optional containers, in id order.
    pub fn selected(&self) -> BTreeSet<String> {
        self.mandatory.union(&self.optional).cloned().collect()
    }
}

/// Classifies every container of `universe`.
///
/// Thresholds are applied first, then forced exclusions and finally forced
/// inclusions. A container without a forecast is excluded with reason
/// "no data" unless forced in.
pub fn select(universe: &[String], forecasts: &[Forecast], criteria: &SelectionCriteria) -> Result<SelectionResult> {
    criteria.validate()?;
    let mut seen = BTreeSet::new();
    for id in universe {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    for id in criteria.forced_include.iter().chain(&criteria.forced_exclude) {
        if !seen.contains(id.as_str()) {
            return Err(Error::UnknownContainer(id.clone()));
        }
    }
    let mut fill_of: HashMap<&str, f64> = HashMap::new();
    for f in forecasts {
        if fill_of.insert(f.container_id.as_str(), f.predicted_fill).is_some() {
            return Err(Error::InvalidParameter(format!(
                "more than one forecast for container {}",
                f.container_id
            )));
        }
    }

    let mut out = SelectionResult::default();
    for id in universe {
        let fill = fill_of.get(id.as_str()).copied();
        let (class, reason) = match fill {
            _ if criteria.forced_include.contains(id) => (SelectionClass::Mandatory, Reason::Forced),
            _ if criteria.forced_exclude.contains(id) => (SelectionClass::Excluded, Reason::ForcedExclude),
            None => (SelectionClass::Excluded, Reason::NoData),
            Some(f) if criteria.comparison.above(f, criteria.mandatory_threshold) => {
                (SelectionClass::Mandatory, Reason::AboveMandatory)
            }
            Some(f) if criteria.comparison.above(f, criteria.optional_threshold) => {
                (SelectionClass::Optional, Reason::AboveOptional)
            }
            Some(_) => (SelectionClass::Excluded, Reason::BelowOptional),
        };
        if let Some(f) = fill {
            out.fills.insert(id.clone(), f);
        }
        out.reasons.insert(id.clone(), reason);
        match class {
            SelectionClass::Mandatory => out.mandatory.insert(id.clone()),
            SelectionClass::Optional => out.optional.insert(id.clone()),
            SelectionClass::Excluded => out.excluded.insert(id.clone()),
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelTag;
    use chrono::NaiveDate;

    fn fc(id: &str, fill: f64) -> Forecast {
        Forecast {
            container_id: id.into(),
            date: NaiveDate::from_ymd_opt(2025, 12, 1).unwrap(),
            predicted_fill: fill,
            overflow: false,
            model_tag: ModelTag::Gp,
        }
    }

    fn ids(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn threshold_boundaries() {
        let u = ids(&["a", "b", "c", "d"]);
        let r = select(
            &u,
            &[fc("a", 0.85), fc("b", 0.80), fc("c", 0.50), fc("d", 0.51)],
            &SelectionCriteria::default(),
        )
        .unwrap();
        assert_eq!(r.class_of("a"), Some(SelectionClass::Mandatory));
        assert_eq!(r.class_of("b"), Some(SelectionClass::Optional));
        assert_eq!(r.class_of("c"), Some(SelectionClass::Excluded));
        assert_eq!(r.class_of("d"), Some(SelectionClass::Optional));
    }

    #[test]
    fn inclusive_mode_moves_ties_up() {
        let c = SelectionCriteria {
            comparison: Comparison::Inclusive,
            ..Default::default()
        };
        let r = select(&ids(&["b", "c"]), &[fc("b", 0.80), fc("c", 0.50)], &c).unwrap();
        assert_eq!(r.class_of("b"), Some(SelectionClass::Mandatory));
        assert_eq!(r.class_of("c"), Some(SelectionClass::Optional));
    }

    #[test]
    fn overrides_and_missing_data() {
        let c = SelectionCriteria {
            forced_include: ["x".to_string()].into(),
            forced_exclude: ["y".to_string()].into(),
            ..Default::default()
        };
        let r = select(&ids(&["x", "y", "z"]), &[fc("x", 0.40), fc("y", 0.99)], &c).unwrap();
        assert_eq!(r.class_of("x"), Some(SelectionClass::Mandatory));
        assert_eq!(r.reasons["x"], Reason::Forced);
        assert_eq!(r.class_of("y"), Some(SelectionClass::Excluded));
        assert_eq!(r.reasons["z"], Reason::NoData);
        assert_eq!(r.reasons["z"].to_string(), "no data");
    }

    #[test]
    fn invalid_criteria_are_rejected() {
        let bad = SelectionCriteria {
            optional_threshold: 0.9,
            ..Default::default()
        };
        assert!(select(&[], &[], &bad).is_err());
        let both = SelectionCriteria {
            forced_include: ["a".to_string()].into(),
            forced_exclude: ["a".to_string()].into(),
            ..Default::default()
        };
        assert!(select(&ids(&["a"]), &[], &both).is_err());
        let unknown = SelectionCriteria {
            forced_include: ["q".to_string()].into(),
            ..Default::default()
        };
        assert!(matches!(select(&ids(&["a"]), &[], &unknown), Err(Error::UnknownContainer(_))));
    }
}
