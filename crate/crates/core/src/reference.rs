//! Published reference values shipped with the crate (`data/reference.toml`).

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::regress::Family;

const RAW: &str = include_str!("../data/reference.toml");

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct MethodRef {
    pub c_mean: Option<f64>,
    pub c_sd: Option<f64>,
    pub c_mse: Option<f64>,
    pub risk: f64,
    pub risk_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct AgreementRef {
    pub all_equal: f64,
    pub exactly_four: f64,
    pub at_least_three: f64,
    pub all_different: f64,
    pub maxj_eq_thr: f64,
    pub max_thr_win_distinct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct OverpenRef {
    pub c_star: f64,
    pub improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Reference {
    pub easy: BTreeMap<String, MethodRef>,
    pub hard: BTreeMap<String, MethodRef>,
    pub agreement: BTreeMap<String, AgreementRef>,
    pub overpen: OverpenRef,
}

impl Reference {
    pub fn load() -> Self {
        toml::from_str(RAW).expect("embedded reference table parses")
    }

    pub fn methods(&self, setting: Family) -> Option<&BTreeMap<String, MethodRef>> {
        match setting {
            Family::Easy => Some(&self.easy),
            Family::Hard => Some(&self.hard),
            Family::Kernel => None,
        }
    }

    pub fn agreement(&self, setting: Family) -> Option<&AgreementRef> {
        match setting {
            Family::Easy => self.agreement.get("easy"),
            Family::Hard => self.agreement.get("hard"),
            Family::Kernel => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_table_loads() {
        let r = Reference::load();
        assert_eq!(r.easy["maxjump"].c_mean, Some(1.09));
        assert_eq!(r.hard["threshold"].risk, 1.258);
        assert_eq!(r.easy["mallows"].c_mean, None);
        assert_eq!(r.agreement(Family::Easy).unwrap().all_equal, 0.524);
        assert_eq!(r.overpen.c_star, 1.12);
        for m in crate::sim::METHODS {
            assert!(r.easy.contains_key(m) && r.hard.contains_key(m), "{m}");
        }
    }
}
