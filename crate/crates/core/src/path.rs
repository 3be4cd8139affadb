//! The piecewise-constant map C -> argmin_m { empirical_risk(m) + C * pen0(m) }.
//!
//! The path is traced exactly from the record values: starting from the
//! lowest-risk model, each step moves to the model reached first as C grows.

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::collection::{Collection, ModelId};

/// A breakpoint value; the path always ends with `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Breakpoint {
    Finite(f64),
    Infinite,
}

impl Breakpoint {
    pub fn value(self) -> f64 {
        match self {
            Breakpoint::Finite(v) => v,
            Breakpoint::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Breakpoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Breakpoint::Finite(v) => s.serialize_f64(*v),
            Breakpoint::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Breakpoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Breakpoint;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Breakpoint, E> {
                Ok(Breakpoint::Finite(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Breakpoint, E> {
                Ok(Breakpoint::Finite(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Breakpoint, E> {
                Ok(Breakpoint::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Breakpoint, E> {
                if v == "inf" {
                    Ok(Breakpoint::Infinite)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("penalty constant must be a non-negative number, got {0}")]
    NegativeC(f64),
}

/// Breakpoints `0 = C_0 < C_1 < ... < C_imax < inf` and the model selected on
/// each half-open segment `[C_i, C_{i+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenalizedPath {
    pub breakpoints: Vec<Breakpoint>,
    pub models: Vec<ModelId>,
    /// Position of each segment's model in the source collection.
    #[serde(skip)]
    pub positions: Vec<usize>,
}

impl PenalizedPath {
    /// Number of finite jumps, `i_max`.
    pub fn i_max(&self) -> usize {
        self.models.len() - 1
    }

    /// Finite breakpoints `C_0..=C_imax`.
    pub fn starts(&self) -> Vec<f64> {
        self.breakpoints[..self.models.len()].iter().map(|b| b.value()).collect()
    }

    pub fn start(&self, i: usize) -> f64 {
        self.breakpoints[i].value()
    }

    /// The complexity of each segment's model.
    pub fn complexities(&self, collection: &Collection) -> Vec<f64> {
        self.positions.iter().map(|&p| collection.records()[p].complexity).collect()
    }

    /// Segment index containing `c`.
    pub fn segment(&self, c: f64) -> Result<usize, PathError> {
        if !(c >= 0.0) {
            return Err(PathError::NegativeC(c));
        }
        let finite = &self.breakpoints[..self.models.len()];
        Ok(finite.partition_point(|b| b.value() <= c) - 1)
    }
}

/// Traces the full path.
pub fn compute_path(collection: &Collection) -> PenalizedPath {
    let recs = collection.records();
    let mut cur = 0;
    for (i, r) in recs.iter().enumerate() {
        if r.empirical_risk < recs[cur].empirical_risk {
            cur = i;
        }
    }
    let mut breakpoints = vec![Breakpoint::Finite(0.0)];
    let mut positions = vec![cur];
    loop {
        let (f0, g0) = (recs[cur].empirical_risk, recs[cur].pen0);
        let mut next: Option<(usize, f64)> = None;
        for (i, r) in recs.iter().enumerate() {
            if r.empirical_risk > f0 && r.pen0 < g0 {
                let ratio = (r.empirical_risk - f0) / (g0 - r.pen0);
                if next.map_or(true, |(_, best)| ratio < best) {
                    next = Some((i, ratio));
                }
            }
        }
        match next {
            Some((i, c)) => {
                breakpoints.push(Breakpoint::Finite(c));
                positions.push(i);
                cur = i;
            }
            None => break,
        }
    }
    breakpoints.push(Breakpoint::Infinite);
    let models = positions.iter().map(|&p| recs[p].id).collect();
    PenalizedPath { breakpoints, models, positions }
}

/// Model selected at penalty constant `c`.
pub fn evaluate_path(path: &PenalizedPath, c: f64) -> Result<ModelId, PathError> {
    Ok(path.models[path.segment(c)?])
}

/// One edge of the lower convex envelope of the (pen0, empirical_risk) cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeEdge {
    pub from: ModelId,
    pub to: ModelId,
    pub slope: f64,
}

/// Edges of the lower convex envelope visited by the path, ordered from the
/// lowest-risk vertex towards smaller pen0. Each slope equals minus the
/// breakpoint at which the path crosses that edge.
pub fn lower_convex_envelope(collection: &Collection) -> Vec<EnvelopeEdge> {
    let path = compute_path(collection);
    let recs = collection.records();
    path.positions
        .windows(2)
        .map(|w| {
            let (a, b) = (&recs[w[0]], &recs[w[1]]);
            EnvelopeEdge {
                from: a.id,
                to: b.id,
                slope: (b.empirical_risk - a.empirical_risk) / (b.pen0 - a.pen0),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collection::{brute_force_argmin, EstimatorRecord};

    fn coll(f: &[f64], g: &[f64]) -> Collection {
        Collection::new(
            f.iter()
                .zip(g)
                .enumerate()
                .map(|(i, (&f, &g))| EstimatorRecord {
                    id: ModelId(i as u64),
                    empirical_risk: f,
                    pen0: g,
                    pen1: 2.0 * g,
                    complexity: g,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn three_models_all_on_envelope() {
        let c = coll(&[3.0, 1.0, 0.0], &[1.0, 2.0, 3.0]);
        let p = compute_path(&c);
        assert_eq!(
            p.breakpoints,
            vec![Breakpoint::Finite(0.0), Breakpoint::Finite(1.0), Breakpoint::Finite(2.0), Breakpoint::Infinite]
        );
        assert_eq!(p.models, vec![ModelId(2), ModelId(1), ModelId(0)]);
        let env = lower_convex_envelope(&c);
        assert_eq!(env.iter().map(|e| e.slope).collect::<Vec<_>>(), vec![-1.0, -2.0]);
    }

    #[test]
    fn skipped_vertex() {
        // Middle model sits above the chord only when pen0 is stretched.
        let c = coll(&[3.0, 1.0, 0.0], &[1.0, 2.0, 5.0]);
        let p = compute_path(&c);
        assert_eq!(p.starts(), vec![0.0, 1.0 / 3.0, 2.0]);
        assert_eq!(p.models, vec![ModelId(2), ModelId(1), ModelId(0)]);
        let c = coll(&[3.0, 2.5, 0.0], &[1.0, 2.0, 3.0]);
        let p = compute_path(&c);
        assert_eq!(p.starts(), vec![0.0, 1.5]);
        assert_eq!(p.models, vec![ModelId(2), ModelId(0)]);
    }

    #[test]
    fn single_record() {
        let c = coll(&[1.0], &[1.0]);
        let p = compute_path(&c);
        assert_eq!(p.i_max(), 0);
        assert_eq!(p.breakpoints, vec![Breakpoint::Finite(0.0), Breakpoint::Infinite]);
        assert!(lower_convex_envelope(&c).is_empty());
    }

    #[test]
    fn half_open_segments() {
        let c = coll(&[3.0, 1.0, 0.0], &[1.0, 2.0, 3.0]);
        let p = compute_path(&c);
        assert_eq!(evaluate_path(&p, 0.0), Ok(ModelId(2)));
        assert_eq!(evaluate_path(&p, 0.999), Ok(ModelId(2)));
        assert_eq!(evaluate_path(&p, 1.0), Ok(ModelId(1)));
        assert_eq!(evaluate_path(&p, 2.0), Ok(ModelId(0)));
        assert_eq!(evaluate_path(&p, 1e300), Ok(ModelId(0)));
        assert_eq!(evaluate_path(&p, -0.5), Err(PathError::NegativeC(-0.5)));
        assert!(evaluate_path(&p, f64::NAN).is_err());
    }

    #[test]
    fn equal_risk_minimisers_pick_smaller_pen0() {
        let c = coll(&[0.0, 0.0, 2.0], &[3.0, 2.0, 1.0]);
        let p = compute_path(&c);
        assert_eq!(p.models[0], ModelId(1));
    }

    #[test]
    fn json_uses_inf_sentinel() {
        let c = coll(&[3.0, 1.0, 0.0], &[1.0, 2.0, 3.0]);
        let p = compute_path(&c);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"breakpoints":[0.0,1.0,2.0,"inf"],"models":[2,1,0]}"#);
        let back: PenalizedPath = serde_json::from_str(&s).unwrap();
        assert_eq!(back.breakpoints, p.breakpoints);
        assert_eq!(back.models, p.models);
    }

    mod prop {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Small integer values produce many exact ties.
            #[test]
            fn matches_brute_force_on_lattice(
                pts in proptest::collection::vec((0u8..6, 0u8..6), 1..12),
                cs in proptest::collection::vec(0.0f64..8.0, 20),
            ) {
                let f: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
                let g: Vec<f64> = pts.iter().map(|p| p.1 as f64).collect();
                let c = coll(&f, &g);
                let p = compute_path(&c);
                for w in p.starts().windows(2) {
                    prop_assert!(w[0] < w[1]);
                }
                for &x in &cs {
                    prop_assert_eq!(evaluate_path(&p, x).unwrap(), brute_force_argmin(&c, x));
                }
            }
        }
    }
}
