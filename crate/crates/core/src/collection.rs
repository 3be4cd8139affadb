//! Estimator collections: one record per candidate model, kept sorted by the
//! tie-breaking order (pen0 ascending, then id ascending).

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque model identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelId(pub u64);

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One candidate estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRecord {
    pub id: ModelId,
    /// Empirical risk, n^-1 ||F_hat - Y||^2.
    pub empirical_risk: f64,
    /// Minimal-penalty shape.
    pub pen0: f64,
    /// Optimal-penalty shape.
    pub pen1: f64,
    /// Complexity (dimension or effective degrees of freedom).
    pub complexity: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum CollectionError {
    #[error("collection is empty")]
    Empty,
    #[error("non-finite field `{field}` in record {id}")]
    NonFinite { id: ModelId, field: &'static str },
    #[error("duplicate model id {0}")]
    DuplicateId(ModelId),
    #[error("csv: {0}")]
    Csv(String),
}

/// The tie-breaking order: pen0 ascending, then id ascending.
pub fn precedes(a: &EstimatorRecord, b: &EstimatorRecord) -> Ordering {
    a.pen0.total_cmp(&b.pen0).then(a.id.cmp(&b.id))
}

/// A validated collection, sorted by [`precedes`].
#[derive(Debug, Clone, PartialEq)]
pub struct Collection {
    records: Vec<EstimatorRecord>,
    index: HashMap<ModelId, usize>,
}

/// Checks finiteness and id uniqueness, then sorts. Negative pen0 is accepted
/// with a warning.
pub fn validate_collection(mut records: Vec<EstimatorRecord>) -> Result<Collection, CollectionError> {
    if records.is_empty() {
        return Err(CollectionError::Empty);
    }
    for r in &records {
        for (field, v) in [
            ("empirical_risk", r.empirical_risk),
            ("pen0", r.pen0),
            ("pen1", r.pen1),
            ("complexity", r.complexity),
        ] {
            if !v.is_finite() {
                return Err(CollectionError::NonFinite { id: r.id, field });
            }
        }
        if r.pen0 < 0.0 {
            log::warn!("record {} has negative pen0 {}", r.id, r.pen0);
        }
    }
    records.sort_by(precedes);
    let mut index = HashMap::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if index.insert(r.id, i).is_some() {
            return Err(CollectionError::DuplicateId(r.id));
        }
    }
    Ok(Collection { records, index })
}

impl Collection {
    pub fn new(records: Vec<EstimatorRecord>) -> Result<Self, CollectionError> {
        validate_collection(records)
    }

    pub fn records(&self) -> &[EstimatorRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn position(&self, id: ModelId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn get(&self, id: ModelId) -> Option<&EstimatorRecord> {
        self.position(id).map(|i| &self.records[i])
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self, CollectionError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut records = Vec::new();
        for row in rdr.deserialize() {
            let r: EstimatorRecord = row.map_err(|e| CollectionError::Csv(e.to_string()))?;
            records.push(r);
        }
        validate_collection(records)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<(), CollectionError> {
        let mut wtr = csv::Writer::from_writer(writer);
        for r in &self.records {
            wtr.serialize(r).map_err(|e| CollectionError::Csv(e.to_string()))?;
        }
        wtr.flush().map_err(|e| CollectionError::Csv(e.to_string()))
    }
}

/// Position of the first record (in collection order) minimising
/// `empirical_risk + c * weight(record)`. Any finite `c` is accepted.
pub(crate) fn argmin_position<F>(records: &[EstimatorRecord], c: f64, weight: F) -> usize
where
    F: Fn(&EstimatorRecord) -> f64,
{
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, r) in records.iter().enumerate() {
        let v = r.empirical_risk + c * weight(r);
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    best
}

/// Direct minimisation of `empirical_risk + c * pen0` by scanning every
/// record; ties go to the earliest record in collection order.
pub fn brute_force_argmin(collection: &Collection, c: f64) -> ModelId {
    collection.records[argmin_position(&collection.records, c, |r| r.pen0)].id
}
