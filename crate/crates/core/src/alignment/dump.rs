//! JSON form of an alignment strategy. Matrices are nested row-major arrays
//! with each complex entry written as `[re, im]`.

use serde::{Deserialize, Serialize};

use super::IaStrategy;
use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyDocument {
    pub partition: String,
    pub antennas: usize,
    pub dof: Vec<usize>,
    pub leakage: f64,
    pub precoders: Vec<JsonMatrix>,
    pub combiners: Vec<JsonMatrix>,
}

fn to_json(m: &CMat) -> JsonMatrix {
    m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
}

fn from_json(rows: &JsonMatrix) -> Result<CMat> {
    let ncols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidParameter("ragged matrix in strategy document".into()));
    }
    Ok(CMat::from_fn(rows.len(), ncols, |i, j| c64(rows[i][j][0], rows[i][j][1])))
}

impl From<&IaStrategy> for StrategyDocument {
    fn from(s: &IaStrategy) -> Self {
        Self {
            partition: s.partition.to_string(),
            antennas: s.antennas,
            dof: s.dof.clone(),
            leakage: s.leakage,
            precoders: s.precoders.iter().map(to_json).collect(),
            combiners: s.combiners.iter().map(to_json).collect(),
        }
    }
}

impl TryFrom<&StrategyDocument> for IaStrategy {
    type Error = Error;

    fn try_from(doc: &StrategyDocument) -> Result<Self> {
        Ok(Self {
            partition: doc.partition.parse()?,
            antennas: doc.antennas,
            dof: doc.dof.clone(),
            leakage: doc.leakage,
            precoders: doc.precoders.iter().map(from_json).collect::<Result<_>>()?,
            combiners: doc.combiners.iter().map(from_json).collect::<Result<_>>()?,
        })
    }
}
