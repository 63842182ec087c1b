//! The `.pgn4` container: a trained model together with the feature
//! arrangement and standardization it expects.
//!
//! Layout (all integers little-endian):
//!
//! | bytes | content                                         |
//! |-------|-------------------------------------------------|
//! | 8     | magic `PGN4MDL\0`                               |
//! | 4     | format version (u32)                            |
//! | 8     | header length `h` (u64)                         |
//! | h     | UTF-8 JSON header                               |
//! | 8     | payload length `p` in f64 values (u64)          |
//! | 8·p   | f64 payload                                     |
//! | 32    | SHA-256 of every preceding byte                 |
//!
//! Network weights travel in the binary payload; tree-style models are
//! stored in the JSON header, whose floats round-trip exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{AdaBoost, Classifier, DecisionTree, LinearSvm, Method, Mlp, Model, RandomForest};
use crate::data::{DatasetTable, StandardizeStats};
use crate::error::{Error, Result};
use crate::nn::{Network, Pgn4Config, Pgn4Model};
use crate::select::{project, FeatureArrangement};

pub const MAGIC: &[u8; 8] = b"PGN4MDL\0";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

/// Everything needed to score a raw feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub arrangement: FeatureArrangement,
    pub stats: StandardizeStats,
    pub model: Model,
    /// Free-form provenance (config hash, seed, feature count, ...).
    pub provenance: serde_json::Value,
}

impl Pipeline {
    /// Projects `table` onto the arranged features, standardizes with the
    /// stored training statistics, and scores.
    pub fn score_table(&self, table: &DatasetTable) -> Result<Vec<f64>> {
        let projected = project(table, &self.arrangement)?;
        let standardized = self.stats.apply(&projected)?;
        self.model.score(standardized.features())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (body, payload) = encode_model(&self.model)?;
        let header = Header {
            method: self.model.method(),
            n_features: self.model.n_features(),
            arrangement: self.arrangement.clone(),
            stats: self.stats.clone(),
            provenance: self.provenance.clone(),
            model: body,
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(28 + json.len() + 8 * payload.len() + CHECKSUM_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        for v in &payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Format("not a PGN4 model file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if bytes.len() < r.pos + CHECKSUM_LEN {
            return Err(Error::Format("truncated file".into()));
        }
        let body_end = bytes.len() - CHECKSUM_LEN;
        if Sha256::digest(&bytes[..body_end]).as_slice() != &bytes[body_end..] {
            return Err(Error::Checksum);
        }
        let mut r = Reader {
            bytes: &bytes[..body_end],
            pos: r.pos,
        };
        let header_len = r.u64_len()?;
        let header: Header = serde_json::from_slice(r.take(header_len)?)?;
        let payload_len = r.u64_len()?;
        let raw = r.take(
            payload_len
                .checked_mul(8)
                .ok_or_else(|| Error::Format("payload length overflow".into()))?,
        )?;
        if r.pos != body_end {
            return Err(Error::Format("trailing bytes before checksum".into()));
        }
        let payload: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let model = decode_model(header.method, header.model, &payload)?;
        if model.n_features() != header.n_features
            || header.arrangement.ordered_names.len() != header.n_features
        {
            return Err(Error::Format("feature count disagrees across sections".into()));
        }
        Ok(Self {
            arrangement: header.arrangement,
            stats: header.stats,
            model,
            provenance: header.provenance,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    method: Method,
    n_features: usize,
    arrangement: FeatureArrangement,
    stats: StandardizeStats,
    provenance: serde_json::Value,
    model: ModelBody,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelBody {
    Pgn4 { input_length: usize, config: Pgn4Config },
    Nn { input_length: usize },
    Svm(LinearSvm),
    Dt(DecisionTree),
    Rf(RandomForest),
    Ada(AdaBoost),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64_len(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Format("length overflow".into()))
    }
}

fn network_payload<N: Network>(net: &N) -> Vec<f64> {
    net.params().into_iter().flatten().copied().collect()
}

fn fill_network<N: Network>(net: &mut N, payload: &[f64]) -> Result<usize> {
    let mut pos = 0;
    for p in net.params_mut() {
        let src = payload
            .get(pos..pos + p.len())
            .ok_or_else(|| Error::Format("payload shorter than the model".into()))?;
        p.copy_from_slice(src);
        pos += p.len();
    }
    Ok(pos)
}

fn encode_model(model: &Model) -> Result<(ModelBody, Vec<f64>)> {
    Ok(match model {
        Model::Pgn4(m) => {
            let mut payload = network_payload(m);
            for bn in &m.norms {
                payload.extend_from_slice(&bn.running_mean);
                payload.extend_from_slice(&bn.running_var);
                payload.extend([bn.eps, bn.momentum]);
            }
            (
                ModelBody::Pgn4 {
                    input_length: m.input_length,
                    config: m.config,
                },
                payload,
            )
        }
        Model::Nn(m) => (
            ModelBody::Nn {
                input_length: m.input_length(),
            },
            network_payload(m),
        ),
        Model::Svm(m) => (ModelBody::Svm(m.clone()), Vec::new()),
        Model::Dt(m) => (ModelBody::Dt(m.clone()), Vec::new()),
        Model::Rf(m) => (ModelBody::Rf(m.clone()), Vec::new()),
        Model::Ada(m) => (ModelBody::Ada(m.clone()), Vec::new()),
    })
}

fn decode_model(method: Method, body: ModelBody, payload: &[f64]) -> Result<Model> {
    let exact = |used: usize| {
        if used == payload.len() {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "payload has {} values, model uses {used}",
                payload.len()
            )))
        }
    };
    let model = match body {
        ModelBody::Pgn4 {
            input_length,
            config,
        } => {
            let mut m = Pgn4Model::zeroed(input_length, config)?;
            let mut pos = fill_network(&mut m, payload)?;
            for bn in &mut m.norms {
                let c = bn.channels;
                let chunk = payload
                    .get(pos..pos + 2 * c + 2)
                    .ok_or_else(|| Error::Format("payload shorter than the model".into()))?;
                bn.running_mean.copy_from_slice(&chunk[..c]);
                bn.running_var.copy_from_slice(&chunk[c..2 * c]);
                bn.eps = chunk[2 * c];
                bn.momentum = chunk[2 * c + 1];
                pos += 2 * c + 2;
            }
            exact(pos)?;
            Model::Pgn4(m)
        }
        ModelBody::Nn { input_length } => {
            let mut m = Mlp::zeroed(input_length)?;
            exact(fill_network(&mut m, payload)?)?;
            Model::Nn(m)
        }
        ModelBody::Svm(m) => Model::Svm(m),
        ModelBody::Dt(m) => Model::Dt(m),
        ModelBody::Rf(m) => Model::Rf(m),
        ModelBody::Ada(m) => Model::Ada(m),
    };
    if model.method() != method {
        return Err(Error::Format(format!(
            "header names method {method} but holds a {} model",
            model.method()
        )));
    }
    Ok(model)
}
