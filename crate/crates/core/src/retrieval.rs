//! Exact k-nearest-neighbor search under a learned metric.

use crate::embed::embed_stored;
use crate::error::{Error, Result};
use crate::json::to_precise_vec;
use crate::metric::{weighted_sq, MetricModel};
use crate::store::FeatureStore;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

/// Embedded corpus vectors tied to the model that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchIndex {
    fingerprint: String,
    dim: usize,
    entries: BTreeMap<String, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    fingerprint: String,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct IndexLine {
    id: String,
    values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub distance: f64,
}

impl SearchIndex {
    pub fn new(fingerprint: impl Into<String>, dim: usize) -> Self {
        Self {
            fingerprint: fingerprint.into(),
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let id = id.into();
        if values.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        if self.entries.contains_key(&id) {
            return Err(Error::InvalidParam(format!("duplicate index id `{id}`")));
        }
        self.entries.insert(id, values);
        Ok(())
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Header line, then one line per entry in id order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = IndexHeader {
            fingerprint: self.fingerprint.clone(),
            dim: self.dim,
        };
        w.write_all(&to_precise_vec(&header)?)?;
        w.write_all(b"\n")?;
        for (id, values) in &self.entries {
            let line = IndexLine {
                id: id.clone(),
                values: values.clone(),
            };
            w.write_all(&to_precise_vec(&line)?)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header: IndexHeader = match lines.next() {
            Some((_, line)) => serde_json::from_str(&line?).map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing index header".into(),
                })
            }
        };
        let mut index = Self::new(header.fingerprint, header.dim);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            let entry: IndexLine = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
            index
                .insert(entry.id, entry.values)
                .map_err(|e| err(e.to_string()))?;
        }
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_jsonl(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Exact scan: the `k` smallest distances ascending, ties by id.
    fn scan(&self, weights: &[f64], q: &[f64], k: usize, exclude: Option<&str>) -> Result<Vec<Hit>> {
        if k == 0 {
            return Err(Error::InvalidParam("k must be at least 1".into()));
        }
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: q.len(),
            });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let mut hits: Vec<(f64, &str)> = self
            .entries
            .iter()
            .filter(|(id, _)| Some(id.as_str()) != exclude)
            .map(|(id, v)| (weighted_sq(weights, q, v).sqrt(), id.as_str()))
            .collect();
        let by_rank = |a: &(f64, &str), b: &(f64, &str)| a.0.total_cmp(&b.0).then(a.1.cmp(b.1));
        if hits.len() > k {
            hits.select_nth_unstable_by(k - 1, by_rank);
            hits.truncate(k);
        }
        hits.sort_unstable_by(by_rank);
        Ok(hits
            .into_iter()
            .map(|(distance, id)| Hit {
                id: id.to_string(),
                distance,
            })
            .collect())
    }
}

/// Embed every stored image under the model.
pub fn build_index(model: &MetricModel, store: &FeatureStore) -> Result<SearchIndex> {
    let mut index = SearchIndex::new(model.fingerprint()?, model.dim());
    for id in store.ids() {
        let v = embed_stored(&model.feature_config, &model.pca, store, id)?;
        index.insert(id, v)?;
    }
    Ok(index)
}

/// A model paired with an index built from it; the fingerprint is checked
/// once on construction.
#[derive(Clone, Debug)]
pub struct Searcher {
    model: MetricModel,
    index: SearchIndex,
}

impl Searcher {
    pub fn new(model: MetricModel, index: SearchIndex) -> Result<Self> {
        let fp = model.fingerprint()?;
        if fp != index.fingerprint {
            return Err(Error::FingerprintMismatch {
                index: index.fingerprint.clone(),
                model: fp,
            });
        }
        if index.dim != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                actual: index.dim,
            });
        }
        Ok(Self { model, index })
    }

    pub fn model(&self) -> &MetricModel {
        &self.model
    }

    pub fn index(&self) -> &SearchIndex {
        &self.index
    }

    pub fn query(&self, q: &[f64], k: usize, exclude: Option<&str>) -> Result<Vec<Hit>> {
        self.index.scan(&self.model.weights, q, k, exclude)
    }

    /// Query by an indexed image; the image itself is left out when
    /// `exclude_self` is set.
    pub fn query_id(&self, id: &str, k: usize, exclude_self: bool) -> Result<Vec<Hit>> {
        let q = self
            .index
            .get(id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))?;
        self.query(q, k, exclude_self.then_some(id))
    }
}

/// One-shot query that verifies the index was built from `model`.
pub fn query(index: &SearchIndex, model: &MetricModel, q: &[f64], k: usize) -> Result<Vec<Hit>> {
    let fp = model.fingerprint()?;
    if fp != index.fingerprint {
        return Err(Error::FingerprintMismatch {
            index: index.fingerprint.clone(),
            model: fp,
        });
    }
    index.scan(&model.weights, q, k, None)
}
