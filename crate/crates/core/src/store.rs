//! Corpus listing and the feature JSONL interchange file.

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

/// Name of the optional manifest inside a corpus directory.
pub const MANIFEST_NAME: &str = "corpus.jsonl";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub path: PathBuf,
}

/// List a corpus directory, sorted by id.
///
/// With a `corpus.jsonl` manifest ({"id","path"} per line, paths relative to
/// the directory unless absolute) only the listed files are used; otherwise
/// every `.png`, `.jpg` and `.jpeg` file is included and its id is the file
/// name without extension.
pub fn scan_corpus(dir: &Path) -> Result<Vec<CorpusEntry>> {
    let manifest = dir.join(MANIFEST_NAME);
    let mut entries = if manifest.is_file() {
        read_manifest(&manifest, dir)?
    } else {
        let mut out = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if !path.is_file() || !is_image_path(&path) {
                continue;
            }
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::InvalidParam(format!("non UTF-8 file name {path:?}")))?
                .to_string();
            out.push(CorpusEntry { id, path });
        }
        out
    };
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = entries.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::InvalidParam(format!(
            "duplicate image id `{}` ({:?} and {:?})",
            w[0].id, w[0].path, w[1].path
        )));
    }
    Ok(entries)
}

fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .is_some_and(|e| matches!(e.as_str(), "png" | "jpg" | "jpeg"))
}

fn read_manifest(path: &Path, dir: &Path) -> Result<Vec<CorpusEntry>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut entry: CorpusEntry = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if entry.path.is_relative() {
            entry.path = dir.join(&entry.path);
        }
        out.push(entry);
    }
    Ok(out)
}

/// One line of the feature file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    pub feature: String,
    pub values: Vec<f64>,
}

/// Feature vectors keyed by image id, then feature name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureStore {
    by_id: BTreeMap<String, BTreeMap<String, FeatureVector>>,
}

impl FeatureStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns an error if the (id, feature) pair is already present.
    pub fn insert(&mut self, id: &str, v: FeatureVector) -> Result<()> {
        let slot = self.by_id.entry(id.to_string()).or_default();
        if slot.contains_key(&v.feature_name) {
            return Err(Error::InvalidParam(format!(
                "duplicate feature `{}` for image `{id}`",
                v.feature_name
            )));
        }
        slot.insert(v.feature_name.clone(), v);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&BTreeMap<String, FeatureVector>> {
        self.by_id.get(id)
    }

    pub fn feature(&self, id: &str, feature: &str) -> Result<&FeatureVector> {
        self.by_id
            .get(id)
            .and_then(|m| m.get(feature))
            .ok_or_else(|| Error::MissingFeature {
                id: id.to_string(),
                feature: feature.to_string(),
            })
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.by_id.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    /// Number of (id, feature) records.
    pub fn record_count(&self) -> usize {
        self.by_id.values().map(BTreeMap::len).sum()
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut store = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            let rec: FeatureRecord =
                serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            store
                .insert(&rec.id, FeatureVector::new(rec.feature, rec.values))
                .map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Records sorted by id, then feature name.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (id, features) in &self.by_id {
            for (name, v) in features {
                let rec = FeatureRecord {
                    id: id.clone(),
                    feature: name.clone(),
                    values: v.values.clone(),
                };
                serde_json::to_writer(&mut w, &rec)?;
                w.write_all(b"\n")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_roundtrip_sorted() {
        let mut s = FeatureStore::new();
        s.insert("b", FeatureVector::new("lum_hist", vec![0.5, 0.5])).unwrap();
        s.insert("a", FeatureVector::new("lum_hist", vec![1.0, 0.0])).unwrap();
        s.insert("a", FeatureVector::new("color_hist", vec![0.1])).unwrap();
        let mut buf = Vec::new();
        s.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let order: Vec<_> = text
            .lines()
            .map(|l| serde_json::from_str::<FeatureRecord>(l).unwrap())
            .map(|r| (r.id, r.feature))
            .collect();
        assert_eq!(
            order,
            [("a", "color_hist"), ("a", "lum_hist"), ("b", "lum_hist")]
                .map(|(a, b)| (a.to_string(), b.to_string()))
        );
        assert_eq!(FeatureStore::read_jsonl(buf.as_slice()).unwrap(), s);
        assert_eq!(s.record_count(), 3);
    }

    #[test]
    fn duplicate_records_are_rejected() {
        let line = r#"{"id":"a","feature":"x","values":[1]}"#;
        let text = format!("{line}\n{line}\n");
        assert!(matches!(
            FeatureStore::read_jsonl(text.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            FeatureStore::read_jsonl("not json\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn missing_feature_names_id() {
        let s = FeatureStore::new();
        match s.feature("img7", "hog16") {
            Err(Error::MissingFeature { id, feature }) => {
                assert_eq!((id.as_str(), feature.as_str()), ("img7", "hog16"))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scan_directory_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b.png", "a.JPG", "c.jpeg", "notes.txt"] {
            std::fs::write(dir.path().join(name), b"x").unwrap();
        }
        let ids: Vec<_> = scan_corpus(dir.path()).unwrap().into_iter().map(|e| e.id).collect();
        assert_eq!(ids, ["a", "b", "c"]);

        std::fs::write(
            dir.path().join(MANIFEST_NAME),
            "{\"id\":\"zeta\",\"path\":\"b.png\"}\n\n{\"id\":\"alpha\",\"path\":\"c.jpeg\"}\n",
        )
        .unwrap();
        let entries = scan_corpus(dir.path()).unwrap();
        assert_eq!(entries[0].id, "alpha");
        assert_eq!(entries[0].path, dir.path().join("c.jpeg"));
        assert_eq!(entries.len(), 2);
    }

    #[test]
    fn duplicate_ids_in_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.png"), b"x").unwrap();
        std::fs::write(dir.path().join("a.jpg"), b"x").unwrap();
        assert!(scan_corpus(dir.path()).is_err());
    }
}
