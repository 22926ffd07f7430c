//! On-disk layout of a prepared dataset:
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/users.tsv              dense_id \t raw_id
//! <dir>/items.tsv              dense_id \t raw_id [\t lat \t lon]
//! <dir>/splits/user_<id>.tsv   part \t prev \t target \t negatives
//! ```
//!
//! `part` is `train`, `weighting` or `test`; `prev` is `-` when absent and
//! negatives are comma separated (empty for training rows).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::split::{NodeSplit, SplitConfig};
use super::{DatasetKind, InteractionDataset};
use crate::error::{Error, Result};
use crate::eval::Probe;
use crate::model::{ItemId, ItemSet, Query};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub kind: DatasetKind,
    pub source: String,
    pub users: usize,
    pub items: usize,
    pub records: usize,
    pub sparsity: f64,
    pub split_users: usize,
    pub excluded_users: usize,
    pub split: SplitConfig,
    pub min_item_users: usize,
    pub min_user_items: usize,
}

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub manifest: Manifest,
    pub splits: Vec<NodeSplit>,
    pub coords: Option<Vec<(f64, f64)>>,
}

fn split_path(dir: &Path, user: u32) -> PathBuf {
    dir.join("splits").join(format!("user_{user}.tsv"))
}

fn fmt_prev(prev: Option<ItemId>) -> String {
    prev.map_or_else(|| "-".to_string(), |p| p.to_string())
}

pub fn write_prepared(dir: &Path, ds: &InteractionDataset, splits: &[NodeSplit], manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(dir.join("splits"))?;
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)? + "\n")?;

    let mut users = String::new();
    for (i, raw) in ds.users.raw_ids().iter().enumerate() {
        writeln!(users, "{i}\t{raw}").unwrap();
    }
    fs::write(dir.join("users.tsv"), users)?;

    let coords = ds.item_coords();
    let mut items = String::new();
    for (i, raw) in ds.items.raw_ids().iter().enumerate() {
        match &coords {
            Some(c) => writeln!(items, "{i}\t{raw}\t{}\t{}", c[i].0, c[i].1).unwrap(),
            None => writeln!(items, "{i}\t{raw}").unwrap(),
        }
    }
    fs::write(dir.join("items.tsv"), items)?;

    for s in splits {
        let mut out = String::new();
        for q in &s.train {
            writeln!(out, "train\t{}\t{}\t", fmt_prev(q.prev), q.target).unwrap();
        }
        for (part, probes) in [("weighting", &s.weighting), ("test", &s.test)] {
            for p in probes {
                let negs: Vec<String> = p.negatives().iter().map(|n| n.to_string()).collect();
                writeln!(out, "{part}\t{}\t{}\t{}", fmt_prev(p.prev), p.target(), negs.join(",")).unwrap();
            }
        }
        fs::write(split_path(dir, s.user), out)?;
    }
    Ok(())
}

fn bad(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read_split(path: &Path, user: u32) -> Result<NodeSplit> {
    let text = fs::read_to_string(path)?;
    let mut split = NodeSplit {
        user,
        train: Vec::new(),
        weighting: Vec::new(),
        test: Vec::new(),
        known: ItemSet::default(),
    };
    let mut known = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad(path, no + 1, "expected 4 fields"));
        }
        let prev = match cols[1] {
            "-" => None,
            p => Some(p.parse().map_err(|_| bad(path, no + 1, "bad prev"))?),
        };
        let target: ItemId = cols[2].parse().map_err(|_| bad(path, no + 1, "bad target"))?;
        known.push(target);
        let query = Query { prev, target };
        match cols[0] {
            "train" => split.train.push(query),
            part @ ("weighting" | "test") => {
                let negs = cols[3]
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<ItemId>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad(path, no + 1, "bad negative id"))?;
                let probe = Probe::new(query, &negs);
                if part == "weighting" {
                    split.weighting.push(probe);
                } else {
                    split.test.push(probe);
                }
            }
            other => return Err(bad(path, no + 1, format!("unknown part `{other}`"))),
        }
    }
    split.known = ItemSet::new(known);
    Ok(split)
}

pub fn read_prepared(dir: &Path) -> Result<PreparedData> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let items_path = dir.join("items.tsv");
    let mut coords = Vec::new();
    let mut has_coords = true;
    for (no, line) in fs::read_to_string(&items_path)?.lines().enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() == 4 {
            let lat = cols[2].parse().map_err(|_| bad(&items_path, no + 1, "bad latitude"))?;
            let lon = cols[3].parse().map_err(|_| bad(&items_path, no + 1, "bad longitude"))?;
            coords.push((lat, lon));
        } else {
            has_coords = false;
        }
    }
    let mut users: Vec<u32> = Vec::new();
    for entry in fs::read_dir(dir.join("splits"))? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_prefix("user_").and_then(|s| s.strip_suffix(".tsv")) {
            users.push(id.parse().map_err(|_| Error::Data(format!("bad split file name {name}")))?);
        }
    }
    users.sort_unstable();
    let splits = users
        .into_iter()
        .map(|u| read_split(&split_path(dir, u), u))
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedData {
        manifest,
        splits,
        coords: (has_coords && !coords.is_empty()).then_some(coords),
    })
}
