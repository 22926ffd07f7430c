//! Interaction datasets: loading, cleaning and per-user splitting.

pub mod kmeans;
pub mod persist;
pub mod split;

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use kmeans::{density_splits, DensitySplits, KMeans};
pub use split::{split_all, split_user, NodeSplit, SplitConfig, SplitMode};

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub user: u32,
    pub item: u32,
    pub value: f64,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub coords: Option<(f64, f64)>,
    pub category: Option<String>,
}

/// Dense ids assigned in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocab {
    raw: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn intern(&mut self, raw: &str) -> u32 {
        if let Some(&id) = self.index.get(raw) {
            return id;
        }
        let id = self.raw.len() as u32;
        self.raw.push(raw.to_string());
        self.index.insert(raw.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw(&self, id: u32) -> &str {
        &self.raw[id as usize]
    }

    pub fn id(&self, raw: &str) -> Option<u32> {
        self.index.get(raw).copied()
    }

    pub fn raw_ids(&self) -> &[String] {
        &self.raw
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    #[default]
    Movielens,
    Checkins,
}

impl std::str::FromStr for DatasetKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "movielens" | "ml-100k" => Ok(DatasetKind::Movielens),
            "checkins" | "foursquare" | "gowalla" => Ok(DatasetKind::Checkins),
            other => Err(format!("unknown dataset kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionDataset {
    pub kind: DatasetKind,
    pub records: Vec<Record>,
    pub users: Vocab,
    pub items: Vocab,
}

impl InteractionDataset {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record indices per user, each list in chronological order (stable
    /// for equal timestamps).
    pub fn by_user(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_users()];
        for (i, r) in self.records.iter().enumerate() {
            out[r.user as usize].push(i);
        }
        for list in &mut out {
            list.sort_by_key(|&i| self.records[i].timestamp);
        }
        out
    }

    /// Distinct item ids per user.
    pub fn user_items(&self) -> Vec<BTreeSet<u32>> {
        let mut out = vec![BTreeSet::new(); self.num_users()];
        for r in &self.records {
            out[r.user as usize].insert(r.item);
        }
        out
    }

    /// Coordinates of each item, taken from its first record that has any.
    pub fn item_coords(&self) -> Option<Vec<(f64, f64)>> {
        let mut coords = vec![None; self.num_items()];
        for r in &self.records {
            if coords[r.item as usize].is_none() {
                coords[r.item as usize] = r.coords;
            }
        }
        coords.into_iter().collect()
    }

    /// Records sorted by timestamp, stable for ties.
    pub fn sort_by_time(&mut self) {
        self.records.sort_by_key(|r| r.timestamp);
    }

    /// Keeps only records for which `keep` holds and re-indexes both
    /// vocabularies by first appearance among the survivors.
    pub fn retain_reindexed(&self, mut keep: impl FnMut(&Record) -> bool) -> InteractionDataset {
        let mut out = InteractionDataset {
            kind: self.kind.clone(),
            ..Default::default()
        };
        for r in &self.records {
            if !keep(r) {
                continue;
            }
            let user = out.users.intern(self.users.raw(r.user));
            let item = out.items.intern(self.items.raw(r.item));
            out.records.push(Record { user, item, ..r.clone() });
        }
        out
    }

    /// Subset of the given users (ids in this dataset's vocabulary).
    pub fn restrict_users(&self, users: &BTreeSet<u32>) -> InteractionDataset {
        self.retain_reindexed(|r| users.contains(&r.user))
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let f = File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(BufReader::new(f).lines().enumerate().map(|(i, l)| (i + 1, l)))
}

/// Parses `user \t item \t rating \t timestamp` lines.
pub fn load_movielens(path: &Path) -> Result<InteractionDataset> {
    let mut ds = InteractionDataset {
        kind: DatasetKind::Movielens,
        ..Default::default()
    };
    for (no, line) in lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(parse_err(path, no, format!("expected 4 fields, found {}", cols.len())));
        }
        let value: f64 = cols[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, no, format!("bad rating `{}`", cols[2])))?;
        let timestamp: i64 = cols[3]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, no, format!("bad timestamp `{}`", cols[3])))?;
        let user = ds.users.intern(cols[0].trim());
        let item = ds.items.intern(cols[1].trim());
        ds.records.push(Record {
            user,
            item,
            value,
            timestamp,
            coords: None,
            category: None,
        });
    }
    Ok(ds)
}

fn parse_time(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(t) = chrono::DateTime::parse_from_rfc3339(raw) {
        return Some(t.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%SZ"] {
        if let Ok(t) = chrono::NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(t.and_utc().timestamp());
        }
    }
    None
}

/// Parses `user \t venue \t ISO-8601 time \t lat \t lon \t category` lines.
pub fn load_checkins(path: &Path) -> Result<InteractionDataset> {
    let mut ds = InteractionDataset {
        kind: DatasetKind::Checkins,
        ..Default::default()
    };
    for (no, line) in lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 6 {
            return Err(parse_err(path, no, format!("expected 6 fields, found {}", cols.len())));
        }
        let timestamp = parse_time(cols[2])
            .ok_or_else(|| parse_err(path, no, format!("bad timestamp `{}`", cols[2])))?;
        let lat: f64 = cols[3]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, no, format!("bad latitude `{}`", cols[3])))?;
        let lon: f64 = cols[4]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, no, format!("bad longitude `{}`", cols[4])))?;
        let user = ds.users.intern(cols[0].trim());
        let item = ds.items.intern(cols[1].trim());
        ds.records.push(Record {
            user,
            item,
            value: 1.0,
            timestamp,
            coords: Some((lat, lon)),
            category: Some(cols[5].trim().to_string()),
        });
    }
    Ok(ds)
}

pub fn load(kind: &DatasetKind, path: &Path) -> Result<InteractionDataset> {
    match kind {
        DatasetKind::Movielens => load_movielens(path),
        DatasetKind::Checkins => load_checkins(path),
    }
}

/// Drops items seen by fewer than `min_item_users` distinct users and users
/// with fewer than `min_user_items` records, repeating until neither rule
/// removes anything.
pub fn filter_min_counts(ds: &InteractionDataset, min_item_users: usize, min_user_items: usize) -> InteractionDataset {
    let mut keep = vec![true; ds.records.len()];
    loop {
        let mut item_users: HashMap<u32, BTreeSet<u32>> = HashMap::new();
        let mut user_count: HashMap<u32, usize> = HashMap::new();
        for (r, _) in ds.records.iter().zip(&keep).filter(|(_, &k)| k) {
            item_users.entry(r.item).or_default().insert(r.user);
            *user_count.entry(r.user).or_default() += 1;
        }
        let mut changed = false;
        for (r, k) in ds.records.iter().zip(keep.iter_mut()) {
            if *k
                && (item_users[&r.item].len() < min_item_users
                    || user_count[&r.user] < min_user_items)
            {
                *k = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut it = keep.into_iter();
    ds.retain_reindexed(|_| it.next().unwrap())
}

/// Every interaction becomes a positive with value 1.
pub fn binarize(ds: &InteractionDataset) -> InteractionDataset {
    let mut out = ds.clone();
    for r in &mut out.records {
        r.value = 1.0;
    }
    out
}

/// `1 - (mean distinct items per user) / |items|`.
pub fn sparsity(ds: &InteractionDataset) -> f64 {
    if ds.num_users() == 0 || ds.num_items() == 0 {
        return 1.0;
    }
    let per_user = ds.user_items();
    let mean = per_user.iter().map(|s| s.len() as f64).sum::<f64>() / per_user.len() as f64;
    1.0 - mean / ds.num_items() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    pub(crate) fn toy(pairs: &[(u32, u32)]) -> InteractionDataset {
        let mut ds = InteractionDataset::default();
        for (t, &(u, i)) in pairs.iter().enumerate() {
            let user = ds.users.intern(&u.to_string());
            let item = ds.items.intern(&i.to_string());
            ds.records.push(Record {
                user,
                item,
                value: 1.0,
                timestamp: t as i64,
                coords: None,
                category: None,
            });
        }
        ds
    }

    #[test]
    fn movielens_fixture() {
        let f = write("196\t242\t3\t881250949\n186\t302\t3\t891717742\n196\t377\t1\t878887116\n");
        let ds = load_movielens(f.path()).unwrap();
        assert_eq!(ds.num_users(), 2);
        assert_eq!(ds.num_items(), 3);
        let got: Vec<(&str, &str, f64, i64)> = ds
            .records
            .iter()
            .map(|r| (ds.users.raw(r.user), ds.items.raw(r.item), r.value, r.timestamp))
            .collect();
        assert_eq!(
            got,
            vec![
                ("196", "242", 3.0, 881250949),
                ("186", "302", 3.0, 891717742),
                ("196", "377", 1.0, 878887116),
            ]
        );
    }

    #[test]
    fn movielens_empty_file() {
        let f = write("");
        let ds = load_movielens(f.path()).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.num_users(), 0);
        assert_eq!(ds.num_items(), 0);
    }

    #[test]
    fn movielens_malformed_line_reports_number() {
        let f = write("1\t2\t3\t4\n1\t2\tx\t4\n");
        match load_movielens(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn checkins_fixture() {
        let f = write(
            "u1\tv1\t2012-04-03T18:00:09Z\t40.71\t-74.00\tBar\n\
             u1\tv2\t2012-04-03T19:00:09Z\t40.72\t-74.01\tCafe\n\
             u2\tv1\t2012-04-04 10:00:00\t40.71\t-74.00\tBar\n",
        );
        let ds = load_checkins(f.path()).unwrap();
        assert_eq!(ds.num_users(), 2);
        assert_eq!(ds.num_items(), 2);
        assert_eq!(ds.records[1].timestamp - ds.records[0].timestamp, 3600);
        assert_eq!(ds.records[1].coords, Some((40.72, -74.01)));
        assert_eq!(ds.records[2].category.as_deref(), Some("Bar"));
        assert_eq!(ds.item_coords().unwrap().len(), 2);
    }

    #[test]
    fn checkins_bad_time() {
        let f = write("u1\tv1\tyesterday\t40.0\t-74.0\tBar\n");
        assert!(matches!(load_checkins(f.path()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn binarize_properties() {
        let f = write("1\t1\t5\t1\n1\t2\t2\t2\n2\t1\t1\t3\n");
        let ds = load_movielens(f.path()).unwrap();
        let b = binarize(&ds);
        assert!(b.records.iter().all(|r| r.value == 1.0));
        assert_eq!(b.len(), ds.len());
        assert_eq!(binarize(&b), b);
    }

    #[test]
    fn sparsity_of_full_matrix_is_zero() {
        let pairs: Vec<(u32, u32)> = (0..4).flat_map(|u| (0..5).map(move |i| (u, i))).collect();
        assert_eq!(sparsity(&toy(&pairs)), 0.0);
        assert_eq!(sparsity(&toy(&[(0, 0), (1, 1)])), 0.5);
    }

    #[test]
    fn filter_keeps_dense_data() {
        let pairs: Vec<(u32, u32)> = (0..12).flat_map(|u| (0..12).map(move |i| (u, i))).collect();
        let ds = toy(&pairs);
        assert_eq!(filter_min_counts(&ds, 10, 10), ds);
    }

    #[test]
    fn filter_drops_small_user() {
        let pairs: Vec<(u32, u32)> = (0..5).map(|i| (0, i)).collect();
        assert!(filter_min_counts(&toy(&pairs), 10, 10).is_empty());
    }
}
