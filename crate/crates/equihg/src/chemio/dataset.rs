//! Joining structures to a targets CSV and splitting into train/val/test.

use super::{parse_xyz, read_sdf_file, Molecule};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::collections::HashMap;
use std::path::Path;

/// One molecule with its regression targets. All records loaded together
/// carry the same target-name set.
#[derive(Debug, Clone)]
pub struct DatasetRecord {
    pub molecule: Molecule,
    pub targets: BTreeMap<String, f64>,
}

#[derive(Debug)]
pub struct LoadedDataset {
    pub records: Vec<DatasetRecord>,
    /// Molecules with no row in the targets CSV (dropped).
    pub unmatched_molecules: usize,
    /// CSV rows naming no loaded molecule (dropped).
    pub unmatched_targets: usize,
}

/// Joins structures (an .sdf file, or a directory of .xyz files) to a targets
/// CSV by molecule name: the SDF title line or the XYZ filename stem against
/// the CSV `name` column. Rows and molecules without a partner are dropped
/// and counted.
pub fn load_dataset(
    molecule_source: &Path,
    targets_csv: &Path,
    target_names: &[String],
) -> Result<LoadedDataset> {
    let molecules = load_molecules(molecule_source)?;
    let mut table = read_targets(targets_csv, target_names)?;

    let total_rows = table.len();
    let mut records = Vec::new();
    let mut unmatched_molecules = 0;
    let mut used = 0;
    for molecule in molecules {
        match table.get_mut(&molecule.name) {
            Some((targets, taken)) => {
                if !*taken {
                    *taken = true;
                    used += 1;
                }
                records.push(DatasetRecord {
                    targets: targets.clone(),
                    molecule,
                });
            }
            None => unmatched_molecules += 1,
        }
    }
    if records.is_empty() {
        return Err(Error::Data(format!(
            "no overlap between molecules in {} and rows of {}",
            molecule_source.display(),
            targets_csv.display()
        )));
    }
    Ok(LoadedDataset {
        records,
        unmatched_molecules,
        unmatched_targets: total_rows - used,
    })
}

/// Reads a molecule source: a directory of `.xyz` files (sorted by name) or
/// a single SDF file.
pub fn load_molecules(source: &Path) -> Result<Vec<Molecule>> {
    if source.is_dir() {
        let mut paths: Vec<_> = std::fs::read_dir(source)
            .map_err(|e| Error::io(source, e))?
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| Error::io(source, e))?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "xyz"))
            .collect();
        paths.sort();
        let mut out = Vec::with_capacity(paths.len());
        for p in paths {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let stem = p.file_stem().unwrap_or_default().to_string_lossy();
            out.push(parse_xyz(&text, &stem, &p)?);
        }
        Ok(out)
    } else {
        read_sdf_file(source)
    }
}

type TargetTable = HashMap<String, (BTreeMap<String, f64>, bool)>;

fn read_targets(path: &Path, target_names: &[String]) -> Result<TargetTable> {
    let bad = |msg: String| Error::Data(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let name_col = headers
        .iter()
        .position(|h| h == "name")
        .ok_or_else(|| bad("missing 'name' column".into()))?;
    let mut target_cols = Vec::with_capacity(target_names.len());
    for t in target_names {
        let col = headers
            .iter()
            .position(|h| h == t)
            .ok_or_else(|| bad(format!("missing target column {t:?}")))?;
        target_cols.push(col);
    }

    let mut table = TargetTable::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let name = row
            .get(name_col)
            .ok_or_else(|| bad(format!("row {}: short record", i + 2)))?
            .to_string();
        let mut targets = BTreeMap::new();
        for (t, &col) in target_names.iter().zip(&target_cols) {
            let raw = row
                .get(col)
                .ok_or_else(|| bad(format!("row {}: short record", i + 2)))?;
            let v: f64 = raw
                .parse()
                .map_err(|_| bad(format!("row {}: unparseable {t} value {raw:?}", i + 2)))?;
            if !v.is_finite() {
                return Err(bad(format!("row {}: non-finite {t} value", i + 2)));
            }
            targets.insert(t.clone(), v);
        }
        if table.insert(name.clone(), (targets, false)).is_some() {
            return Err(bad(format!("duplicate name {name:?}")));
        }
    }
    Ok(table)
}

/// Deterministic shuffle by seed, then split at floor(0.8 N) / floor(0.9 N).
/// The three parts are disjoint and cover the input.
pub fn split_dataset<T>(records: Vec<T>, seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let n = records.len();
    if n < 10 {
        return Err(Error::Data(format!(
            "need at least 10 records to split 80-10-10, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = records;
    records.shuffle(&mut rng);
    let a = n * 8 / 10;
    let b = n * 9 / 10;
    let test = records.split_off(b);
    let val = records.split_off(a);
    Ok((records, val, test))
}
