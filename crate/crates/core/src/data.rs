//! Dataset ingestion and sharding.
//!
//! The Adult-income loader applies four preprocessing steps to the raw UCI
//! CSV (train and test files concatenated): rows with missing values (`?`)
//! are dropped, the eight categorical attributes are integer-encoded in
//! first-appearance order, every attribute column is scaled to unit
//! Euclidean norm, and the income column becomes a 0/1 label. The cleaned
//! table has 45222 rows and 14 features.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::numkit::{DataShard, ModelVector};
use crate::{Error, Result};

/// Column indices of the six continuous Adult attributes.
const CONTINUOUS: [usize; 6] = [0, 2, 4, 10, 11, 12];
/// Column indices of the eight categorical Adult attributes.
const CATEGORICAL: [usize; 8] = [1, 3, 5, 6, 7, 8, 9, 13];
const ADULT_FIELDS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Adult,
    Synthetic,
}

/// A full (unsharded) dataset with unit-norm feature columns.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }
}

/// Scale every column to unit Euclidean norm (columns of all zeros are left
/// untouched). Idempotent.
pub fn normalize_columns(rows: &mut [Vec<f64>]) {
    if rows.is_empty() {
        return;
    }
    let n = rows[0].len();
    for j in 0..n {
        let norm = rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
        if norm > 0.0 {
            for r in rows.iter_mut() {
                r[j] /= norm;
            }
        }
    }
}

/// Load the UCI Adult income CSV (train + test concatenated, `?` marking
/// missing fields, comment lines starting with `|` tolerated).
pub fn load_adult(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    parse_adult(std::io::BufReader::new(file))
}

/// Same as [`load_adult`] but from any reader; used by the tests.
pub fn parse_adult(reader: impl BufRead) -> Result<Dataset> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    let mut encoders: Vec<HashMap<String, f64>> = vec![HashMap::new(); ADULT_FIELDS];
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Ingest { line: line_no, msg: e.to_string() })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('|') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != ADULT_FIELDS {
            return Err(Error::Ingest {
                line: line_no,
                msg: format!("expected {ADULT_FIELDS} fields, found {}", fields.len()),
            });
        }
        if fields.iter().any(|f| *f == "?") {
            continue;
        }
        let mut row = Vec::with_capacity(ADULT_FIELDS - 1);
        for (col, &field) in fields.iter().enumerate().take(ADULT_FIELDS - 1) {
            if CONTINUOUS.contains(&col) {
                let v: f64 = field.parse().map_err(|_| Error::Ingest {
                    line: line_no,
                    msg: format!("column {col}: cannot parse `{field}` as a number"),
                })?;
                row.push(v);
            } else {
                debug_assert!(CATEGORICAL.contains(&col));
                let next = encoders[col].len() as f64;
                let code = *encoders[col].entry(field.to_string()).or_insert(next);
                row.push(code);
            }
        }
        // Trailing '.' appears in the test split's labels.
        labels.push(u8::from(fields[ADULT_FIELDS - 1].contains(">50K")));
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Ingest { line: 0, msg: "no usable rows".into() });
    }
    normalize_columns(&mut rows);
    Ok(Dataset { rows, labels, provenance: Provenance::Adult })
}

/// Shard-size policy for [`partition_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionPolicy {
    /// Near-equal sizes; the first `d mod m` shards take one extra row.
    Even,
    /// Sizes proportional to a Dirichlet draw with the given concentration;
    /// smaller values give more skew.
    Dirichlet(f64),
}

/// Random partition into `m` shards of near-equal size.
pub fn partition(
    ds: &Dataset,
    m: usize,
    beta: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<DataShard>> {
    partition_with(ds, m, beta, PartitionPolicy::Even, rng)
}

/// Random partition into `m` shards with a choice of size policy. Rows are
/// permuted uniformly, then cut into contiguous blocks; every shard gets at
/// least one row and the sizes sum to `d`.
pub fn partition_with(
    ds: &Dataset,
    m: usize,
    beta: f64,
    policy: PartitionPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<DataShard>> {
    let d = ds.len();
    if m == 0 || m > d {
        return Err(Error::InvalidInput(format!(
            "cannot split {d} rows into {m} shards"
        )));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(rng);
    let sizes = match policy {
        PartitionPolicy::Even => even_sizes(d, m),
        PartitionPolicy::Dirichlet(conc) => dirichlet_sizes(d, m, conc, rng)?,
    };
    debug_assert_eq!(sizes.iter().sum::<usize>(), d);
    let mut shards = Vec::with_capacity(m);
    let mut at = 0;
    for &size in &sizes {
        let ids = &order[at..at + size];
        let rows = ids.iter().map(|&i| ds.rows[i].clone()).collect();
        let labels = ids.iter().map(|&i| ds.labels[i]).collect();
        shards.push(DataShard::new(rows, labels, beta)?);
        at += size;
    }
    Ok(shards)
}

fn even_sizes(d: usize, m: usize) -> Vec<usize> {
    let base = d / m;
    let extra = d % m;
    (0..m).map(|i| base + usize::from(i < extra)).collect()
}

fn dirichlet_sizes(d: usize, m: usize, conc: f64, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if !(conc > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Dirichlet concentration must be positive, got {conc}"
        )));
    }
    let gamma = Gamma::new(conc, 1.0)
        .map_err(|e| Error::InvalidInput(format!("invalid Dirichlet parameter: {e}")))?;
    let draws: Vec<f64> = (0..m).map(|_| gamma.sample(rng).max(1e-12)).collect();
    let total: f64 = draws.iter().sum();
    // Cumulative rounding keeps the sizes summing to d exactly.
    let mut sizes = Vec::with_capacity(m);
    let mut cum = 0.0;
    let mut assigned = 0usize;
    for w in &draws {
        cum += w / total;
        let upto = (cum * d as f64).round() as usize;
        sizes.push(upto.saturating_sub(assigned));
        assigned = upto;
    }
    *sizes.last_mut().unwrap() += d - assigned;
    // Guarantee a nonempty shard by stealing from the largest.
    for i in 0..m {
        while sizes[i] == 0 {
            let largest = (0..m).max_by_key(|&j| sizes[j]).unwrap();
            if sizes[largest] <= 1 {
                break;
            }
            sizes[largest] -= 1;
            sizes[i] += 1;
        }
    }
    Ok(sizes)
}

/// Synthetic logistic data: `d` standard-normal feature rows, columns
/// normalized to unit length, labels drawn Bernoulli(sigmoid(<x, w_true>)),
/// then split into `m` near-equal shards.
pub fn synth_logistic(
    n: usize,
    d: usize,
    m: usize,
    w_true: &ModelVector,
    beta: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<DataShard>> {
    if n == 0 || d == 0 || m == 0 {
        return Err(Error::InvalidInput("n, d, and m must be positive".into()));
    }
    if w_true.len() != n {
        return Err(Error::InvalidInput(format!(
            "w_true has {} entries, expected {n}",
            w_true.len()
        )));
    }
    let mut rows: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..n).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    normalize_columns(&mut rows);
    let labels: Vec<u8> = rows
        .iter()
        .map(|r| {
            let z: f64 = r.iter().zip(w_true.iter()).map(|(x, w)| x * w).sum();
            let p = 1.0 / (1.0 + (-z).exp());
            u8::from(rng.random::<f64>() < p)
        })
        .collect();
    let ds = Dataset { rows, labels, provenance: Provenance::Synthetic };
    partition(&ds, m, beta, rng)
}

/// Serialize a shard to the columnar CSV format (`n,d,beta` header, then one
/// `x_1,...,x_n,label` row per sample). Floats use shortest round-trip
/// formatting so the encoding is lossless.
pub fn shard_to_csv(shard: &DataShard) -> String {
    let mut out = String::new();
    out.push_str(&format!("{},{},{}\n", shard.dim(), shard.len(), shard.beta));
    for (row, label) in shard.rows.iter().zip(shard.labels.iter()) {
        for x in row {
            out.push_str(&x.to_string());
            out.push(',');
        }
        out.push_str(&label.to_string());
        out.push('\n');
    }
    out
}

/// Parse the format written by [`shard_to_csv`].
pub fn shard_from_csv(text: &str) -> Result<DataShard> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Ingest { line: 1, msg: "missing header".into() })?;
    let head: Vec<&str> = header.split(',').collect();
    if head.len() != 3 {
        return Err(Error::Ingest { line: 1, msg: "header must be n,d,beta".into() });
    }
    let n: usize = head[0]
        .parse()
        .map_err(|_| Error::Ingest { line: 1, msg: "bad n".into() })?;
    let d: usize = head[1]
        .parse()
        .map_err(|_| Error::Ingest { line: 1, msg: "bad d".into() })?;
    let beta: f64 = head[2]
        .parse()
        .map_err(|_| Error::Ingest { line: 1, msg: "bad beta".into() })?;
    let mut rows = Vec::with_capacity(d);
    let mut labels = Vec::with_capacity(d);
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 1 {
            return Err(Error::Ingest {
                line: line_no,
                msg: format!("expected {} fields, found {}", n + 1, fields.len()),
            });
        }
        let mut row = Vec::with_capacity(n);
        for f in &fields[..n] {
            row.push(f.parse::<f64>().map_err(|_| Error::Ingest {
                line: line_no,
                msg: format!("cannot parse `{f}` as a number"),
            })?);
        }
        labels.push(fields[n].parse::<u8>().map_err(|_| Error::Ingest {
            line: line_no,
            msg: format!("cannot parse `{}` as a label", fields[n]),
        })?);
        rows.push(row);
    }
    if rows.len() != d {
        return Err(Error::Ingest {
            line: 0,
            msg: format!("header declared {d} rows, found {}", rows.len()),
        });
    }
    DataShard::new(rows, labels, beta)
}

/// Location of the Adult CSV for optional integration tests: the
/// `FEDEPM_ADULT` environment variable, or `data/adult.csv` relative to the
/// workspace root.
pub fn adult_search_path() -> Option<std::path::PathBuf> {
    if let Ok(p) = std::env::var("FEDEPM_ADULT") {
        let p = std::path::PathBuf::from(p);
        if p.exists() {
            return Some(p);
        }
    }
    let candidates = ["data/adult.csv", "../data/adult.csv", "../../data/adult.csv"];
    candidates.iter().map(std::path::PathBuf::from).find(|p| p.exists())
}
