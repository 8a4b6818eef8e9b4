//! CSV + sidecar JSON storage for sample sets.
//!
//! Layout of the CSV file:
//!
//! ```text
//! d,k,n,eps,kind
//! 50,5,2000,0.05,sparse-mean
//! 0.31,-1.2,...        <- one sample per line, d fields
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle is lossless. Ground truth, when present, lives in a JSON
//! file next to the CSV (`data.csv` -> `data.truth.json`).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{GroundTruth, SampleSet};

pub const CSV_HEADER: &str = "d,k,n,eps,kind";

/// Metadata carried on the second CSV line.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvMeta {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub epsilon: f64,
    pub kind: String,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("truth.json")
}

pub fn write_samples_csv<W: Write>(out: W, samples: &SampleSet, k: usize) -> Result<()> {
    let gt = samples.ground_truth();
    let eps = gt.map_or(0.0, |g| g.epsilon);
    let kind = gt.map_or("unknown", |g| g.model.name());
    let mut w = csv::WriterBuilder::new().has_headers(false).flexible(true).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    w.write_record([
        samples.dim().to_string(),
        k.to_string(),
        samples.count().to_string(),
        format!("{eps}"),
        kind.to_string(),
    ])?;
    let mut row = Vec::with_capacity(samples.dim());
    for i in 0..samples.count() {
        row.clear();
        row.extend(samples.sample(i).iter().map(|x| format!("{x}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(input: R) -> Result<(SampleSet, CsvMeta)> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = r.records();
    let header = records.next().ok_or_else(|| Error::Format("empty file".into()))??;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Format(format!("line 1: expected header `{CSV_HEADER}`")));
    }
    let meta = records.next().ok_or_else(|| Error::Format("line 2: missing metadata".into()))??;
    if meta.len() != 5 {
        return Err(Error::Format(format!("line 2: expected 5 fields, found {}", meta.len())));
    }
    let field = |i: usize, name: &str| -> Result<usize> {
        meta[i].trim().parse().map_err(|_| Error::Format(format!("line 2: bad {name} `{}`", &meta[i])))
    };
    let d = field(0, "d")?;
    let k = field(1, "k")?;
    let n = field(2, "n")?;
    let epsilon: f64 = meta[3]
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("line 2: bad eps `{}`", &meta[3])))?;
    let kind = meta[4].trim().to_string();

    let mut rows = Vec::with_capacity(n * d);
    let mut count = 0;
    for (line, rec) in records.enumerate() {
        let rec = rec?;
        let lineno = line + 3;
        if rec.len() != d {
            return Err(Error::Format(format!("line {lineno}: expected {d} values, found {}", rec.len())));
        }
        for (j, f) in rec.iter().enumerate() {
            let x: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("line {lineno}, column {}: bad number `{f}`", j + 1)))?;
            rows.push(x);
        }
        count += 1;
    }
    if count != n {
        return Err(Error::Format(format!("header says n = {n} but file has {count} samples")));
    }
    let samples = SampleSet::from_rows(n, d, &rows)?;
    Ok((samples, CsvMeta { d, k, n, epsilon, kind }))
}

/// Writes the CSV and, if the samples carry ground truth, the sidecar JSON.
pub fn save_sample_set(path: &Path, samples: &SampleSet, k: usize) -> Result<()> {
    write_samples_csv(BufWriter::new(File::create(path)?), samples, k)?;
    if let Some(gt) = samples.ground_truth() {
        let f = BufWriter::new(File::create(sidecar_path(path))?);
        serde_json::to_writer_pretty(f, gt)?;
    }
    Ok(())
}

/// Reads a CSV and attaches the sidecar ground truth if the file exists.
pub fn load_sample_set(path: &Path) -> Result<(SampleSet, CsvMeta)> {
    let (samples, meta) = read_samples_csv(File::open(path)?)?;
    let side = sidecar_path(path);
    if side.exists() {
        let gt: GroundTruth = serde_json::from_reader(File::open(side)?)?;
        return Ok((samples.with_ground_truth(gt)?, meta));
    }
    Ok((samples, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_instance, Adversary, CorruptionSpec, ModelSpec};

    #[test]
    fn csv_round_trip_is_lossless() {
        let spec = CorruptionSpec::new(0.1, Adversary::SparseShift { support: 2, magnitude: 1.5 }, 3);
        let s = generate_instance(&ModelSpec::sparse_mean(), 6, 2, 30, &spec).unwrap();
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &s, 2).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("d,k,n,eps,kind\n6,2,30,0.1,sparse-mean\n"));
        let (back, meta) = read_samples_csv(buf.as_slice()).unwrap();
        assert_eq!(back.as_row_major(), s.as_row_major());
        assert_eq!(meta, CsvMeta { d: 6, k: 2, n: 30, epsilon: 0.1, kind: "sparse-mean".into() });
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let spec = CorruptionSpec::new(0.2, Adversary::DenseOutliers { radius: 3.0 }, 5);
        let s = generate_instance(&ModelSpec::spiked(1.0), 5, 2, 20, &spec).unwrap();
        save_sample_set(&path, &s, 2).unwrap();
        assert!(dir.path().join("data.truth.json").exists());
        let (back, _) = load_sample_set(&path).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn malformed_rows_report_line() {
        let text = "d,k,n,eps,kind\n2,1,2,0,isotropic\n1,2\n3\n";
        let err = read_samples_csv(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
        let text = "d,k,n,eps,kind\n2,1,1,0,isotropic\n1,x\n";
        let err = read_samples_csv(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 3, column 2"), "{err}");
        let text = "a,b\n";
        assert!(read_samples_csv(text.as_bytes()).is_err());
    }
}
