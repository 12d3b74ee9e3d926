use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::climb::RunRecord;
use crate::error::{Error, Result};
use crate::models::ProbitData;
use crate::numkit::RngStream;

/// Reads a headerless numeric CSV whose last column is a 0/1 label.
///
/// Features are standardized with statistics of the whole file and an
/// intercept column is appended; experiments that split the data refit the
/// standardization on the training rows (see [`split_train_test`]).
pub fn load_csv_dataset(path: &Path) -> Result<ProbitData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut raw = Vec::new();
    let mut y = Vec::new();
    let mut width = None;
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() < 2 {
            return Err(Error::Parse {
                line,
                message: "need at least one feature and a label".into(),
            });
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {w} fields, found {}", rec.len()),
                })
            }
            _ => {}
        }
        let mut values = Vec::with_capacity(rec.len());
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("field {} is not a number: {field:?}", j + 1),
            })?;
            values.push(v);
        }
        let label = values.pop().unwrap_or(f64::NAN);
        if label != 0.0 && label != 1.0 {
            return Err(Error::Data(format!(
                "line {line}: label must be 0 or 1, got {label}"
            )));
        }
        raw.extend(values);
        y.push(label as u8);
    }
    let Some(width) = width else {
        return Err(Error::Data(format!("{} contains no rows", path.display())));
    };
    let data = ProbitData::from_raw(raw, width - 1, y)?;
    log::info!(
        "loaded {}: n = {}, d = {} (with intercept)",
        path.display(),
        data.n(),
        data.dim()
    );
    Ok(data)
}

/// One train/test split: a deterministic function of `(seed, index)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub index: u64,
    pub seed: u64,
}

/// Stream id reserved for split shuffling; runs use ids below it.
const SPLIT_STREAM: u64 = 1 << 62;

impl SplitSpec {
    pub fn new(seed: u64, index: u64) -> Self {
        Self {
            train_fraction: 0.9,
            index,
            seed,
        }
    }

    /// `(train, test)` row indices.
    pub fn indices(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        if n < 10 {
            return Err(Error::Data(format!(
                "need at least 10 rows to split, have {n}"
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::arg("train fraction must lie in (0, 1)"));
        }
        // guard against 0.9 * 10 landing a hair above 9
        let n_train = ((self.train_fraction * n as f64) - 1e-9).ceil() as usize;
        let n_train = n_train.clamp(1, n - 1);
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = RngStream::new(self.seed, SPLIT_STREAM).derive(self.index);
        idx.shuffle(&mut rng);
        let test = idx.split_off(n_train);
        Ok((idx, test))
    }
}

/// Shuffled split with standardization refit on the training rows only.
pub fn split_train_test(data: &ProbitData, spec: &SplitSpec) -> Result<(ProbitData, ProbitData)> {
    let (train, test) = spec.indices(data.n())?;
    let st = data.fit_standardizer(&train);
    Ok((data.subset(&train, &st)?, data.subset(&test, &st)?))
}

/// Writes traced iterations as CSV: `iteration`, one column per parameter
/// (and per model parameter when present), then `grad_norm`, `ess`,
/// `max_weight`, `sticky`.
pub fn write_trace_csv(path: &Path, param_names: &[String], records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec!["iteration".to_string()];
    header.extend(param_names.iter().cloned());
    header.extend(["grad_norm", "ess", "max_weight", "sticky"].map(String::from));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.iteration.to_string()];
        row.extend(r.params.iter().map(|v| v.to_string()));
        if let Some(t) = &r.theta {
            row.extend(t.iter().map(|v| v.to_string()));
        }
        row.push(r.grad_norm.to_string());
        row.push(r.ess.to_string());
        row.push(r.max_weight.to_string());
        row.push(u8::from(r.sticky).to_string());
        if row.len() != header.len() {
            return Err(Error::arg(format!(
                "trace row has {} columns, header has {}",
                row.len(),
                header.len()
            )));
        }
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(e.into_error()))?
        .flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`] back as `(header, rows)`.
pub fn read_trace_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("not a number: {f:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file_with(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn two_row_file() {
        let f = file_with("1,0\n2,1\n");
        let d = load_csv_dataset(f.path()).unwrap();
        assert_eq!((d.n(), d.dim()), (2, 2));
        assert_eq!(d.labels(), &[0, 1]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let f = file_with("3,1,0\n3,2,1\n3,5,1\n");
        let d = load_csv_dataset(f.path()).unwrap();
        assert!((0..3).all(|i| d.row(i)[0] == 0.0));
    }

    #[test]
    fn header_is_a_line_one_parse_error() {
        let f = file_with("glu,bmi,label\n1,2,0\n");
        match load_csv_dataset(f.path()) {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_rows() {
        let f = file_with("1,2,0\n1,x,1\n");
        assert!(matches!(
            load_csv_dataset(f.path()),
            Err(Error::Parse { line: 2, .. })
        ));
        let f = file_with("1,2,0\n1,1\n");
        assert!(matches!(
            load_csv_dataset(f.path()),
            Err(Error::Parse { line: 2, .. })
        ));
        let f = file_with("1,2,0\n1,1,2\n");
        assert!(matches!(load_csv_dataset(f.path()), Err(Error::Data(_))));
        let f = file_with("");
        assert!(matches!(load_csv_dataset(f.path()), Err(Error::Data(_))));
    }

    #[test]
    fn split_sizes_and_partition() {
        let (tr, te) = SplitSpec::new(1, 0).indices(10).unwrap();
        assert_eq!((tr.len(), te.len()), (9, 1));
        let (tr, te) = SplitSpec::new(1, 3).indices(532).unwrap();
        assert_eq!(tr.len(), 479);
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..532).collect::<Vec<_>>());
        assert!(SplitSpec::new(1, 0).indices(9).is_err());
    }

    #[test]
    fn splits_are_deterministic_and_distinct() {
        let a = SplitSpec::new(5, 2).indices(100).unwrap();
        assert_eq!(a, SplitSpec::new(5, 2).indices(100).unwrap());
        assert_ne!(a, SplitSpec::new(5, 3).indices(100).unwrap());
        assert_ne!(a, SplitSpec::new(6, 2).indices(100).unwrap());
    }

    #[test]
    fn test_rows_use_train_statistics() {
        let raw: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y = (0..20).map(|i| (i % 2) as u8).collect();
        let data = ProbitData::from_raw(raw, 1, y).unwrap();
        let spec = SplitSpec::new(0, 0);
        let (tr, te) = split_train_test(&data, &spec).unwrap();
        let (tri, tei) = spec.indices(20).unwrap();
        let m = tri.iter().map(|&i| i as f64).sum::<f64>() / tri.len() as f64;
        let sd =
            (tri.iter().map(|&i| (i as f64 - m).powi(2)).sum::<f64>() / tri.len() as f64).sqrt();
        assert!((te.row(0)[0] - (tei[0] as f64 - m) / sd).abs() < 1e-12);
        let train_mean = (0..tr.n()).map(|i| tr.row(i)[0]).sum::<f64>() / tr.n() as f64;
        assert!(train_mean.abs() < 1e-12);
    }

    #[test]
    fn trace_round_trip() {
        let records = vec![
            RunRecord {
                iteration: 1,
                params: vec![0.1 + 0.2, -1e-300],
                theta: None,
                sample: vec![],
                grad_norm: 1.0 / 3.0,
                ess: 1.5,
                max_weight: 0.75,
                sticky: true,
            },
            RunRecord {
                iteration: 2,
                params: vec![f64::MIN_POSITIVE, 2.0f64.sqrt()],
                theta: None,
                sample: vec![],
                grad_norm: 0.0,
                ess: 2.0,
                max_weight: 0.5,
                sticky: false,
            },
        ];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_trace_csv(f.path(), &["mu_0".into(), "log_sigma_0".into()], &records).unwrap();
        let (header, rows) = read_trace_csv(f.path()).unwrap();
        assert_eq!(header[0], "iteration");
        assert_eq!(header.len(), 7);
        for (r, row) in records.iter().zip(&rows) {
            assert_eq!(row[0], r.iteration as f64);
            assert_eq!(&row[1..3], r.params.as_slice());
            assert_eq!(row[3], r.grad_norm);
        }
    }
}
