//! Sample, target, prediction and metric files.
//!
//! Sample files have the header `s1,...,sd,t,value`, target files
//! `s1,...,sd,t` (a trailing `value` column is accepted and ignored),
//! prediction files `s1,...,sd,t,mean,variance,lo,hi`.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use sli::evaluate::CvReport;
use sli::{MetricSet, PredictionResult, STDataset, STPoint};

use crate::error::{CliError, CliResult};

pub fn coordinate_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=dim).map(|i| format!("s{i}")).collect();
    h.push("t".into());
    h
}

pub fn sample_header(dim: usize) -> Vec<String> {
    let mut h = coordinate_header(dim);
    h.push("value".into());
    h
}

pub fn prediction_header(dim: usize) -> Vec<String> {
    let mut h = coordinate_header(dim);
    h.extend(["mean", "variance", "lo", "hi"].map(String::from));
    h
}

/// Shortest representation that parses back to the same value; non-finite
/// values print as `Inf`, `-Inf` and `NaN`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "Inf".into() } else { "-Inf".into() }
    } else {
        format!("{x:?}")
    }
}

fn fmt_fixed(x: f64, width: usize, prec: usize) -> String {
    if x.is_finite() {
        format!("{x:>width$.prec$}")
    } else {
        format!("{:>width$}", fmt_num(x))
    }
}

fn read_rows(path: &Path, accepted: &[Vec<String>]) -> CliResult<(usize, Vec<Vec<f64>>)> {
    let file = File::open(path).map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
        .iter()
        .map(String::from)
        .collect();
    let Some(which) = accepted.iter().position(|h| *h == header) else {
        let expected: Vec<String> = accepted.iter().map(|h| h.join(",")).collect();
        return Err(CliError::usage(format!(
            "{}: header `{}` does not match `{}`",
            path.display(),
            header.join(","),
            expected.join("` or `")
        )));
    };
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Line 1 is the header.
        let line = i + 2;
        let record = record.map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let mut row = Vec::with_capacity(record.len());
        for (field, name) in record.iter().zip(&header) {
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::usage(format!("{} line {line}: `{field}` in column {name} is not a number", path.display())))?;
            if !v.is_finite() {
                return Err(CliError::usage(format!("{} line {line}: column {name} is not finite", path.display())));
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok((which, rows))
}

fn to_point(row: &[f64], dim: usize) -> STPoint {
    STPoint::new(row[..dim].to_vec(), row[dim])
}

pub fn read_samples(path: &Path, dim: usize) -> CliResult<STDataset> {
    let (_, rows) = read_rows(path, &[sample_header(dim)])?;
    let points = rows.iter().map(|r| to_point(r, dim)).collect();
    let values = rows.iter().map(|r| r[dim + 1]).collect();
    STDataset::new(points, values).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn read_targets(path: &Path, dim: usize) -> CliResult<Vec<STPoint>> {
    let (_, rows) = read_rows(path, &[coordinate_header(dim), sample_header(dim)])?;
    Ok(rows.iter().map(|r| to_point(r, dim)).collect())
}

/// Standard output when `path` is `None`.
pub fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::compute(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_csv(out: Box<dyn Write>, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> CliResult<()> {
    let err = |e: csv::Error| CliError::compute(format!("write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::compute(format!("write failed: {e}")))
}

fn coordinates(p: &STPoint) -> impl Iterator<Item = String> + '_ {
    p.s.iter().map(|v| fmt_num(*v)).chain(std::iter::once(fmt_num(p.t)))
}

pub fn write_samples(out: Box<dyn Write>, data: &STDataset) -> CliResult<()> {
    let rows = data.points().iter().zip(data.values()).map(|(p, v)| coordinates(p).chain(std::iter::once(fmt_num(*v))).collect());
    write_csv(out, &sample_header(data.dim()), rows)
}

pub fn write_predictions(out: Box<dyn Write>, dim: usize, r: &PredictionResult) -> CliResult<()> {
    let rows = (0..r.len()).map(|i| {
        coordinates(&r.targets[i]).chain([r.mean[i], r.variance[i], r.lower[i], r.upper[i]].map(fmt_num)).collect()
    });
    write_csv(out, &prediction_header(dim), rows)
}

fn metric_row(label: String, n: usize, m: &MetricSet) -> Vec<String> {
    let mut row = vec![label, n.to_string()];
    row.extend(m.as_array().map(fmt_num));
    row
}

/// One row per held-out slice, labelled by its time, then a `pooled` row.
pub fn write_cv_metrics(out: Box<dyn Write>, report: &CvReport) -> CliResult<()> {
    let mut header = vec!["slice".to_string(), "n".to_string()];
    header.extend(MetricSet::HEADER.map(String::from));
    let n_total: usize = report.per_slice.iter().map(|s| s.n).sum();
    let rows = report
        .per_slice
        .iter()
        .map(|s| metric_row(fmt_num(s.time), s.n, &s.metrics))
        .chain(std::iter::once(metric_row("pooled".into(), n_total, &report.aggregate)));
    write_csv(out, &header, rows)
}

/// Aligned table of the pooled metrics and, when `per_slice`, each slice.
pub fn cv_table(report: &CvReport, per_slice: bool) -> String {
    let mut s = format!("{:>10} {:>6}", "slice", "n");
    for h in MetricSet::HEADER {
        s.push_str(&format!(" {h:>9}"));
    }
    s.push('\n');
    let mut line = |label: &str, n: usize, m: &MetricSet| {
        s.push_str(&format!("{label:>10} {n:>6}"));
        for v in m.as_array() {
            s.push(' ');
            s.push_str(&fmt_fixed(v, 9, 4));
        }
        s.push('\n');
    };
    if per_slice {
        for sl in &report.per_slice {
            line(&fmt_num(sl.time), sl.n, &sl.metrics);
        }
    }
    let n_total: usize = report.per_slice.iter().map(|s| s.n).sum();
    line("pooled", n_total, &report.aggregate);
    s
}
