//! CSV renderings of curves, bands and matrices. Every table has a header
//! row; floats use Rust's shortest round-trip formatting so output is
//! byte-stable.

use csv::{ReaderBuilder, Writer};

use super::{AccuracyCurve, AnalysisError, CurveBand, PairMatrix, SizeTrajectory};

fn finish(w: Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 fields")
}

/// `t,value` rows of one curve.
pub fn curve_csv(curve: &AccuracyCurve) -> String {
    let mut w = Writer::from_writer(Vec::new());
    w.write_record(["t", "value"]).unwrap();
    for p in &curve.points {
        w.write_record([p.t.to_string(), p.value.to_string()])
            .unwrap();
    }
    finish(w)
}

/// `label,t,value` rows of several curves.
pub fn curves_csv(curves: &[AccuracyCurve]) -> String {
    let mut w = Writer::from_writer(Vec::new());
    w.write_record(["label", "t", "value"]).unwrap();
    for c in curves {
        for p in &c.points {
            w.write_record([c.label.clone(), p.t.to_string(), p.value.to_string()])
                .unwrap();
        }
    }
    finish(w)
}

/// Parse a `t,value` table (extra columns ignored). A `t = 0` row, if
/// present, must have value 1.
pub fn parse_curve_csv(label: &str, text: &str) -> Result<AccuracyCurve, AnalysisError> {
    let bad = |m: String| AnalysisError::InvalidCurve(m);
    let mut reader = ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| bad(format!("missing `{name}` column")))
    };
    let (t_col, v_col) = (col("t")?, col("value")?);
    let mut measured = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let row = i + 2;
        let t: usize = record[t_col]
            .parse()
            .map_err(|_| bad(format!("row {row}: bad t `{}`", &record[t_col])))?;
        let v: f64 = record[v_col]
            .parse()
            .map_err(|_| bad(format!("row {row}: bad value `{}`", &record[v_col])))?;
        if t == 0 {
            if v != 1.0 {
                return Err(bad(format!("row {row}: value at t=0 must be 1, got {v}")));
            }
            continue;
        }
        measured.push((t, v));
    }
    AccuracyCurve::from_measurements(label, measured)
}

/// `label,t,words` rows for every run plus the mean.
pub fn sizes_csv(sizes: &SizeTrajectory) -> String {
    let mut w = Writer::from_writer(Vec::new());
    w.write_record(["label", "t", "words"]).unwrap();
    for c in sizes.runs.iter().chain(std::iter::once(&sizes.mean)) {
        for (t, words) in &c.points {
            w.write_record([c.label.clone(), t.to_string(), words.to_string()])
                .unwrap();
        }
    }
    finish(w)
}

/// `t,mean,lower,upper` rows.
pub fn band_csv(band: &CurveBand) -> String {
    let mut w = Writer::from_writer(Vec::new());
    w.write_record(["t", "mean", "lower", "upper"]).unwrap();
    for ((p, lo), hi) in band.mean.points.iter().zip(band.lower()).zip(band.upper()) {
        w.write_record([
            p.t.to_string(),
            p.value.to_string(),
            lo.to_string(),
            hi.to_string(),
        ])
        .unwrap();
    }
    finish(w)
}

fn matrix_table(m: &PairMatrix, cell: impl Fn(&str, &str) -> String) -> String {
    let mut w = Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("source\\target")
        .chain(m.languages.iter().map(String::as_str))
        .collect();
    w.write_record(&header).unwrap();
    for src in &m.languages {
        let row: Vec<String> = std::iter::once(src.clone())
            .chain(m.languages.iter().map(|tgt| cell(src, tgt)))
            .collect();
        w.write_record(&row).unwrap();
    }
    finish(w)
}

/// Row-major cell means; undefined cells are empty.
pub fn matrix_csv(m: &PairMatrix) -> String {
    matrix_table(m, |s, t| {
        m.cell(s, t).map(|c| c.mean.to_string()).unwrap_or_default()
    })
}

/// Row-major sample counts; undefined cells are empty.
pub fn matrix_counts_csv(m: &PairMatrix) -> String {
    matrix_table(m, |s, t| {
        m.cell(s, t)
            .map(|c| c.count.to_string())
            .unwrap_or_default()
    })
}
