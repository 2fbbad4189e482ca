//! Flat-file formats: corpus CSV, matrix CSV, and key/value reports.
//!
//! A corpus file starts with one metadata line and then holds one record per
//! row, bits comma separated in position order:
//!
//! ```text
//! # width=3 m=2 a=0.75 seed=7
//! 0,1,1
//! 1,0,0
//! ```
//!
//! `width` and `m` are required; other `key=value` pairs are carried through.
//! Numbers are written in the shortest form that parses back to the same
//! `f64` (never more than 17 significant digits).

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::matrix::DenseMatrix;
use crate::randomizer::{BitRecord, ResponseCorpus};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        message: message.into(),
    }
}

/// Shortest round-trip decimal form of `x`.
pub fn format_number(x: f64) -> String {
    format!("{x:?}")
}

/// Metadata from a corpus header, in file order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusHeader {
    pub width: u32,
    pub m: usize,
    pub extra: Vec<(String, String)>,
}

impl CorpusHeader {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.extra.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.extra.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.extra.push((key.to_string(), value)),
        }
    }

    fn render(&self) -> String {
        let mut s = format!("# width={} m={}", self.width, self.m);
        for (k, v) in &self.extra {
            let _ = write!(s, " {k}={v}");
        }
        s
    }

    fn parse(line: &str, lineno: usize) -> Result<Self, FormatError> {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| parse_err(lineno, "expected a '# width=N m=M' header line"))?;
        let mut header = CorpusHeader::default();
        let (mut width, mut m) = (None, None);
        for tok in body.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| parse_err(lineno, format!("header field {tok:?} is not key=value")))?;
            match k {
                "width" => width = Some(v.parse().map_err(|_| parse_err(lineno, format!("bad width {v:?}")))?),
                "m" => m = Some(v.parse().map_err(|_| parse_err(lineno, format!("bad record count {v:?}")))?),
                _ => header.extra.push((k.to_string(), v.to_string())),
            }
        }
        header.width = width.ok_or_else(|| parse_err(lineno, "header is missing width="))?;
        header.m = m.ok_or_else(|| parse_err(lineno, "header is missing m="))?;
        Ok(header)
    }
}

/// Reads a corpus file, checking every row against the header.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<(CorpusHeader, ResponseCorpus), FormatError> {
    let mut lines = reader.lines().enumerate();
    let (header, header_line) = loop {
        match lines.next() {
            None => return Err(parse_err(1, "empty file; expected a '# width=N m=M' header")),
            Some((i, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break (CorpusHeader::parse(line.trim(), i + 1)?, i + 1);
            }
        }
    };
    let width = header.width;
    let mut corpus = ResponseCorpus::new(width);
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut record = BitRecord::zeros(width);
        let mut count = 0u32;
        for (j, field) in line.split(',').enumerate() {
            let bit = match field.trim() {
                "0" => false,
                "1" => true,
                other => return Err(parse_err(lineno, format!("field {} is {other:?}, expected 0 or 1", j + 1))),
            };
            if j as u32 >= width {
                return Err(parse_err(lineno, format!("more than {width} fields")));
            }
            record.set(j as u32, bit);
            count += 1;
        }
        if count != width {
            return Err(parse_err(lineno, format!("expected {width} fields, found {count}")));
        }
        corpus
            .push(record)
            .map_err(|e| parse_err(lineno, e.to_string()))?;
    }
    if corpus.len() != header.m {
        return Err(parse_err(
            header_line,
            format!("header declares m={} but the file has {} records", header.m, corpus.len()),
        ));
    }
    Ok((header, corpus))
}

pub fn parse_corpus(text: &str) -> Result<(CorpusHeader, ResponseCorpus), FormatError> {
    read_corpus(text.as_bytes())
}

/// Writes the header (with `width` and `m` taken from the corpus) and rows.
pub fn write_corpus<W: Write>(mut w: W, header: &CorpusHeader, corpus: &ResponseCorpus) -> std::io::Result<()> {
    let header = CorpusHeader {
        width: corpus.width(),
        m: corpus.len(),
        extra: header.extra.clone(),
    };
    writeln!(w, "{}", header.render())?;
    let mut row = String::new();
    for record in corpus.iter() {
        row.clear();
        for (i, b) in record.bits().enumerate() {
            if i > 0 {
                row.push(',');
            }
            row.push(if b { '1' } else { '0' });
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

pub fn corpus_to_string(header: &CorpusHeader, corpus: &ResponseCorpus) -> String {
    let mut buf = Vec::new();
    write_corpus(&mut buf, header, corpus).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("corpus output is ASCII")
}

/// Row-major CSV, one matrix row per line.
pub fn matrix_to_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for row in m.rows().take(m.dim()) {
        let line: Vec<String> = row.iter().map(|&v| format_number(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_matrix_csv(text: &str) -> Result<DenseMatrix, FormatError> {
    let mut entries = Vec::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| parse_err(i + 1, e.to_string()))?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(parse_err(i + 1, format!("expected {d} columns, found {}", row.len())))
            }
            _ => {}
        }
        entries.extend(row);
    }
    let dim = dim.unwrap_or(0);
    if entries.len() != dim * dim {
        return Err(parse_err(text.lines().count(), format!("matrix is not square: {} values for {dim} columns", entries.len())));
    }
    Ok(DenseMatrix::from_row_major(dim, entries))
}

/// `key,value` lines under a `key,value` header row.
pub fn key_value_csv(pairs: &[(&str, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in pairs {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

/// Reads a probability vector given as comma or newline separated numbers.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, FormatError> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for field in line.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            values.push(
                field
                    .parse()
                    .map_err(|_| parse_err(i + 1, format!("{field:?} is not a number")))?,
            );
        }
    }
    Ok(values)
}
