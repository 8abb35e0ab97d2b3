//! Plain-text input formats.
//!
//! * Symbol streams: 1-based symbols separated by whitespace or commas,
//!   any number per line.
//! * Frequency vectors: one vector per line, counts separated by
//!   whitespace or commas.
//! * Sample values: nonnegative integers, same layout as symbol streams.
//!
//! Blank lines and lines starting with `#` are skipped everywhere.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use unifwatch_core::FrequencyVector;

use crate::error::{HarnessError, Result};

/// Opens `path` for reading, or stdin for `-` or `None`.
pub fn open_input(path: Option<&Path>) -> Result<Box<dyn BufRead>> {
    match path {
        None => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) => Ok(Box::new(BufReader::new(File::open(p)?))),
    }
}

/// Opens `path` for writing, or stdout for `-` or `None`.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(io::BufWriter::new(io::stdout()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(io::BufWriter::new(io::stdout()))),
        Some(p) => Ok(Box::new(io::BufWriter::new(File::create(p)?))),
    }
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
}

fn skip(line: &str) -> bool {
    let t = line.trim_start();
    t.is_empty() || t.starts_with('#')
}

fn parse<T: FromStr>(tok: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    tok.parse().map_err(|e: T::Err| HarnessError::Input {
        line,
        reason: format!("{tok:?}: {e}"),
    })
}

/// Lazily parses whitespace/comma separated integers, line by line.
pub struct Tokens<R, T> {
    lines: io::Lines<R>,
    line_no: usize,
    pending: std::vec::IntoIter<T>,
}

impl<R: BufRead, T: FromStr> Iterator for Tokens<R, T>
where
    T::Err: std::fmt::Display,
{
    type Item = Result<T>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(v) = self.pending.next() {
                return Some(Ok(v));
            }
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if skip(&line) {
                continue;
            }
            let parsed: Result<Vec<T>> = tokens(&line).map(|t| parse(t, self.line_no)).collect();
            match parsed {
                Ok(v) => self.pending = v.into_iter(),
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

/// Stream of 1-based symbols. Range checks against `n` are left to the
/// consumer.
pub fn symbols<R: BufRead>(reader: R) -> Tokens<R, usize> {
    Tokens {
        lines: reader.lines(),
        line_no: 0,
        pending: Vec::new().into_iter(),
    }
}

/// Stream of nonnegative sample values.
pub fn values<R: BufRead>(reader: R) -> Tokens<R, u64> {
    Tokens {
        lines: reader.lines(),
        line_no: 0,
        pending: Vec::new().into_iter(),
    }
}

pub fn read_frequency_vectors<R: BufRead>(reader: R) -> Result<Vec<FrequencyVector>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if skip(&line) {
            continue;
        }
        let counts: Result<Vec<u64>> = tokens(&line).map(|t| parse(t, i + 1)).collect();
        out.push(FrequencyVector::new(counts?));
    }
    Ok(out)
}

pub fn write_frequency_vectors<W: Write>(mut w: W, vectors: &[FrequencyVector]) -> Result<()> {
    for v in vectors {
        let line: Vec<String> = v.counts().iter().map(u64::to_string).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_symbols<W: Write>(mut w: W, symbols: &[usize]) -> Result<()> {
    for s in symbols {
        writeln!(w, "{s}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_mixed_layout() {
        let text = "# header\n1 2,3\n\n 4\t5\n";
        let got: Vec<usize> = symbols(text.as_bytes()).map(Result::unwrap).collect();
        assert_eq!(got, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn bad_token_reports_line() {
        let text = "1\n2\nx\n";
        let err = symbols(text.as_bytes()).find_map(Result::err).unwrap();
        assert!(matches!(err, HarnessError::Input { line: 3, .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn frequency_vectors_round_trip() {
        let v = vec![
            FrequencyVector::new(vec![0, 3, 1]),
            FrequencyVector::new(vec![7]),
        ];
        let mut buf = Vec::new();
        write_frequency_vectors(&mut buf, &v).unwrap();
        assert_eq!(read_frequency_vectors(buf.as_slice()).unwrap(), v);
    }
}
