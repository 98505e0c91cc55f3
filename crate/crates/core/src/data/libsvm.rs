//! LIBSVM / SVMlight text format.
//!
//! ```text
//! 1 1:0.5 3:-2.0   # optional trailing comment
//! -1
//! ```
//!
//! Blank lines and `#` comments are skipped, LF and CRLF are both accepted, and output
//! always uses LF. Reals are written in shortest round-trip form.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use super::{DataError, Dataset, ParseErrorKind, Sample, SparseVector};

pub fn parse_libsvm<R: BufRead>(mut reader: R) -> Result<Dataset, DataError> {
    let mut samples = Vec::new();
    let mut line = String::new();
    let mut line_no = 0usize;
    let mut dim = 0usize;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        line_no += 1;
        if let Some(sample) = parse_line(&line).map_err(|kind| DataError::Parse { line: line_no, kind })? {
            dim = dim.max(sample.features.required_dim());
            samples.push(sample);
        }
    }
    Dataset::new(samples, dim)
}

pub fn parse_libsvm_str(text: &str) -> Result<Dataset, DataError> {
    parse_libsvm(text.as_bytes())
}

pub fn read_libsvm_file(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let file = File::open(path.as_ref())?;
    parse_libsvm(BufReader::with_capacity(1 << 16, file))
}

fn parse_line(raw: &str) -> Result<Option<Sample>, ParseErrorKind> {
    let content = match raw.find('#') {
        Some(pos) => &raw[..pos],
        None => raw,
    };
    let mut tokens = content.split_ascii_whitespace();
    let Some(label_tok) = tokens.next() else {
        return Ok(None);
    };
    let label = parse_finite(label_tok).ok_or_else(|| ParseErrorKind::InvalidLabel(label_tok.to_owned()))?;

    let mut indices = Vec::new();
    let mut values = Vec::new();
    let mut previous: Option<u64> = None;
    for tok in tokens {
        let (idx_tok, val_tok) = tok
            .split_once(':')
            .ok_or_else(|| ParseErrorKind::MissingColon(tok.to_owned()))?;
        let index = parse_index(idx_tok)?;
        if let Some(prev) = previous {
            if index <= prev {
                return Err(ParseErrorKind::NonIncreasingIndex { previous: prev, index });
            }
        }
        previous = Some(index);
        let value = parse_finite(val_tok).ok_or_else(|| ParseErrorKind::InvalidValue(val_tok.to_owned()))?;
        if value != 0.0 {
            indices.push((index - 1) as u32);
            values.push(value);
        }
    }
    Ok(Some(Sample::new(label, SparseVector::from_sorted_unchecked(indices, values))))
}

fn parse_index(tok: &str) -> Result<u64, ParseErrorKind> {
    match tok.parse::<u64>() {
        Ok(0) => Err(ParseErrorKind::NonPositiveIndex(tok.to_owned())),
        Ok(i) if i > u64::from(u32::MAX) => Err(ParseErrorKind::InvalidIndex(tok.to_owned())),
        Ok(i) => Ok(i),
        Err(_) if tok.parse::<i64>().is_ok() => Err(ParseErrorKind::NonPositiveIndex(tok.to_owned())),
        Err(_) => Err(ParseErrorKind::InvalidIndex(tok.to_owned())),
    }
}

fn parse_finite(tok: &str) -> Option<f64> {
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Shortest decimal string that parses back to exactly `value`.
pub fn format_real(value: f64) -> String {
    let a = value.abs();
    if value == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{value}")
    } else {
        format!("{value:e}")
    }
}

pub fn write_libsvm<W: Write>(dataset: &Dataset, mut out: W) -> io::Result<()> {
    for sample in dataset.samples() {
        out.write_all(format_real(sample.label).as_bytes())?;
        for (i, v) in sample.features.iter() {
            write!(out, " {}:{}", i + 1, format_real(v))?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn serialize_libsvm(dataset: &Dataset) -> String {
    let mut buf = Vec::new();
    write_libsvm(dataset, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serializer emits ASCII")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_err(text: &str) -> (usize, ParseErrorKind) {
        match parse_libsvm_str(text) {
            Err(DataError::Parse { line, kind }) => (line, kind),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn parses_basic_line() {
        let d = parse_libsvm_str("1 1:0.5 3:-2.0").unwrap();
        assert_eq!(d.len(), 1);
        let s = &d.samples()[0];
        assert_eq!(s.label, 1.0);
        assert_eq!(s.features.indices(), &[0, 2]);
        assert_eq!(s.features.values(), &[0.5, -2.0]);
        assert_eq!(d.dim(), 3);
    }

    #[test]
    fn label_only_line_is_valid() {
        let d = parse_libsvm_str("-1").unwrap();
        assert_eq!(d.samples()[0].label, -1.0);
        assert!(d.samples()[0].features.is_empty());
    }

    #[test]
    fn non_increasing_index_reports_line() {
        let (line, kind) = parse_err("1 3:1 2:1");
        assert_eq!(line, 1);
        assert_eq!(kind, ParseErrorKind::NonIncreasingIndex { previous: 3, index: 2 });
        let (line, _) = parse_err("1 1:1\n\n# comment\n-1 2:1 2:3\n");
        assert_eq!(line, 4);
    }

    #[test]
    fn malformed_tokens() {
        assert!(matches!(parse_err("abc 1:1").1, ParseErrorKind::InvalidLabel(_)));
        assert!(matches!(parse_err("1 1:x").1, ParseErrorKind::InvalidValue(_)));
        assert!(matches!(parse_err("1 0:1").1, ParseErrorKind::NonPositiveIndex(_)));
        assert!(matches!(parse_err("1 -2:1").1, ParseErrorKind::NonPositiveIndex(_)));
        assert!(matches!(parse_err("1 a:1").1, ParseErrorKind::InvalidIndex(_)));
        assert!(matches!(parse_err("1 5").1, ParseErrorKind::MissingColon(_)));
        assert!(matches!(parse_err("1 1:nan").1, ParseErrorKind::InvalidValue(_)));
        assert!(matches!(parse_err("1 1:inf").1, ParseErrorKind::InvalidValue(_)));
    }

    #[test]
    fn comments_crlf_and_zeros() {
        let d = parse_libsvm_str("# header\r\n1 1:0 2:4 # trailing\r\n\r\n-1 1:1\r\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.samples()[0].features.indices(), &[1]);
        assert_eq!(serialize_libsvm(&d), "1 2:4\n-1 1:1\n");
    }

    #[test]
    fn serializes_canonical_form() {
        let d = Dataset::from_samples(vec![Sample::new(1.0, SparseVector::new(vec![0], vec![0.5]).unwrap())]);
        assert_eq!(serialize_libsvm(&d), "1 1:0.5\n");
        assert_eq!(serialize_libsvm(&Dataset::default()), "");
    }

    #[test]
    fn real_formatting_round_trips() {
        for v in [0.1, -2.0, 1e-7, 3.0e300, 123456.789, f64::MIN_POSITIVE, 1.0 / 3.0, -0.0] {
            let s = format_real(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_real(1.0), "1");
        assert_eq!(format_real(-1.0), "-1");
    }
}
