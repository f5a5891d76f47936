//! PGM and CSV reading and writing.
//!
//! Gray levels map linearly to `[0, 1]`: a sample `k` with maximum value
//! `m` reads as `k / m`. Writing always uses `m = 255`; values are clamped
//! to `[0, 1]` and rounded to the nearest level, so a round trip is exact
//! up to `1/510`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, TvError};
use crate::grid::{GridShape, Signal};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmEncoding {
    /// `P2`, whitespace-separated decimal samples.
    Ascii,
    /// `P5`, one byte per sample.
    Binary,
}

pub fn read_pgm(path: &Path) -> Result<Signal> {
    let bytes = std::fs::read(path).map_err(|e| TvError::io(path, e))?;
    parse_pgm(&bytes, &path.display().to_string())
}

pub fn write_pgm(path: &Path, image: &Signal, encoding: PgmEncoding) -> Result<()> {
    let bytes = encode_pgm(image, encoding)?;
    std::fs::write(path, bytes).map_err(|e| TvError::io(path, e))
}

fn level(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_pgm(image: &Signal, encoding: PgmEncoding) -> Result<Vec<u8>> {
    let dims = image.shape().dims();
    if dims.len() != 2 {
        return Err(TvError::invalid(format!("PGM needs a 2D image, got {} dimensions", dims.len())));
    }
    let (rows, cols) = (dims[0], dims[1]);
    let magic = match encoding {
        PgmEncoding::Ascii => "P2",
        PgmEncoding::Binary => "P5",
    };
    let mut out = format!("{magic}\n{cols} {rows}\n255\n").into_bytes();
    match encoding {
        PgmEncoding::Binary => out.extend(image.values().iter().map(|&v| level(v))),
        PgmEncoding::Ascii => {
            let mut text = String::new();
            for row in image.values().chunks(cols) {
                let line: Vec<String> = row.iter().map(|&v| level(v).to_string()).collect();
                text.push_str(&line.join(" "));
                text.push('\n');
            }
            out.extend(text.into_bytes());
        }
    }
    Ok(out)
}

/// Header tokenizer tracking line numbers and `#` comments.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    origin: &'a str,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> TvError {
        TvError::parse(self.origin, self.line, msg)
    }

    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                if b == b'\n' {
                    self.line += 1;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self, what: &str) -> Result<&'a str> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() && self.bytes[self.pos] != b'#' {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("unexpected end of data, expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| self.err(format!("non-text bytes where {what} was expected")))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token(what)?;
        tok.parse().map_err(|_| self.err(format!("invalid {what} {tok:?}")))
    }
}

/// Decodes a `P2` or `P5` image; `origin` names the source in errors.
pub fn parse_pgm(bytes: &[u8], origin: &str) -> Result<Signal> {
    let mut cur = Cursor {
        bytes,
        pos: 0,
        line: 1,
        origin,
    };
    let magic = cur.token("magic number")?;
    let binary = match magic {
        "P2" => false,
        "P5" => true,
        other => return Err(cur.err(format!("unsupported magic number {other:?}, expected P2 or P5"))),
    };
    let cols = cur.number("width")?;
    let rows = cur.number("height")?;
    let maxval = cur.number("maximum gray value")?;
    if cols == 0 || rows == 0 {
        return Err(cur.err(format!("empty image {cols}x{rows}")));
    }
    if !(1..=65535).contains(&maxval) {
        return Err(cur.err(format!("maximum gray value {maxval} outside 1..=65535")));
    }
    let count = rows * cols;
    let scale = maxval as f64;
    let mut values = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(cur.err("missing whitespace after header")),
        }
        let width = if maxval < 256 { 1 } else { 2 };
        let raster = &bytes[cur.pos..];
        if raster.len() < count * width {
            return Err(cur.err(format!(
                "truncated raster: expected {} bytes, found {}",
                count * width,
                raster.len()
            )));
        }
        for k in 0..count {
            let v = if width == 1 {
                raster[k] as usize
            } else {
                ((raster[2 * k] as usize) << 8) | raster[2 * k + 1] as usize
            };
            if v > maxval {
                return Err(cur.err(format!("sample {v} exceeds maximum {maxval}")));
            }
            values.push(v as f64 / scale);
        }
    } else {
        for k in 0..count {
            cur.skip_space();
            if cur.pos >= bytes.len() {
                return Err(cur.err(format!("truncated raster: expected {count} samples, found {k}")));
            }
            let v = cur.number("sample")?;
            if v > maxval {
                return Err(cur.err(format!("sample {v} exceeds maximum {maxval}")));
            }
            values.push(v as f64 / scale);
        }
    }
    Signal::new(GridShape::d2(rows, cols)?, values)
}

pub fn read_csv(path: &Path) -> Result<Signal> {
    let text = std::fs::read_to_string(path).map_err(|e| TvError::io(path, e))?;
    parse_csv(&text, &path.display().to_string())
}

/// One value per line; blank lines and `#` comments are skipped.
pub fn parse_csv(text: &str, origin: &str) -> Result<Signal> {
    let mut values = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| TvError::parse(origin, k + 1, format!("not a number: {line:?}")))?;
        if !v.is_finite() {
            return Err(TvError::parse(origin, k + 1, format!("non-finite value {line:?}")));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(TvError::parse(origin, 0, "no values"));
    }
    Signal::from_vec(values)
}

/// Writes every value with 17 significant digits, which reads back exactly.
pub fn encode_csv(signal: &Signal) -> String {
    let mut s = String::with_capacity(24 * signal.len());
    for v in signal.values() {
        let _ = writeln!(s, "{v:.16e}");
    }
    s
}

pub fn write_csv(path: &Path, signal: &Signal) -> Result<()> {
    std::fs::write(path, encode_csv(signal)).map_err(|e| TvError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_and_binary_agree() {
        let img = Signal::from_fn(&GridShape::d2(3, 4).unwrap(), |ix| (ix[0] * 4 + ix[1]) as f64 / 11.0);
        let a = parse_pgm(&encode_pgm(&img, PgmEncoding::Ascii).unwrap(), "a").unwrap();
        let b = parse_pgm(&encode_pgm(&img, PgmEncoding::Binary).unwrap(), "b").unwrap();
        assert_eq!(a, b);
        assert!(a.max_abs_diff(&img) <= 1.0 / 255.0);
    }

    #[test]
    fn header_comments_and_sixteen_bit() {
        let text = b"P2\n# made by hand\n2 1 # width height\n1000\n0 1000\n";
        let img = parse_pgm(text, "c").unwrap();
        assert_eq!(img.shape().dims(), &[1, 2]);
        assert_eq!(img.values(), &[0.0, 1.0]);
        let mut bin = b"P5 1 1 65535\n".to_vec();
        bin.extend([0x80, 0x00]);
        let img = parse_pgm(&bin, "d").unwrap();
        assert!((img.values()[0] - 32768.0 / 65535.0).abs() < 1e-15);
    }

    #[test]
    fn malformed_inputs() {
        let cases: [&[u8]; 6] = [
            b"P3\n1 1\n255\n0\n",
            b"P2\n2 2\n255\n0 1 2\n",
            b"P5\n2 2\n255\n\x00\x01",
            b"P2\nx 2\n255\n",
            b"P2\n1 1\n255\n300\n",
            b"P2\n1 1\n0\n0\n",
        ];
        for c in cases {
            match parse_pgm(c, "bad") {
                Err(TvError::Parse { .. }) => {}
                other => panic!("{:?} gave {other:?}", String::from_utf8_lossy(c)),
            }
        }
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let s = Signal::from_vec(vec![0.1, -1.0 / 3.0, 1e-300, 12345.678]).unwrap();
        assert_eq!(parse_csv(&encode_csv(&s), "x").unwrap(), s);
        match parse_csv("1.0\n\n# note\n2.0\nabc\n", "f.csv") {
            Err(TvError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }
}
