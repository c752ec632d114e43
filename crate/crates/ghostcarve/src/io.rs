//! Scene and artifact file formats: PGM (P2/P5), 0/1 text grids, pattern
//! text dumps and CSV tables.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ghostcarve_core::detector::CalibrationCurve;
use ghostcarve_core::SceneImage;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}, column {column}: {message}")]
    Text { line: usize, column: usize, message: String },
    #[error("byte {offset}: {message}")]
    Pgm { offset: usize, message: String },
    #[error("scene is {width}x{height}; both sides must be powers of two")]
    Dimensions { width: usize, height: usize },
}

/// Reads a PGM or text-grid scene and binarizes it at 0.5.
pub fn load_scene(path: &Path) -> Result<SceneImage, SceneError> {
    let bytes = fs::read(path).map_err(|source| SceneError::Io { path: path.into(), source })?;
    parse_scene(&bytes)
}

pub fn parse_scene(bytes: &[u8]) -> Result<SceneImage, SceneError> {
    let (width, height, values) = if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        parse_pgm(bytes)?
    } else {
        parse_grid(bytes)?
    };
    if !width.is_power_of_two() || !height.is_power_of_two() {
        return Err(SceneError::Dimensions { width, height });
    }
    let bits: Vec<u8> = values.iter().map(|&v| u8::from(v >= 0.5)).collect();
    Ok(SceneImage::from_binary(width, height, &bits).expect("grid size checked"))
}

/// Rows of `0`/`1`; blank lines and lines starting with `#` are skipped,
/// spaces inside a row are ignored.
fn parse_grid(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>), SceneError> {
    let text = std::str::from_utf8(bytes).map_err(|e| SceneError::Pgm {
        offset: e.valid_up_to(),
        message: "not UTF-8 text".into(),
    })?;
    let mut width = None;
    let mut values = Vec::new();
    let mut height = 0;
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut row = 0;
        for (col, ch) in line.chars().enumerate() {
            match ch {
                '0' | '1' => {
                    values.push(if ch == '1' { 1.0 } else { 0.0 });
                    row += 1;
                }
                ' ' | '\t' | '\r' => {}
                other => {
                    return Err(SceneError::Text {
                        line: i + 1,
                        column: col + 1,
                        message: format!("unexpected character {other:?}"),
                    })
                }
            }
        }
        match width {
            None => width = Some(row),
            Some(w) if w != row => {
                return Err(SceneError::Text {
                    line: i + 1,
                    column: 1,
                    message: format!("row has {row} cells, expected {w}"),
                })
            }
            _ => {}
        }
        height += 1;
    }
    let width = width.ok_or(SceneError::Text { line: 1, column: 1, message: "empty grid".into() })?;
    Ok((width, height, values))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> SceneError {
        SceneError::Pgm { offset: self.pos, message: message.into() }
    }

    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, SceneError> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| SceneError::Pgm { offset: start, message: format!("{what} out of range") })
    }
}

fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>), SceneError> {
    let binary = bytes[1] == b'5';
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(cur.err(format!("maxval {maxval} outside 1..=65535")));
    }
    let count = width * height;
    let mut values = Vec::with_capacity(count);
    if binary {
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(cur.err("expected one whitespace byte before raster")),
        }
        let depth = if maxval < 256 { 1 } else { 2 };
        let need = count * depth;
        let raster = &bytes[cur.pos..];
        if raster.len() < need {
            return Err(SceneError::Pgm {
                offset: bytes.len(),
                message: format!("raster has {} bytes, expected {need}", raster.len()),
            });
        }
        for px in raster[..need].chunks(depth) {
            let v = px.iter().fold(0usize, |acc, &b| acc * 256 + usize::from(b));
            values.push(v as f64 / maxval as f64);
        }
    } else {
        for _ in 0..count {
            let v = cur.number("pixel value")?;
            if v > maxval {
                return Err(cur.err(format!("pixel {v} exceeds maxval {maxval}")));
            }
            values.push(v as f64 / maxval as f64);
        }
    }
    for &v in &values {
        if !(0.0..=1.0).contains(&v) {
            return Err(cur.err("pixel exceeds maxval"));
        }
    }
    Ok((width, height, values))
}

/// Binary PGM, maxval 255, values clamped to `[0, 1]`.
pub fn encode_pgm(image: &SceneImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.values.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn write_pgm(path: &Path, image: &SceneImage) -> std::io::Result<()> {
    fs::write(path, encode_pgm(image))
}

/// Scene as a 0/1 text grid, thresholded at 0.5.
pub fn encode_grid(image: &SceneImage) -> String {
    let mut s = String::with_capacity(image.values.len() + image.height);
    for row in image.values.chunks(image.width) {
        s.extend(row.iter().map(|&v| if v >= 0.5 { '1' } else { '0' }));
        s.push('\n');
    }
    s
}

/// `level,energy` per calibration sample, plus the linear-range bounds.
pub fn write_calibration_csv<W: Write>(out: W, curve: &CalibrationCurve) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "energy", "in_linear_range"])?;
    for &(level, energy) in &curve.samples {
        let inside = level >= curve.linear_range.0 && level <= curve.linear_range.1;
        w.write_record([level.to_string(), energy.to_string(), inside.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
