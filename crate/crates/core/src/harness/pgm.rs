//! Binary greyscale PGM (P5), 8- or 16-bit.

use std::io::Write;
use std::path::Path;

use crate::error::{Result, SgpsError};
use crate::signal::Signal;

fn image_err(path: &Path, msg: impl std::fmt::Display) -> SgpsError {
    SgpsError::Image(format!("{}: {msg}", path.display()))
}

/// Reads a P5 image as a `[height, width]` signal scaled to [0, 1] by its maxval.
pub fn read_pgm(path: &Path) -> Result<Signal> {
    let bytes = std::fs::read(path).map_err(|e| image_err(path, e))?;
    decode_pgm(&bytes).map_err(|m| image_err(path, m))
}

pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<Signal, String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(format!("unsupported magic {:?} (only binary P5)", fields[0]));
    }
    let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| format!("bad {what} {s:?}"));
    let (w, h, maxval) = (num(&fields[1], "width")?, num(&fields[2], "height")?, num(&fields[3], "maxval")?);
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(format!("invalid header {w}x{h} maxval {maxval}"));
    }
    // single whitespace byte after maxval
    pos += 1;
    let depth = if maxval < 256 { 1 } else { 2 };
    let need = w * h * depth;
    if bytes.len() < pos + need {
        return Err(format!("expected {need} bytes of pixel data, found {}", bytes.len().saturating_sub(pos)));
    }
    let px = &bytes[pos..pos + need];
    let scale = maxval as f64;
    let data: Vec<f64> = if depth == 1 {
        px.iter().map(|&b| b as f64 / scale).collect()
    } else {
        px.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale).collect()
    };
    Signal::new(data, vec![h, w]).map_err(|e| e.to_string())
}

/// Writes `img` (values clamped to [0, 1]) with 8 or 16 bits per pixel.
pub fn write_pgm(path: &Path, img: &Signal, bits: u8) -> Result<()> {
    let maxval: u32 = match bits {
        8 => 255,
        16 => 65535,
        _ => return Err(image_err(path, format!("unsupported bit depth {bits}"))),
    };
    let (h, w) = img.dims2();
    let mut out = format!("P5\n{w} {h}\n{maxval}\n").into_bytes();
    for &v in img.iter() {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u32;
        if bits == 8 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&(q as u16).to_be_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| image_err(path, e))?;
    f.write_all(&out)?;
    Ok(())
}
