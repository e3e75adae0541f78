//! PNG (8-bit gray/RGB) and binary PGM/PPM (maxval 255) reading and writing.

use std::fs;
use std::io::{Cursor, ErrorKind};
use std::path::Path;

use super::{ImageGrid, RegionMask};
use crate::error::{Error, Result};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

pub fn load_image(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(&bytes, path)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(&bytes, path)
    } else {
        Err(Error::Format(format!("{}: not a PNG or binary PGM/PPM file", path.display())))
    }
}

/// Saves as PNG, PGM or PPM depending on the extension. Values are rounded
/// half away from zero to 8 bits.
pub fn save_image(img: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let bytes = match ext.as_str() {
        "png" => encode_png(img)?,
        "pgm" => encode_pnm(&img.with_channels(1)?),
        "ppm" => encode_pnm(&img.with_channels(3)?),
        "pnm" => encode_pnm(img),
        other => {
            return Err(Error::Format(format!(
                "{}: unsupported output extension `{other}`",
                path.display()
            )))
        }
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a mask image; a pixel is set when its intensity is at least 0.5.
pub fn load_mask(path: impl AsRef<Path>) -> Result<RegionMask> {
    let img = load_image(path)?.with_channels(1)?;
    let bits = img.data().iter().map(|v| *v >= 0.5).collect();
    RegionMask::new(img.width(), img.height(), bits)
}

pub fn save_mask(mask: &RegionMask, path: impl AsRef<Path>) -> Result<()> {
    let data = mask.bits().iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
    save_image(&ImageGrid::new(mask.width(), mask.height(), 1, data)?, path)
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Interleaves planar data into 8-bit samples.
fn interleaved_u8(img: &ImageGrid) -> Vec<u8> {
    let n = img.width() * img.height();
    let mut out = Vec::with_capacity(n * img.channels());
    for i in 0..n {
        for c in 0..img.channels() {
            out.push(quantize(img.plane(c)[i]));
        }
    }
    out
}

fn from_interleaved_u8(w: usize, h: usize, channels: usize, stride: usize, bytes: &[u8]) -> Result<ImageGrid> {
    let mut data = vec![0.0; w * h * channels];
    for i in 0..w * h {
        for c in 0..channels {
            data[c * w * h + i] = bytes[i * stride + c] as f64 / 255.0;
        }
    }
    ImageGrid::new(w, h, channels, data)
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<ImageGrid> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| png_error(e, path))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format(format!("{}: PNG too large", path.display())))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_error(e, path))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "{}: only 8-bit PNG is supported, got {:?}",
            path.display(),
            info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let (channels, stride) = match info.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (1, 2),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (3, 4),
        other => {
            return Err(Error::Format(format!("{}: unsupported PNG color type {other:?}", path.display())))
        }
    };
    from_interleaved_u8(w, h, channels, stride, &buf[..w * h * stride])
}

fn png_error(e: png::DecodingError, path: &Path) -> Error {
    match e {
        png::DecodingError::IoError(io) => Error::io(path, io),
        other => {
            let msg = other.to_string();
            // the decoder reports a truncated stream as a format problem
            if msg.contains("EOF") || msg.contains("end of") || msg.contains("truncated") {
                Error::io(path, std::io::Error::new(ErrorKind::UnexpectedEof, msg))
            } else {
                Error::Format(format!("{}: {msg}", path.display()))
            }
        }
    }
}

fn encode_png(img: &ImageGrid) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(if img.channels() == 1 {
            png::ColorType::Grayscale
        } else {
            png::ColorType::Rgb
        });
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Format(format!("PNG encode: {e}")))?;
        writer
            .write_image_data(&interleaved_u8(img))
            .map_err(|e| Error::Format(format!("PNG encode: {e}")))?;
    }
    Ok(out)
}

fn encode_pnm(img: &ImageGrid) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(interleaved_u8(img));
    out
}

fn decode_pnm(bytes: &[u8], path: &Path) -> Result<ImageGrid> {
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        *field = next_header_number(bytes, &mut pos).ok_or_else(|| truncated(path, "PNM header"))?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Format(format!("{}: PNM maxval {maxval} unsupported (need 255)", path.display())));
    }
    if w == 0 || h == 0 {
        return Err(Error::Format(format!("{}: zero-sized PNM", path.display())));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = w * h * channels;
    if bytes.len() < pos + need {
        return Err(truncated(path, "PNM raster"));
    }
    from_interleaved_u8(w, h, channels, channels, &bytes[pos..pos + need])
}

fn truncated(path: &Path, what: &str) -> Error {
    Error::io(
        path,
        std::io::Error::new(ErrorKind::UnexpectedEof, format!("truncated {what}")),
    )
}

fn next_header_number(bytes: &[u8], pos: &mut usize) -> Option<usize> {
    loop {
        match bytes.get(*pos)? {
            b'#' => {
                while *bytes.get(*pos)? != b'\n' {
                    *pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    // a number running into end-of-file is a truncated header
    if *pos == start || *pos >= bytes.len() {
        return None;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()?.parse().ok()
}
