//! Binary PGM (P5) / PPM (P6) reading and writing, 8 bits per sample.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::Image;
use crate::error::{Error, Result};

pub fn read_pnm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|message| Error::Parse {
        what: "PNM image",
        location: path.display().to_string(),
        message,
    })
}

pub fn write_pnm(path: &Path, img: &Image) -> Result<()> {
    let bytes = encode(img);
    crate::io_util::write_atomic(path, &bytes)
}

pub(crate) fn encode(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = Vec::with_capacity(img.data().len() + 20);
    write!(out, "{magic}\n{} {}\n255\n", img.width(), img.height()).unwrap();
    out.extend(img.data().iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    out
}

pub(crate) fn decode(bytes: &[u8]) -> std::result::Result<Image, String> {
    let mut pos = 0;
    let magic = token(bytes, &mut pos)?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(format!("unsupported magic {other:?}")),
    };
    let width: usize = number(bytes, &mut pos)?;
    let height: usize = number(bytes, &mut pos)?;
    let maxval: usize = number(bytes, &mut pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width * height * channels;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or_else(|| format!("raster truncated: need {n} bytes after offset {pos}"))?;
    let scale = maxval as f64;
    let data = raster.iter().map(|&b| b as f64 / scale).collect();
    Image::from_vec(width, height, channels, data).map_err(|e| e.to_string())
}

fn token(bytes: &[u8], pos: &mut usize) -> std::result::Result<String, String> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err("unexpected end of header".into()),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn number(bytes: &[u8], pos: &mut usize) -> std::result::Result<usize, String> {
    let t = token(bytes, pos)?;
    t.parse().map_err(|_| format!("bad header field {t:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_bit_round_trip() {
        let img = Image::from_fn(5, 3, 3, |x, y, c| ((x + 2 * y + 3 * c) * 11 % 256) as f64 / 255.0);
        let back = decode(&encode(&img)).unwrap();
        assert_eq!(back, img);
        let gray = img.to_gray();
        let back = decode(&encode(&gray)).unwrap();
        assert_eq!(back.channels(), 1);
        for (a, b) in back.data().iter().zip(gray.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn header_comments_and_truncation() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend([0u8, 255]);
        let img = decode(&bytes).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(b"P3\n1 1\n255\n0").is_err());
    }
}
