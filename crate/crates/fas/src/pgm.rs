//! PGM (P2 ascii / P5 binary) reader and writer.
//!
//! Values are rescaled to `[0, 1]` on read. Maxval up to 65535 is
//! supported; 16-bit P5 samples are big-endian per the format. Comment
//! lines (`#`) are tolerated anywhere whitespace is allowed in the header.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::GrayImage;

struct Scanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Scanner { bytes, pos: 0 }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn read_number(&mut self) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected a decimal number"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err("number out of range"))
    }
}

/// Decode a PGM byte buffer.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut sc = Scanner::new(bytes);
    if bytes.len() < 2 {
        return Err(sc.err("file too short for a PGM magic"));
    }
    let magic = &bytes[0..2];
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        _ => return Err(sc.err("unsupported magic (want P2 or P5)")),
    };
    sc.pos = 2;
    let width = sc.read_number()? as usize;
    let height = sc.read_number()? as usize;
    let maxval = sc.read_number()?;
    if maxval == 0 || maxval > 65535 {
        return Err(sc.err(format!("maxval {maxval} out of range 1..=65535")));
    }
    if width == 0 || height == 0 {
        return Err(sc.err("zero image dimension"));
    }
    let count = width * height;
    let scale = 1.0 / maxval as f64;
    let mut pixels = Vec::with_capacity(count);

    if binary {
        // Exactly one whitespace byte separates the header from the payload.
        if sc.pos >= bytes.len() || !bytes[sc.pos].is_ascii_whitespace() {
            return Err(sc.err("expected whitespace before binary payload"));
        }
        sc.pos += 1;
        let wide = maxval > 255;
        let sample_len = if wide { 2 } else { 1 };
        if bytes.len() - sc.pos < count * sample_len {
            sc.pos = bytes.len();
            return Err(sc.err("truncated binary payload"));
        }
        for i in 0..count {
            let off = sc.pos + i * sample_len;
            let raw = if wide {
                u16::from_be_bytes([bytes[off], bytes[off + 1]]) as u32
            } else {
                bytes[off] as u32
            };
            if raw > maxval {
                sc.pos = off;
                return Err(sc.err(format!("sample {raw} exceeds maxval {maxval}")));
            }
            pixels.push(raw as f64 * scale);
        }
    } else {
        for _ in 0..count {
            let raw = sc.read_number()?;
            if raw > maxval {
                return Err(sc.err(format!("sample {raw} exceeds maxval {maxval}")));
            }
            pixels.push(raw as f64 * scale);
        }
    }
    GrayImage::from_pixels(width, height, pixels)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_pgm(&fs::read(path)?)
}

/// Encode as binary P5. Values are clipped to `[0, 1]`, linearly mapped to
/// `0..=maxval` and rounded half up. Returns the fraction of clipped pixels.
pub fn encode_pgm(image: &GrayImage, maxval: u32) -> Result<(Vec<u8>, f64)> {
    if maxval == 0 || maxval > 65535 {
        return Err(Error::InvalidInput(format!(
            "maxval {maxval} out of range 1..=65535"
        )));
    }
    if image.pixels.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("pgm pixel values"));
    }
    let mut out = Vec::with_capacity(32 + image.pixels.len() * 2);
    out.extend_from_slice(format!("P5\n{} {}\n{}\n", image.width, image.height, maxval).as_bytes());
    let mut clipped = 0usize;
    for &p in &image.pixels {
        let c = p.clamp(0.0, 1.0);
        if c != p {
            clipped += 1;
        }
        let q = (c * maxval as f64 + 0.5).floor() as u32;
        let q = q.min(maxval);
        if maxval > 255 {
            out.extend_from_slice(&(q as u16).to_be_bytes());
        } else {
            out.push(q as u8);
        }
    }
    Ok((out, clipped as f64 / image.pixels.len().max(1) as f64))
}

pub fn write_pgm(image: &GrayImage, path: impl AsRef<Path>, maxval: u32) -> Result<()> {
    let (bytes, clipped) = encode_pgm(image, maxval)?;
    if clipped > 0.0 {
        eprintln!(
            "write_pgm: clipped {:.2}% of pixels to [0, 1] for {}",
            100.0 * clipped,
            path.as_ref().display()
        );
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p5_decode_scales_bytes() {
        let bytes = b"P5\n2 2\n255\n\x00\xff\x80\x40";
        let img = decode_pgm(bytes).unwrap();
        assert_eq!(img.width, 2);
        assert_eq!(img.pixels[0], 0.0);
        assert_eq!(img.pixels[1], 1.0);
        assert_eq!(img.pixels[2], 128.0 / 255.0);
        assert_eq!(img.pixels[3], 64.0 / 255.0);
    }

    #[test]
    fn p2_and_p5_agree() {
        let ascii = b"P2\n# comment line\n2 2\n255\n0 255\n128 64\n";
        let binary = b"P5\n2 2\n255\n\x00\xff\x80\x40";
        assert_eq!(decode_pgm(ascii).unwrap(), decode_pgm(binary).unwrap());
    }

    #[test]
    fn sixteen_bit_big_endian() {
        let mut bytes = b"P5\n1 2\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x00, 0x00, 0xff, 0xff]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img.pixels, vec![0.0, 1.0]);
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let bytes = b"P5\n2 2\n255\n\x00\xff";
        match decode_pgm(bytes) {
            Err(Error::Parse { offset, .. }) => assert!(offset > 0),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(decode_pgm(b"P6\n1 1\n255\n\x00\x00\x00").is_err());
    }

    #[test]
    fn rounding_rule() {
        let img = GrayImage::from_pixels(3, 1, vec![0.0, 0.5, 1.0]).unwrap();
        let (bytes, clipped) = encode_pgm(&img, 255).unwrap();
        assert_eq!(clipped, 0.0);
        let payload = &bytes[bytes.len() - 3..];
        assert_eq!(payload, &[0u8, 128, 255]);
    }

    #[test]
    fn clipping_is_reported() {
        let img = GrayImage::from_pixels(2, 1, vec![-0.5, 1.5]).unwrap();
        let (bytes, clipped) = encode_pgm(&img, 255).unwrap();
        assert_eq!(clipped, 1.0);
        assert_eq!(&bytes[bytes.len() - 2..], &[0u8, 255]);
    }

    #[test]
    fn round_trip_within_half_quantization_step() {
        let mut rng = crate::rng::RngStream::from_seed(30);
        let img = GrayImage::from_pixels(8, 8, (0..64).map(|_| rng.uniform()).collect()).unwrap();
        let (bytes, _) = encode_pgm(&img, 255).unwrap();
        let back = decode_pgm(&bytes).unwrap();
        for (a, b) in img.pixels.iter().zip(&back.pixels) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12);
        }
    }
}
