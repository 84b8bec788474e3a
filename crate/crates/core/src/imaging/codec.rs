//! Binary PPM (P6, maxval 255) and 8-bit RGB PNG.
//!
//! Decoding sniffs the magic bytes; encoding picks the codec from the file
//! extension.

use std::io::{BufWriter, Cursor, Write};
use std::path::Path;

use super::{Image, ImageError, Result, CHANNELS};

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Ppm,
    Png,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "ppm" => Some(Self::Ppm),
            "png" => Some(Self::Png),
            _ => None,
        }
    }
}

#[inline]
fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn to_bytes(image: &Image) -> Vec<u8> {
    image.samples().iter().map(|&v| quantize(v)).collect()
}

fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Image {
    let samples = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
    Image::from_raw(width, height, samples)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ImageError::MissingFile(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    decode(&bytes)
}

/// Decodes an in-memory PPM or PNG file.
pub fn decode(bytes: &[u8]) -> Result<Image> {
    if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else if bytes.starts_with(PNG_MAGIC) {
        decode_png(bytes)
    } else {
        let head = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        Err(ImageError::UnsupportedFormat(format!("unrecognized magic {head:?}")))
    }
}

pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = Format::from_path(path).ok_or_else(|| {
        ImageError::UnsupportedFormat(format!("cannot infer codec from {}", path.display()))
    })?;
    let bytes = match format {
        Format::Ppm => encode_ppm(image),
        Format::Png => encode_png(image)?,
    };
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

pub fn encode_ppm(image: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(to_bytes(image));
    out
}

pub fn encode_png(image: &Image) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, image.width() as u32, image.height() as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(&to_bytes(image)).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(buf)
}

fn png_err(e: impl std::fmt::Display) -> ImageError {
    ImageError::CorruptData(format!("png: {e}"))
}

/// Reads whitespace-separated header tokens, skipping `#` comments.
struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::CorruptData(format!("ppm header: missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::CorruptData(format!("ppm header: bad {what}")))
    }
}

fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(ImageError::UnsupportedFormat(format!("ppm maxval {maxval} (only 255 supported)")));
    }
    if width == 0 || height == 0 {
        return Err(ImageError::InvalidDimensions { width, height });
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(ImageError::CorruptData("ppm header not terminated".into())),
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(CHANNELS))
        .ok_or(ImageError::InvalidDimensions { width, height })?;
    let payload = &bytes[cur.pos..];
    if payload.len() < need {
        return Err(ImageError::CorruptData(format!(
            "ppm payload truncated: {} of {need} bytes",
            payload.len()
        )));
    }
    Ok(from_bytes(width, height, &payload[..need]))
}

fn decode_png(bytes: &[u8]) -> Result<Image> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImageError::CorruptData("png: image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(ImageError::UnsupportedFormat(format!("png bit depth {:?}", info.bit_depth)));
    }
    if info.color_type != png::ColorType::Rgb {
        return Err(ImageError::UnsupportedFormat(format!("png color type {:?}", info.color_type)));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    Ok(from_bytes(w, h, &buf[..w * h * CHANNELS]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ppm(width: usize, height: usize, fill: u8) -> Vec<u8> {
        let mut b = format!("P6\n{width} {height}\n255\n").into_bytes();
        b.extend(std::iter::repeat_n(fill, width * height * 3));
        b
    }

    #[test]
    fn white_ppm_decodes_to_ones() {
        let img = decode(&ppm(2, 2, 255)).unwrap();
        assert_eq!(img.dims(), (2, 2));
        assert!(img.samples().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut b = b"P6 # comment\n2 # w\n1\n255\n".to_vec();
        b.extend([0, 0, 0, 255, 255, 255]);
        let img = decode(&b).unwrap();
        assert_eq!(img.pixel(1, 0), [1.0; 3]);
    }

    #[test]
    fn grayscale_and_garbage_rejected() {
        assert!(matches!(decode(b"P5\n1 1\n255\n\0"), Err(ImageError::UnsupportedFormat(_))));
        assert!(matches!(decode(b"GIF89a"), Err(ImageError::UnsupportedFormat(_))));
        assert!(matches!(decode(b"P6\n1 1\n65535\n\0\0"), Err(ImageError::UnsupportedFormat(_))));
    }

    #[test]
    fn truncated_payload_is_corrupt() {
        let mut b = ppm(4, 4, 9);
        b.truncate(b.len() - 1);
        assert!(matches!(decode(&b), Err(ImageError::CorruptData(_))));
        assert!(matches!(decode(b"P6\n4"), Err(ImageError::CorruptData(_))));
    }

    #[test]
    fn quantization_of_saved_bytes() {
        for (v, byte) in [(0.5, 128u8), (0.0, 0), (1.0, 255)] {
            let img = Image::filled(3, 2, [v; 3]).unwrap();
            let bytes = encode_ppm(&img);
            let header = b"P6\n3 2\n255\n".len();
            assert!(bytes[header..].iter().all(|&b| b == byte), "{v} -> {byte}");
        }
    }

    #[test]
    fn missing_file() {
        let err = load_image("/definitely/not/here.ppm").unwrap_err();
        assert!(matches!(err, ImageError::MissingFile(_)));
    }

    #[test]
    fn png_round_trip() {
        let img = Image::from_fn(7, 5, |x, y| [x as f64 / 6.0, y as f64 / 4.0, 0.5]).unwrap();
        let back = decode(&encode_png(&img).unwrap()).unwrap();
        assert_eq!(back.dims(), img.dims());
        for (a, b) in img.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12);
        }
    }
}
