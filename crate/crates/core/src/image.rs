//! Dense 8-bit RGB rasters and their on-disk formats (binary PPM and PNG).

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

/// Number of interleaved samples per pixel. Always RGB.
pub const CHANNELS: usize = 3;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image must be non-empty, got {width}x{height}")]
    Empty { width: usize, height: usize },
    #[error("buffer length {actual} does not match {width}x{height}x3 = {expected}")]
    LengthMismatch {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("malformed PPM: {0}")]
    Ppm(String),
    #[error("unsupported image file extension {0:?} (expected .ppm or .png)")]
    UnsupportedFormat(String),
    #[error("png codec: {0}")]
    Png(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major interleaved RGB image with one byte per sample.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Empty { width, height });
        }
        let expected = width * height * CHANNELS;
        if data.len() != expected {
            return Err(ImageError::LengthMismatch {
                width,
                height,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Image filled with a single colour.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, ImageError> {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * CHANNELS)
            .collect();
        Self::from_raw(width, height, data)
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::from_raw(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    /// Bytes held by the sample buffer.
    pub fn footprint(&self) -> usize {
        self.data.len()
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(CHANNELS).map(|p| [p[0], p[1], p[2]])
    }

    /// Binary PPM (P6, maxval 255). The header is always `P6\n<w> <h>\n255\n`.
    pub fn to_ppm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_ppm_bytes(bytes: &[u8]) -> Result<Self, ImageError> {
        let mut reader = BufReader::new(bytes);
        let mut tokens = Vec::with_capacity(4);
        // Header: magic, width, height, maxval separated by whitespace; '#' starts a comment.
        let mut token = String::new();
        while tokens.len() < 4 {
            let mut byte = [0u8; 1];
            if reader.read(&mut byte)? == 0 {
                return Err(ImageError::Ppm("truncated header".into()));
            }
            let c = byte[0] as char;
            if c == '#' {
                let mut skip = String::new();
                reader.read_line(&mut skip)?;
                continue;
            }
            if c.is_ascii_whitespace() {
                if !token.is_empty() {
                    tokens.push(std::mem::take(&mut token));
                }
            } else {
                token.push(c);
            }
        }
        if tokens[0] != "P6" {
            return Err(ImageError::Ppm(format!(
                "unsupported magic {:?}",
                tokens[0]
            )));
        }
        let parse = |s: &str, what: &str| {
            s.parse::<usize>()
                .map_err(|_| ImageError::Ppm(format!("bad {what} {s:?}")))
        };
        let width = parse(&tokens[1], "width")?;
        let height = parse(&tokens[2], "height")?;
        let maxval = parse(&tokens[3], "maxval")?;
        if maxval != 255 {
            return Err(ImageError::Ppm(format!("maxval {maxval} unsupported")));
        }
        let mut data = Vec::new();
        reader.read_to_end(&mut data)?;
        let expected = width * height * CHANNELS;
        if data.len() < expected {
            return Err(ImageError::Ppm(format!(
                "expected {expected} pixel bytes, found {}",
                data.len()
            )));
        }
        data.truncate(expected);
        Self::from_raw(width, height, data)
    }

    /// Reads `.ppm` or `.png` depending on the extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        let path = path.as_ref();
        match extension(path).as_str() {
            "ppm" => Self::from_ppm_bytes(&fs::read(path)?),
            "png" => {
                let img = image::open(path).map_err(|e| match e {
                    image::ImageError::IoError(io) => ImageError::Io(io),
                    other => ImageError::Png(other.to_string()),
                })?;
                let rgb = img.to_rgb8();
                let (w, h) = rgb.dimensions();
                Self::from_raw(w as usize, h as usize, rgb.into_raw())
            }
            other => Err(ImageError::UnsupportedFormat(other.to_string())),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let path = path.as_ref();
        match extension(path).as_str() {
            "ppm" => {
                let mut f = fs::File::create(path)?;
                f.write_all(&self.to_ppm_bytes())?;
                Ok(())
            }
            "png" => image::save_buffer(
                path,
                &self.data,
                self.width as u32,
                self.height as u32,
                image::ExtendedColorType::Rgb8,
            )
            .map_err(|e| match e {
                image::ImageError::IoError(io) => ImageError::Io(io),
                other => ImageError::Png(other.to_string()),
            }),
            other => Err(ImageError::UnsupportedFormat(other.to_string())),
        }
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default()
}

/// Deterministic test pattern: smooth colour gradients with a checker overlay.
pub fn test_pattern(width: usize, height: usize) -> ImageBuffer {
    ImageBuffer::from_fn(width, height, |x, y| {
        let check = if ((x / 4) + (y / 4)) % 2 == 0 { 40 } else { 0 };
        let r = (x * 200 / width.max(1)) as u8 + check;
        let g = (y * 200 / height.max(1)) as u8 + check / 2;
        let b = (((x + y) * 97) % 180) as u8 + 30;
        [r, g, b]
    })
    .expect("non-empty test pattern")
}
