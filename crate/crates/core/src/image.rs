//! Floating-point images and binary PNM (P5/P6) I/O.

use std::io::Write;

use crate::color::luma;
use crate::{Error, Result};

/// Row-major interleaved image with 1 (gray) or 3 (RGB) channels on the
/// 8-bit code-value scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "{channels} channels; expected 1 or 3"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::gray(width, height, vec![value; width * height])
    }

    pub fn from_rgb8(width: usize, height: usize, rgb: &[[u8; 3]]) -> Result<Self> {
        let data = rgb.iter().flat_map(|p| p.map(f64::from)).collect();
        Self::new(width, height, 3, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// BT.709 luma; gray images are returned unchanged.
    pub fn luminance(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }
}

fn pnm_header(out: &mut Vec<u8>, magic: &str, w: usize, h: usize) {
    write!(out, "{magic}\n{w} {h}\n255\n").expect("write to Vec");
}

/// Binary PPM (P6) encoding of an 8-bit RGB raster.
pub fn encode_ppm(width: usize, height: usize, rgb: &[[u8; 3]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + rgb.len() * 3);
    pnm_header(&mut out, "P6", width, height);
    for p in rgb {
        out.extend_from_slice(p);
    }
    out
}

/// Binary PGM (P5) encoding of an 8-bit gray raster.
pub fn encode_pgm(width: usize, height: usize, gray: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + gray.len());
    pnm_header(&mut out, "P5", width, height);
    out.extend_from_slice(gray);
    out
}

/// Decodes a binary P5 or P6 file with maxval 255.
pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Data("truncated PNM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let channels = match fields[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        m => return Err(Error::Data(format!("unsupported PNM magic '{m}'"))),
    };
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Data(format!("bad PNM field '{s}'")))
    };
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval != 255 {
        return Err(Error::Data(format!("unsupported PNM maxval {maxval}")));
    }
    let need = w * h * channels;
    let body = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::Data("truncated PNM body".into()))?;
    Image::new(w, h, channels, body.iter().map(|&b| f64::from(b)).collect())
}
