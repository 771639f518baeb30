//! Reading and writing images and volumes.
//!
//! 2D: 8-bit grayscale PNG and PGM (plus anything else the `image` crate can
//! decode, converted to luma). 3D: multi-page grayscale TIFF, or raw
//! little-endian `f32` voxels (x fastest) with a JSON sidecar
//! `{"dims":[x,y,z],"dtype":"f32"}` next to it (same stem, `.json`).
//!
//! Values keep the `[0, 255]` convention: 8-bit files load unchanged, 16-bit
//! files are rescaled onto `[0, 255]`, float data loads as-is. Writing to an
//! 8-bit format rounds and clamps.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use ::image::{DynamicImage, GrayImage, ImageFormat};
use serde::{Deserialize, Serialize};
use tiff::decoder::{Decoder, DecodingResult};
use tiff::encoder::{colortype, TiffEncoder};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image, Shape};

/// File formats, chosen by extension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Png,
    Pgm,
    /// Other 2D formats decodable by the `image` crate (read-only).
    Other2d,
    Tiff,
    Raw,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "png" => Ok(Format::Png),
            "pgm" | "pnm" => Ok(Format::Pgm),
            "gif" | "bmp" | "jpg" | "jpeg" | "ppm" => Ok(Format::Other2d),
            "tif" | "tiff" => Ok(Format::Tiff),
            "raw" => Ok(Format::Raw),
            _ => Err(Error::UnsupportedFormat(path.display().to_string())),
        }
    }

    /// Whether writing to this format quantizes to 8 bits.
    pub fn is_8bit(self) -> bool {
        !matches!(self, Format::Raw)
    }
}

/// Sidecar describing a raw volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub dims: Vec<usize>,
    pub dtype: String,
}

pub fn raw_sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn codec_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Codec {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

const U16_TO_BYTE: f64 = 255.0 / 65535.0;

/// Loads a 2D grayscale image (color inputs are converted to luma).
pub fn load_image_2d(path: &Path) -> Result<Image> {
    let decoded = ::image::open(path).map_err(|e| match e {
        ::image::ImageError::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => codec_err(path, other),
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<f64> = match decoded {
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(|v| v as f64 * U16_TO_BYTE).collect(),
        other => other.to_luma8().into_raw().into_iter().map(f64::from).collect(),
    };
    Image::new(Shape::new_2d(w, h)?, data)
}

/// Writes a 2D image as 8-bit PNG or PGM.
pub fn save_image_2d(img: &Image, path: &Path) -> Result<()> {
    if img.ndim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: img.ndim(),
        });
    }
    let format = match Format::from_path(path)? {
        Format::Png => ImageFormat::Png,
        Format::Pgm => ImageFormat::Pnm,
        _ => return Err(Error::UnsupportedFormat(path.display().to_string())),
    };
    let [w, h, _] = img.shape().extents();
    let bytes = img.data().iter().map(|&v| to_u8(v)).collect();
    let buf = GrayImage::from_raw(w as u32, h as u32, bytes).expect("buffer matches shape");
    buf.save_with_format(path, format).map_err(|e| codec_err(path, e))
}

fn decode_page(result: DecodingResult, path: &Path) -> Result<Vec<f64>> {
    Ok(match result {
        DecodingResult::U8(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::U16(v) => v.into_iter().map(|x| x as f64 * U16_TO_BYTE).collect(),
        DecodingResult::F32(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::F64(v) => v,
        _ => return Err(codec_err(path, "unsupported TIFF sample type")),
    })
}

/// Loads a multi-page grayscale TIFF; one page per z slice.
pub fn load_tiff_volume(path: &Path) -> Result<Image> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut decoder = Decoder::new(BufReader::new(file)).map_err(|e| codec_err(path, e))?;
    let (w, h) = decoder.dimensions().map_err(|e| codec_err(path, e))?;
    let mut data = Vec::new();
    let mut pages = 0;
    loop {
        if decoder.dimensions().map_err(|e| codec_err(path, e))? != (w, h) {
            return Err(codec_err(path, "pages differ in size"));
        }
        match decoder.colortype().map_err(|e| codec_err(path, e))? {
            tiff::ColorType::Gray(_) => {}
            other => return Err(codec_err(path, format!("expected grayscale, got {other:?}"))),
        }
        let page = decoder.read_image().map_err(|e| codec_err(path, e))?;
        data.extend(decode_page(page, path)?);
        pages += 1;
        if !decoder.more_images() {
            break;
        }
        decoder.next_image().map_err(|e| codec_err(path, e))?;
    }
    Image::new(Shape::new_3d(w as usize, h as usize, pages)?, data)
}

/// Writes a volume as a multi-page 8-bit grayscale TIFF.
pub fn save_tiff_volume(img: &Image, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut encoder = TiffEncoder::new(BufWriter::new(file)).map_err(|e| codec_err(path, e))?;
    let [w, h, d] = img.shape().extents();
    let plane = w * h;
    for z in 0..d {
        let page: Vec<u8> = img.data()[z * plane..(z + 1) * plane]
            .iter()
            .map(|&v| to_u8(v))
            .collect();
        encoder
            .write_image::<colortype::Gray8>(w as u32, h as u32, &page)
            .map_err(|e| codec_err(path, e))?;
    }
    Ok(())
}

pub fn load_raw_volume(path: &Path) -> Result<Image> {
    let sidecar = raw_sidecar_path(path);
    let text = fs::read_to_string(&sidecar).map_err(io_err(&sidecar))?;
    let header: RawHeader = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: sidecar.clone(),
        source,
    })?;
    if header.dtype != "f32" {
        return Err(Error::UnsupportedFormat(format!("raw dtype {}", header.dtype)));
    }
    let shape = Shape::from_dims(&header.dims)?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() != shape.len() * 4 {
        return Err(Error::LengthMismatch {
            expected: shape.len() * 4,
            actual: bytes.len(),
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Image::new(shape, data)
}

/// Writes raw little-endian `f32` voxels and the JSON sidecar.
pub fn save_raw_volume(img: &Image, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    fs::write(path, bytes).map_err(io_err(path))?;
    let header = RawHeader {
        dims: img.shape().dims().to_vec(),
        dtype: "f32".into(),
    };
    let sidecar = raw_sidecar_path(path);
    let text = serde_json::to_string(&header).expect("header serializes");
    fs::write(&sidecar, text).map_err(io_err(&sidecar))
}

/// Loads a 3D volume, choosing TIFF or raw by extension.
pub fn load_volume(path: &Path) -> Result<Image> {
    match Format::from_path(path)? {
        Format::Tiff => load_tiff_volume(path),
        Format::Raw => load_raw_volume(path),
        _ => Err(Error::UnsupportedFormat(format!(
            "{} is not a volume format (.tif or .raw)",
            path.display()
        ))),
    }
}

pub fn save_volume(img: &Image, path: &Path) -> Result<()> {
    match Format::from_path(path)? {
        Format::Tiff => save_tiff_volume(img, path),
        Format::Raw => save_raw_volume(img, path),
        _ => Err(Error::UnsupportedFormat(format!(
            "{} is not a volume format (.tif or .raw)",
            path.display()
        ))),
    }
}

/// Loads a file at the dimensionality it stores. A single-page TIFF is 2D.
pub fn load_any(path: &Path) -> Result<Image> {
    match Format::from_path(path)? {
        Format::Raw => load_raw_volume(path),
        Format::Tiff => {
            let vol = load_tiff_volume(path)?;
            match vol.shape().extents() {
                [w, h, 1] => Image::new(Shape::new_2d(w, h)?, vol.into_data()),
                _ => Ok(vol),
            }
        }
        _ => load_image_2d(path),
    }
}

/// Loads an image and checks its dimensionality.
pub fn load(path: &Path, ndim: usize) -> Result<Image> {
    let img = load_any(path)?;
    if img.ndim() != ndim {
        return Err(Error::DimensionMismatch {
            expected: ndim,
            actual: img.ndim(),
        });
    }
    Ok(img)
}

/// Saves by dimensionality and extension.
pub fn save(img: &Image, path: &Path) -> Result<()> {
    if img.ndim() == 3 {
        save_volume(img, path)
    } else if Format::from_path(path)? == Format::Raw {
        save_raw_volume(img, path)
    } else {
        save_image_2d(img, path)
    }
}

/// Loads a mask; nonzero pixels are set.
pub fn load_mask(path: &Path, ndim: usize) -> Result<BinaryMask> {
    Ok(BinaryMask::from_positive(&load(path, ndim)?))
}
