//! Microscope volumes.
//!
//! Two on-disk layouts are read: a raw voxel file with a JSON sidecar, and a
//! multi-page grayscale TIFF whose pages are z-slices. Voxels are stored
//! x-fastest, then y, then z.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tiff::decoder::{Decoder, DecodingResult};
use tiff::encoder::{colortype, TiffEncoder};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    U8,
    U16,
}

impl Dtype {
    pub fn max_value(self) -> u32 {
        match self {
            Dtype::U8 => u8::MAX as u32,
            Dtype::U16 => u16::MAX as u32,
        }
    }

    pub fn bytes(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Voxels {
    U8(Vec<u8>),
    U16(Vec<u16>),
}

impl Voxels {
    fn len(&self) -> usize {
        match self {
            Voxels::U8(v) => v.len(),
            Voxels::U16(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endianness {
    Little,
    Big,
}

/// JSON sidecar of a raw volume file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub dims: [usize; 3],
    pub dtype: Dtype,
    #[serde(default)]
    pub origin: [i64; 3],
    #[serde(default = "little")]
    pub endianness: Endianness,
}

fn little() -> Endianness {
    Endianness::Little
}

/// Dense 3D intensity grid placed at `origin` in global SWC coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    origin: [i64; 3],
    voxels: Voxels,
}

impl Volume {
    pub fn new(dims: [usize; 3], origin: [i64; 3], voxels: Voxels) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Volume(format!("dimensions must be positive, got {dims:?}")));
        }
        let count = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or_else(|| Error::Volume("voxel count overflows".into()))?;
        if voxels.len() != count {
            return Err(Error::Volume(format!(
                "dims {dims:?} need {count} voxels, got {}",
                voxels.len()
            )));
        }
        Ok(Volume { dims, origin, voxels })
    }

    pub fn zeros(dims: [usize; 3], origin: [i64; 3], dtype: Dtype) -> Result<Self> {
        let n = dims.iter().product();
        let voxels = match dtype {
            Dtype::U8 => Voxels::U8(vec![0; n]),
            Dtype::U16 => Voxels::U16(vec![0; n]),
        };
        Volume::new(dims, origin, voxels)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> [i64; 3] {
        self.origin
    }

    pub fn dtype(&self) -> Dtype {
        match self.voxels {
            Voxels::U8(_) => Dtype::U8,
            Voxels::U16(_) => Dtype::U16,
        }
    }

    pub fn voxels(&self) -> &Voxels {
        &self.voxels
    }

    pub fn voxel_count(&self) -> usize {
        self.voxels.len()
    }

    /// Same grid, new origin.
    pub fn with_origin(mut self, origin: [i64; 3]) -> Self {
        self.origin = origin;
        self
    }

    #[inline]
    pub fn linear_index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    /// Local-coordinate voxel value.
    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u32 {
        let i = self.linear_index(x, y, z);
        match &self.voxels {
            Voxels::U8(v) => v[i] as u32,
            Voxels::U16(v) => v[i] as u32,
        }
    }

    /// Voxel value at a local coordinate that may lie outside the grid.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64, z: i64) -> Option<u32> {
        if x < 0 || y < 0 || z < 0 {
            return None;
        }
        let (x, y, z) = (x as usize, y as usize, z as usize);
        if x >= self.dims[0] || y >= self.dims[1] || z >= self.dims[2] {
            return None;
        }
        Some(self.get(x, y, z))
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            dims: self.dims,
            dtype: self.dtype(),
            origin: self.origin,
            endianness: Endianness::Little,
        }
    }

    pub fn raw_bytes(&self) -> Vec<u8> {
        match &self.voxels {
            Voxels::U8(v) => v.clone(),
            Voxels::U16(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }
}

/// Sidecar path of a raw volume: same stem, `.json` extension.
pub fn sidecar_path(raw: &Path) -> PathBuf {
    raw.with_extension("json")
}

fn is_tiff(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("tif" | "tiff")
    )
}

/// Loads a raw+sidecar volume or a multi-page TIFF.
///
/// `path` may name the raw file or its sidecar. A TIFF may have an optional
/// sidecar next to it that supplies the origin.
pub fn load_volume(path: &Path) -> Result<Volume> {
    if is_tiff(path) {
        return load_tiff(path);
    }
    let (raw, side) = if path.extension().and_then(|e| e.to_str()) == Some("json") {
        (path.with_extension("raw"), path.to_path_buf())
    } else {
        (path.to_path_buf(), sidecar_path(path))
    };
    if !side.exists() {
        return Err(Error::Volume(format!("missing sidecar {}", side.display())));
    }
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(&side)?)?;
    let bytes = fs::read(&raw)?;
    volume_from_raw(&sidecar, &bytes)
}

pub fn volume_from_raw(sidecar: &Sidecar, bytes: &[u8]) -> Result<Volume> {
    let count: usize = sidecar.dims.iter().product();
    let expected = count * sidecar.dtype.bytes();
    if bytes.len() != expected {
        return Err(Error::Volume(format!(
            "sidecar dims {:?} ({:?}) need {expected} bytes, file has {}",
            sidecar.dims,
            sidecar.dtype,
            bytes.len()
        )));
    }
    let voxels = match sidecar.dtype {
        Dtype::U8 => Voxels::U8(bytes.to_vec()),
        Dtype::U16 => Voxels::U16(
            bytes
                .chunks_exact(2)
                .map(|c| match sidecar.endianness {
                    Endianness::Little => u16::from_le_bytes([c[0], c[1]]),
                    Endianness::Big => u16::from_be_bytes([c[0], c[1]]),
                })
                .collect(),
        ),
    };
    Volume::new(sidecar.dims, sidecar.origin, voxels)
}

fn load_tiff(path: &Path) -> Result<Volume> {
    let mut dec = Decoder::new(BufReader::new(File::open(path)?))?;
    let (w, h) = dec.dimensions()?;
    let mut u8s = Vec::new();
    let mut u16s = Vec::new();
    let mut dtype = None;
    let mut pages = 0usize;
    loop {
        if dec.dimensions()? != (w, h) {
            return Err(Error::Volume(format!("page {pages} has different dimensions")));
        }
        let page_dtype = match dec.colortype()? {
            tiff::ColorType::Gray(8) => Dtype::U8,
            tiff::ColorType::Gray(16) => Dtype::U16,
            other => return Err(Error::Volume(format!("unsupported TIFF pixel type {other:?}"))),
        };
        if *dtype.get_or_insert(page_dtype) != page_dtype {
            return Err(Error::Volume("pages mix bit depths".into()));
        }
        match dec.read_image()? {
            DecodingResult::U8(v) => u8s.extend_from_slice(&v),
            DecodingResult::U16(v) => u16s.extend_from_slice(&v),
            _ => return Err(Error::Volume("unsupported TIFF sample format".into())),
        }
        pages += 1;
        if !dec.more_images() {
            break;
        }
        dec.next_image()?;
    }
    let side = sidecar_path(path);
    let origin = if side.exists() {
        serde_json::from_str::<Sidecar>(&fs::read_to_string(&side)?)?.origin
    } else {
        [0; 3]
    };
    let voxels = match dtype {
        Some(Dtype::U8) => Voxels::U8(u8s),
        _ => Voxels::U16(u16s),
    };
    Volume::new([w as usize, h as usize, pages], origin, voxels)
}

/// Writes the raw voxels to `path` and the sidecar next to it.
pub fn save_raw(vol: &Volume, path: &Path) -> Result<()> {
    fs::write(path, vol.raw_bytes())?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&vol.sidecar())?)?;
    Ok(())
}

/// Writes one uncompressed grayscale page per z-slice.
pub fn save_tiff(vol: &Volume, path: &Path) -> Result<()> {
    let mut enc = TiffEncoder::new(BufWriter::new(File::create(path)?))?;
    let [nx, ny, nz] = vol.dims;
    let page = nx * ny;
    for z in 0..nz {
        let range = z * page..(z + 1) * page;
        match &vol.voxels {
            Voxels::U8(v) => enc.write_image::<colortype::Gray8>(nx as u32, ny as u32, &v[range])?,
            Voxels::U16(v) => enc.write_image::<colortype::Gray16>(nx as u32, ny as u32, &v[range])?,
        }
    }
    Ok(())
}
