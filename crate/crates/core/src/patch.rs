//! Two-channel cubic patches centered on reconstruction points.
//!
//! Channel 0 is the intensity divided by the dtype maximum, channel 1 the
//! binary map. Voxels outside the volume are zero. Data is laid out
//! channel-major, then z, y, x.

use crate::error::{Error, Result};
use crate::raster::{voxel_of, BinaryMap};
use crate::swc::NeuronPoint;
use crate::volume::{Volume, Voxels};

pub const PATCH_SIZE: usize = 32;
pub const CHANNELS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub size: usize,
    /// Local voxel coordinate of element (0, 0, 0).
    pub corner: [i64; 3],
    pub center_id: u64,
    pub label: u8,
    /// True when the crop box does not intersect the volume.
    pub degenerate: bool,
    pub data: Vec<f32>,
}

impl Patch {
    pub fn zeros(size: usize) -> Self {
        Patch {
            size,
            corner: [0; 3],
            center_id: 0,
            label: 0,
            degenerate: false,
            data: vec![0.0; CHANNELS * size * size * size],
        }
    }

    #[inline]
    pub fn index(&self, c: usize, x: usize, y: usize, z: usize) -> usize {
        ((c * self.size + z) * self.size + y) * self.size + x
    }

    #[inline]
    pub fn at(&self, c: usize, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.index(c, x, y, z)]
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.size * self.size * self.size;
        &self.data[c * n..(c + 1) * n]
    }
}

/// Crops a `size`³ patch around `center`.
///
/// The crop corner is the center voxel minus `size / 2` on each axis.
/// `map` must share the volume's grid.
pub fn crop_patch(vol: &Volume, map: &BinaryMap, center: &NeuronPoint, size: usize) -> Result<Patch> {
    if size == 0 || size % 2 != 0 {
        return Err(Error::InvalidArgument(format!("patch size must be even and positive, got {size}")));
    }
    if map.dims() != vol.dims() || map.origin() != vol.origin() {
        return Err(Error::InvalidArgument("binary map does not share the volume grid".into()));
    }
    let cv = voxel_of(center.position(), vol.origin());
    let half = (size / 2) as i64;
    let corner = [cv[0] - half, cv[1] - half, cv[2] - half];

    let mut patch = Patch::zeros(size);
    patch.corner = corner;
    patch.center_id = center.id;

    let dims = vol.dims();
    // overlap of [corner, corner + size) with [0, dims) per axis, in patch coordinates
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        let start = corner[a].max(0);
        let end = (corner[a] + size as i64).min(dims[a] as i64);
        if start >= end {
            patch.degenerate = true;
            log::warn!("patch around point {} lies entirely outside the volume", center.id);
            return Ok(patch);
        }
        lo[a] = (start - corner[a]) as usize;
        hi[a] = (end - corner[a]) as usize;
    }

    let scale = vol.dtype().max_value() as f32;
    let n = size * size * size;
    let (intensity, binary) = patch.data.split_at_mut(n);
    let map_data = map.data();
    let row_len = hi[0] - lo[0];
    for pz in lo[2]..hi[2] {
        let vz = (corner[2] + pz as i64) as usize;
        for py in lo[1]..hi[1] {
            let vy = (corner[1] + py as i64) as usize;
            let src = vol.linear_index((corner[0] + lo[0] as i64) as usize, vy, vz);
            let dst = (pz * size + py) * size + lo[0];
            let out = &mut intensity[dst..dst + row_len];
            match vol.voxels() {
                Voxels::U8(v) => {
                    for (o, &s) in out.iter_mut().zip(&v[src..src + row_len]) {
                        *o = s as f32 / scale;
                    }
                }
                Voxels::U16(v) => {
                    for (o, &s) in out.iter_mut().zip(&v[src..src + row_len]) {
                        *o = s as f32 / scale;
                    }
                }
            }
            for (o, &s) in binary[dst..dst + row_len].iter_mut().zip(&map_data[src..src + row_len]) {
                *o = s as f32;
            }
        }
    }
    Ok(patch)
}
