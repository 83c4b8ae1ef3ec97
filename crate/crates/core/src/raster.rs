//! Binary map of a reconstruction on a volume grid.
//!
//! Every point sets the voxel nearest to it, and every parent-child segment
//! sets the voxels of a 26-connected digital line between the two endpoint
//! voxels. Radii are ignored.

use crate::swc::NeuronReconstruction;
use crate::volume::Volume;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMap {
    dims: [usize; 3],
    origin: [i64; 3],
    data: Vec<u8>,
}

impl BinaryMap {
    pub fn empty(dims: [usize; 3], origin: [i64; 3]) -> Self {
        BinaryMap {
            dims,
            origin,
            data: vec![0; dims.iter().product()],
        }
    }

    pub fn like(vol: &Volume) -> Self {
        BinaryMap::empty(vol.dims(), vol.origin())
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> [i64; 3] {
        self.origin
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    fn local_index(&self, v: [i64; 3]) -> Option<usize> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            if v[a] < 0 || v[a] as usize >= self.dims[a] {
                return None;
            }
            idx[a] = v[a] as usize;
        }
        Some((idx[2] * self.dims[1] + idx[1]) * self.dims[0] + idx[0])
    }

    /// Value at a local voxel coordinate; 0 outside the grid.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64, z: i64) -> u8 {
        self.local_index([x, y, z]).map_or(0, |i| self.data[i])
    }

    /// Sets a local voxel; returns false when it lies outside the grid.
    pub fn set(&mut self, v: [i64; 3]) -> bool {
        match self.local_index(v) {
            Some(i) => {
                self.data[i] = 1;
                true
            }
            None => false,
        }
    }

    /// Voxel-wise OR with a map of the same geometry.
    pub fn union_with(&mut self, other: &BinaryMap) {
        assert_eq!(self.dims, other.dims);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a |= *b;
        }
    }
}

/// Rounds half away from zero, as [`f64::round`].
#[inline]
pub fn round_coord(v: f64) -> i64 {
    v.round() as i64
}

/// Local voxel of a global position on a grid placed at `origin`.
pub fn voxel_of(pos: [f64; 3], origin: [i64; 3]) -> [i64; 3] {
    [
        round_coord(pos[0] - origin[0] as f64),
        round_coord(pos[1] - origin[1] as f64),
        round_coord(pos[2] - origin[2] as f64),
    ]
}

// num / den rounded half away from zero, den > 0
#[inline]
fn div_round(num: i64, den: i64) -> i64 {
    let q = (2 * num.abs() + den) / (2 * den);
    if num < 0 {
        -q
    } else {
        q
    }
}

/// Voxels of the 26-connected line from `a` to `b`, both included.
///
/// Step `k` of `n = max(|b - a|)` is `a + round(k (b - a) / n)` per axis.
pub fn digital_line(a: [i64; 3], b: [i64; 3]) -> impl Iterator<Item = [i64; 3]> {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let n = d.iter().map(|v| v.abs()).max().unwrap_or(0);
    (0..=n).map(move |k| {
        if n == 0 {
            return a;
        }
        [
            a[0] + div_round(k * d[0], n),
            a[1] + div_round(k * d[1], n),
            a[2] + div_round(k * d[2], n),
        ]
    })
}

#[derive(Debug, Clone)]
pub struct Rasterized {
    pub map: BinaryMap,
    /// Points whose voxel fell outside the grid.
    pub out_of_bounds: usize,
}

/// Rasterizes `r` onto the grid of `vol`.
pub fn rasterize(r: &NeuronReconstruction, vol: &Volume) -> Rasterized {
    rasterize_on(r, BinaryMap::like(vol))
}

/// Rasterizes `r` on top of an existing map.
pub fn rasterize_on(r: &NeuronReconstruction, mut map: BinaryMap) -> Rasterized {
    let origin = map.origin;
    let mut out_of_bounds = 0;
    for p in r.points() {
        let v = voxel_of(p.position(), origin);
        if !map.set(v) {
            out_of_bounds += 1;
        }
        if let Some(parent) = p.parent.and_then(|id| r.get(id)) {
            let pv = voxel_of(parent.position(), origin);
            for cell in digital_line(pv, v) {
                map.set(cell);
            }
        }
    }
    if out_of_bounds > 0 {
        log::warn!(
            "{}: {out_of_bounds} of {} points outside the volume",
            r.label(),
            r.len()
        );
    }
    Rasterized { map, out_of_bounds }
}
