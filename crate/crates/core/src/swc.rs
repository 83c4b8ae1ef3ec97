//! SWC reconstructions: parsing, validation, serialization and tree access.
//!
//! A data line holds `id type x y z radius parent`; a parent of `-1` marks a
//! root. Lines starting with `#` are comments. Fields are separated by runs of
//! spaces or tabs and anything after the seventh field is ignored.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neuronal compartment type of a point.
///
/// Codes other than 1, 2 and 3 are kept verbatim so that no point is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointKind {
    Soma,
    Axon,
    Dendrite,
    Other(i32),
}

impl PointKind {
    pub fn from_code(code: i32) -> Self {
        match code {
            1 => PointKind::Soma,
            2 => PointKind::Axon,
            3 => PointKind::Dendrite,
            c => PointKind::Other(c),
        }
    }

    pub fn code(self) -> i32 {
        match self {
            PointKind::Soma => 1,
            PointKind::Axon => 2,
            PointKind::Dendrite => 3,
            PointKind::Other(c) => c,
        }
    }

    /// Basal (3) and apical (4) dendrites.
    pub fn is_dendrite(self) -> bool {
        matches!(self, PointKind::Dendrite | PointKind::Other(4))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronPoint {
    pub id: u64,
    pub kind: PointKind,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub radius: f64,
    pub parent: Option<u64>,
}

impl NeuronPoint {
    pub fn new(id: u64, kind: PointKind, pos: [f64; 3], radius: f64, parent: Option<u64>) -> Self {
        NeuronPoint {
            id,
            kind,
            x: pos[0],
            y: pos[1],
            z: pos[2],
            radius,
            parent,
        }
    }

    #[inline]
    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_root(&self) -> bool {
        self.parent.is_none()
    }
}

/// A validated reconstruction. Immutable once built.
#[derive(Debug, Clone)]
pub struct NeuronReconstruction {
    neuron_id: u64,
    label: String,
    points: Vec<NeuronPoint>,
    index: HashMap<u64, usize>,
    // children[i] holds indices of the children of points[i], sorted by child id
    children: Vec<Vec<usize>>,
}

impl NeuronReconstruction {
    /// Validates `points` and builds the child index.
    ///
    /// Rejects duplicate ids, non-positive or non-finite radii, self parents,
    /// dangling parents, cycles and point sets without a root.
    pub fn new(neuron_id: u64, label: impl Into<String>, points: Vec<NeuronPoint>) -> Result<Self> {
        let mut index = HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if p.id == 0 {
                return Err(Error::validation("point id 0 is not a positive identifier"));
            }
            if index.insert(p.id, i).is_some() {
                return Err(Error::validation(format!("duplicate point id {}", p.id)));
            }
            if !(p.radius > 0.0) || !p.radius.is_finite() {
                return Err(Error::validation(format!(
                    "point {} has non-positive radius {}",
                    p.id, p.radius
                )));
            }
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::validation(format!("point {} has a non-finite coordinate", p.id)));
            }
        }

        let mut children = vec![Vec::new(); points.len()];
        for (i, p) in points.iter().enumerate() {
            if let Some(parent) = p.parent {
                if parent == p.id {
                    return Err(Error::validation(format!("point {} is its own parent", p.id)));
                }
                match index.get(&parent) {
                    Some(&pi) => children[pi].push(i),
                    None => {
                        return Err(Error::validation(format!(
                            "point {} references missing parent {}",
                            p.id, parent
                        )))
                    }
                }
            }
        }
        for list in &mut children {
            list.sort_by_key(|&c| points[c].id);
        }

        if !points.iter().any(NeuronPoint::is_root) {
            return Err(Error::validation("no root point"));
        }

        let r = NeuronReconstruction {
            neuron_id,
            label: label.into(),
            points,
            index,
            children,
        };
        r.check_acyclic()?;
        Ok(r)
    }

    fn check_acyclic(&self) -> Result<()> {
        // 0 = unvisited, 1 = on the current parent chain, 2 = known to reach a root
        let mut state = vec![0u8; self.points.len()];
        let mut chain = Vec::new();
        for start in 0..self.points.len() {
            let mut cur = start;
            chain.clear();
            loop {
                match state[cur] {
                    2 => break,
                    1 => {
                        return Err(Error::validation(format!(
                            "cycle through point {}",
                            self.points[cur].id
                        )))
                    }
                    _ => {}
                }
                state[cur] = 1;
                chain.push(cur);
                match self.points[cur].parent {
                    Some(pid) => cur = self.index[&pid],
                    None => break,
                }
            }
            for &c in &chain {
                state[c] = 2;
            }
        }
        Ok(())
    }

    pub fn neuron_id(&self) -> u64 {
        self.neuron_id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Points in file order.
    pub fn points(&self) -> &[NeuronPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&NeuronPoint> {
        self.index.get(&id).map(|&i| &self.points[i])
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.index.contains_key(&id)
    }

    pub fn parent(&self, id: u64) -> Result<Option<&NeuronPoint>> {
        let p = self.get(id).ok_or(Error::UnknownPoint(id))?;
        Ok(p.parent.map(|pid| &self.points[self.index[&pid]]))
    }

    /// Children of `id`, sorted by id.
    pub fn children(&self, id: u64) -> Result<Vec<&NeuronPoint>> {
        let i = self.index_of(id).ok_or(Error::UnknownPoint(id))?;
        Ok(self.children[i].iter().map(|&c| &self.points[c]).collect())
    }

    /// Child point indices (into [`points`](Self::points)) of the point at index `i`.
    pub fn child_indices(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn roots(&self) -> impl Iterator<Item = &NeuronPoint> {
        self.points.iter().filter(|p| p.is_root())
    }

    /// Depth-first pre-order over every tree, roots in file order and
    /// children in id order.
    pub fn preorder(&self) -> Vec<&NeuronPoint> {
        let mut out = Vec::with_capacity(self.points.len());
        let mut stack = Vec::new();
        for (ri, root) in self.points.iter().enumerate() {
            if !root.is_root() {
                continue;
            }
            stack.push(ri);
            while let Some(i) = stack.pop() {
                out.push(&self.points[i]);
                stack.extend(self.children[i].iter().rev());
            }
        }
        out
    }

    /// All point ids in the subtree rooted at `id`, including `id`.
    pub fn subtree_ids(&self, id: u64) -> Result<Vec<u64>> {
        let start = self.index_of(id).ok_or(Error::UnknownPoint(id))?;
        let mut out = Vec::new();
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            out.push(self.points[i].id);
            stack.extend(self.children[i].iter().rev());
        }
        Ok(out)
    }

    pub fn max_id(&self) -> u64 {
        self.points.iter().map(|p| p.id).max().unwrap_or(0)
    }

    pub fn into_points(self) -> Vec<NeuronPoint> {
        self.points
    }
}

impl PartialEq for NeuronReconstruction {
    fn eq(&self, other: &Self) -> bool {
        self.neuron_id == other.neuron_id && self.label == other.label && self.points == other.points
    }
}

fn parse_field<T: std::str::FromStr>(field: &str, name: &str, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        line,
        message: format!("{name} field {field:?} is not a number"),
    })
}

/// Parses SWC text into a validated reconstruction.
pub fn parse_swc(text: &str, neuron_id: u64, label: impl Into<String>) -> Result<NeuronReconstruction> {
    let mut points = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.len() < 7 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 7 fields, found {}", fields.len()),
            });
        }
        let id: i64 = parse_field(fields[0], "id", line_no)?;
        if id <= 0 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("id {id} is not positive"),
            });
        }
        let code: i32 = parse_field(fields[1], "type", line_no)?;
        let x: f64 = parse_field(fields[2], "x", line_no)?;
        let y: f64 = parse_field(fields[3], "y", line_no)?;
        let z: f64 = parse_field(fields[4], "z", line_no)?;
        let radius: f64 = parse_field(fields[5], "radius", line_no)?;
        let parent: i64 = parse_field(fields[6], "parent", line_no)?;
        let parent = match parent {
            -1 => None,
            p if p > 0 => Some(p as u64),
            p => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("parent {p} is neither -1 nor a positive id"),
                })
            }
        };
        points.push(NeuronPoint::new(
            id as u64,
            PointKind::from_code(code),
            [x, y, z],
            radius,
            parent,
        ));
    }
    NeuronReconstruction::new(neuron_id, label, points)
}

/// Writes `r` as SWC text. Reals use the shortest representation that
/// parses back to the same value.
pub fn serialize_swc(r: &NeuronReconstruction) -> String {
    let mut out = String::with_capacity(r.len() * 48 + 64);
    let label = r.label.replace(['\n', '\r'], " ");
    let _ = writeln!(out, "# neuron_id {}", r.neuron_id);
    let _ = writeln!(out, "# label {label}");
    let _ = writeln!(out, "# id type x y z radius parent");
    for p in &r.points {
        let _ = writeln!(out, "{}", SwcLine(p));
    }
    out
}

struct SwcLine<'a>(&'a NeuronPoint);

impl fmt::Display for SwcLine<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.0;
        let parent = p.parent.map(|v| v as i64).unwrap_or(-1);
        write!(
            f,
            "{} {} {} {} {} {} {}",
            p.id,
            p.kind.code(),
            p.x,
            p.y,
            p.z,
            p.radius,
            parent
        )
    }
}
