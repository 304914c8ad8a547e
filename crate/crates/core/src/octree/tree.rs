use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Camera, MeshDistance, TriangleMesh, Vec3};
use crate::{Error, Real, Result};

/// Band leaves satisfy `|sdf| < BAND_HALF_WIDTH × edge`.
pub const BAND_HALF_WIDTH: f64 = 2.0;

/// Deepest level the tree supports; coordinates are `u32` per axis.
pub const MAX_LEVEL: u8 = 20;

/// Finest-level lattices up to this many cells are cached densely.
const DENSE_LATTICE_LIMIT: usize = 1 << 24;

/// Axis-aligned cube `[min, min + size]³`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube<T> {
    pub min: Vec3<T>,
    pub size: T,
}

impl<T: Real> Cube<T> {
    pub fn new(min: Vec3<T>, size: T) -> Result<Self> {
        if !min.is_finite() || !(size > T::zero()) || !size.is_finite() {
            return Err(Error::InvalidInput(format!("invalid bounds: min {min:?}, size {size}")));
        }
        Ok(Self { min, size })
    }

    pub fn max(&self) -> Vec3<T> {
        self.min + Vec3::splat(self.size)
    }

    pub fn center(&self) -> Vec3<T> {
        self.min + Vec3::splat(self.size * T::of(0.5))
    }

    pub fn volume(&self) -> T {
        self.size * self.size * self.size
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        let max = self.max();
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= max[a])
    }

    /// Edge length of a cell at `level`.
    pub fn cell_edge(&self, level: u8) -> T {
        self.size / T::of((1u64 << level) as f64)
    }

    pub fn cell_center(&self, level: u8, coords: [u32; 3]) -> Vec3<T> {
        let h = self.cell_edge(level);
        let half = T::of(0.5);
        Vec3::new(
            self.min.x + (T::of(coords[0] as f64) + half) * h,
            self.min.y + (T::of(coords[1] as f64) + half) * h,
            self.min.z + (T::of(coords[2] as f64) + half) * h,
        )
    }

    /// Coordinates of the level-`level` cell containing `p`, clamped into the cube.
    pub fn cell_of(&self, level: u8, p: Vec3<T>) -> [u32; 3] {
        let n = 1u32 << level;
        let h = self.cell_edge(level);
        let mut c = [0u32; 3];
        for a in 0..3 {
            let g = ((p[a] - self.min[a]) / h).floor();
            c[a] = if g < T::zero() { 0 } else { g.to_u32().unwrap_or(n - 1).min(n - 1) };
        }
        c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Payload of a childless node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeafPayload<T> {
    pub sdf: T,
    pub band: bool,
    pub voxel_id: Option<u32>,
}

/// One cube of the tree. Children of a node are stored contiguously in the arena, in the order
/// `bx | by << 1 | bz << 2` of their offset bits.
#[derive(Clone, Debug, PartialEq)]
pub struct OctreeNode<T> {
    pub level: u8,
    pub coords: [u32; 3],
    /// Arena index of the first of eight children.
    pub first_child: Option<u32>,
    /// Signed distance for leaves; mean of the children for internal nodes.
    pub value: T,
    pub band: bool,
    pub voxel_id: Option<u32>,
}

impl<T: Real> OctreeNode<T> {
    fn leaf(level: u8, coords: [u32; 3], value: T) -> Self {
        Self { level, coords, first_child: None, value, band: false, voxel_id: None }
    }

    pub fn is_leaf(&self) -> bool {
        self.first_child.is_none()
    }

    pub fn payload(&self) -> Option<LeafPayload<T>> {
        self.is_leaf().then_some(LeafPayload { sdf: self.value, band: self.band, voxel_id: self.voxel_id })
    }
}

fn child_coords(coords: [u32; 3], b: usize) -> [u32; 3] {
    [2 * coords[0] + (b & 1) as u32, 2 * coords[1] + ((b >> 1) & 1) as u32, 2 * coords[2] + ((b >> 2) & 1) as u32]
}

/// Finest-level lattice cached as flat arrays: the covering leaf of every finest cell and its
/// value.
#[derive(Clone, Debug)]
pub(crate) struct DenseLattice<T> {
    pub n: usize,
    pub leaf: Vec<u32>,
    pub value: Vec<T>,
}

impl<T> DenseLattice<T> {
    #[inline]
    pub fn index(&self, c: [u32; 3]) -> usize {
        (c[2] as usize * self.n + c[1] as usize) * self.n + c[0] as usize
    }
}

/// Narrow-band octree signed distance field. The unknown vector `d` stacks the values of the
/// band leaves, indexed by voxel id; ids follow a depth-first traversal with children visited in
/// offset order.
#[derive(Clone, Debug)]
pub struct SdfVolume<T> {
    bounds: Cube<T>,
    nodes: Vec<OctreeNode<T>>,
    voxels: Vec<u32>,
    d: Vec<T>,
    level: u8,
    lattice: OnceLock<Option<DenseLattice<T>>>,
}

impl<T: Real> SdfVolume<T> {
    /// Uniform grid of `8^level` leaves with values `f(centre)`.
    pub fn from_fn(bounds: Cube<T>, level: u8, f: impl Fn(Vec3<T>) -> T + Sync) -> Result<Self> {
        Self::from_split_fn(bounds, |l, _| l < level, f)
    }

    /// Grows the tree from the root, splitting every node for which `split(level, coords)`
    /// holds, then fills leaves with `f(centre)` and flags the band.
    pub fn from_split_fn(
        bounds: Cube<T>,
        split: impl Fn(u8, [u32; 3]) -> bool,
        f: impl Fn(Vec3<T>) -> T + Sync,
    ) -> Result<Self> {
        let mut nodes = vec![OctreeNode::leaf(0, [0, 0, 0], T::zero())];
        let mut i = 0;
        while i < nodes.len() {
            let (level, coords) = (nodes[i].level, nodes[i].coords);
            if split(level, coords) {
                if level >= MAX_LEVEL {
                    return Err(Error::Volume(format!("octree depth limited to {MAX_LEVEL}")));
                }
                nodes[i].first_child = Some(nodes.len() as u32);
                for b in 0..8 {
                    nodes.push(OctreeNode::leaf(level + 1, child_coords(coords, b), T::zero()));
                }
            }
            i += 1;
        }
        let values: Vec<T> = nodes
            .par_iter()
            .map(|n| if n.is_leaf() { f(bounds.cell_center(n.level, n.coords)) } else { T::zero() })
            .collect();
        for (n, v) in nodes.iter_mut().zip(values) {
            if n.is_leaf() {
                n.value = v;
            }
        }
        let mut volume = Self::assemble(bounds, nodes);
        volume.flag_band_by_rule();
        volume.reindex();
        Ok(volume)
    }

    fn assemble(bounds: Cube<T>, nodes: Vec<OctreeNode<T>>) -> Self {
        let level = nodes.iter().filter(|n| n.is_leaf()).map(|n| n.level).max().unwrap_or(0);
        Self { bounds, nodes, voxels: Vec::new(), d: Vec::new(), level, lattice: OnceLock::new() }
    }

    /// Sets the band flag of every leaf from the narrow-band rule.
    fn flag_band_by_rule(&mut self) {
        let bounds = self.bounds;
        for n in &mut self.nodes {
            n.band = n.is_leaf() && n.value.abs() < T::of(BAND_HALF_WIDTH) * bounds.cell_edge(n.level);
        }
    }

    /// Assigns voxel ids in depth-first order, rebuilds `d` and the internal-node means, and
    /// drops cached lattices.
    fn reindex(&mut self) {
        self.voxels.clear();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            match self.nodes[i].first_child {
                Some(fc) => stack.extend((0..8).rev().map(|b| fc as usize + b)),
                None => {
                    if self.nodes[i].band {
                        self.nodes[i].voxel_id = Some(self.voxels.len() as u32);
                        self.voxels.push(i as u32);
                    } else {
                        self.nodes[i].voxel_id = None;
                    }
                }
            }
        }
        self.d = self.voxels.iter().map(|&i| self.nodes[i as usize].value).collect();
        self.level = self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.level).max().unwrap_or(0);
        self.refresh_means();
    }

    fn refresh_means(&mut self) {
        // Children always sit after their parent in the arena.
        let eighth = T::of(0.125);
        for i in (0..self.nodes.len()).rev() {
            if let Some(fc) = self.nodes[i].first_child {
                let fc = fc as usize;
                let sum: T = self.nodes[fc..fc + 8].iter().map(|c| c.value).sum();
                self.nodes[i].value = sum * eighth;
            }
        }
        self.lattice = OnceLock::new();
    }

    pub fn bounds(&self) -> Cube<T> {
        self.bounds
    }

    /// Level of the finest leaf.
    pub fn level(&self) -> u8 {
        self.level
    }

    /// Edge length of the finest leaves.
    pub fn finest_edge(&self) -> T {
        self.bounds.cell_edge(self.level)
    }

    pub fn nodes(&self) -> &[OctreeNode<T>] {
        &self.nodes
    }

    pub fn root(&self) -> &OctreeNode<T> {
        &self.nodes[0]
    }

    /// Number of band voxels, `|Ω|`.
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Leaf node indices in depth-first order.
    pub fn leaves_dfs(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            match self.nodes[i].first_child {
                Some(fc) => stack.extend((0..8).rev().map(|b| fc as usize + b)),
                None => out.push(i),
            }
        }
        out
    }

    /// The unknown vector over `Ω`.
    pub fn d(&self) -> &[T] {
        &self.d
    }

    /// Replaces the band values.
    pub fn set_d(&mut self, d: Vec<T>) -> Result<()> {
        if d.len() != self.voxels.len() {
            return Err(Error::Volume(format!("d has {} entries for {} band voxels", d.len(), self.voxels.len())));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Volume("non-finite signed distance".into()));
        }
        for (&i, &v) in self.voxels.iter().zip(&d) {
            self.nodes[i as usize].value = v;
        }
        self.d = d;
        self.refresh_means();
        Ok(())
    }

    pub fn voxel_node(&self, voxel: usize) -> &OctreeNode<T> {
        &self.nodes[self.voxels[voxel] as usize]
    }

    pub fn voxel_center(&self, voxel: usize) -> Vec3<T> {
        let n = self.voxel_node(voxel);
        self.bounds.cell_center(n.level, n.coords)
    }

    pub fn voxel_edge(&self, voxel: usize) -> T {
        self.bounds.cell_edge(self.voxel_node(voxel).level)
    }

    pub fn node_center(&self, node: usize) -> Vec3<T> {
        let n = &self.nodes[node];
        self.bounds.cell_center(n.level, n.coords)
    }

    pub fn voxel_centers(&self) -> Vec<Vec3<T>> {
        (0..self.len()).map(|v| self.voxel_center(v)).collect()
    }

    /// Deepest node of level at most `level` that contains the level-`level` cell `coords`.
    pub fn find(&self, level: u8, coords: [u32; 3]) -> usize {
        let mut idx = 0usize;
        loop {
            let n = &self.nodes[idx];
            if n.level >= level {
                return idx;
            }
            let Some(fc) = n.first_child else { return idx };
            let shift = level - n.level - 1;
            let b = ((coords[0] >> shift) & 1) | (((coords[1] >> shift) & 1) << 1) | (((coords[2] >> shift) & 1) << 2);
            idx = fc as usize + b as usize;
        }
    }

    /// Leaf containing `p` (clamped into the bounds).
    pub fn locate(&self, p: Vec3<T>) -> usize {
        let c = self.bounds.cell_of(self.level, p);
        self.find(self.level, c)
    }

    /// Band leaf across the face of `voxel` on `axis` in `direction`: a leaf at the same level or,
    /// when that region is represented coarser, the coarser leaf. `None` outside the bounds,
    /// outside the band, or when the neighbouring region is finer.
    pub fn neighbor_lookup(&self, voxel: usize, axis: Axis, direction: Direction) -> Option<usize> {
        let node = self.voxel_node(voxel);
        let n = 1i64 << node.level;
        let a = axis.index();
        let step = if direction == Direction::Forward { 1 } else { -1 };
        let moved = node.coords[a] as i64 + step;
        if moved < 0 || moved >= n {
            return None;
        }
        let mut c = node.coords;
        c[a] = moved as u32;
        let m = &self.nodes[self.find(node.level, c)];
        if m.is_leaf() {
            m.voxel_id.map(|v| v as usize)
        } else {
            None
        }
    }

    /// Value of the lattice of level-`level` cell centres: the covering leaf's value, or the mean
    /// of the node when the region is finer.
    pub fn lattice_value(&self, level: u8, coords: [u32; 3]) -> T {
        self.nodes[self.find(level, coords)].value
    }

    /// Trilinear interpolation (linear extrapolation past the outermost centres) of the
    /// level-`level` lattice at `p`.
    pub fn value_at_level(&self, p: Vec3<T>, level: u8) -> T {
        if level == 0 {
            return self.nodes[0].value;
        }
        if level == self.level {
            if let Some(lat) = self.dense_lattice() {
                return self.interpolate_with(p, level, |c| lat.value[lat.index(c)]);
            }
        }
        self.interpolate_with(p, level, |c| self.lattice_value(level, c))
    }

    /// Trilinear interpolation at the finest level.
    pub fn interpolate(&self, p: Vec3<T>) -> T {
        self.value_at_level(p, self.level)
    }

    fn interpolate_with(&self, p: Vec3<T>, level: u8, value: impl Fn([u32; 3]) -> T) -> T {
        let n = 1u32 << level;
        let h = self.bounds.cell_edge(level);
        let half = T::of(0.5);
        let mut base = [0u32; 3];
        let mut t = [T::zero(); 3];
        for a in 0..3 {
            let g = (p[a] - self.bounds.min[a]) / h - half;
            let lo = g.floor().max(T::zero()).min(T::of((n - 2) as f64));
            base[a] = lo.to_u32().unwrap_or(0);
            t[a] = g - lo;
        }
        let one = T::one();
        let mut acc = T::zero();
        for corner in 0..8usize {
            let mut w = one;
            let mut c = base;
            for a in 0..3 {
                if (corner >> a) & 1 == 1 {
                    c[a] += 1;
                    w = w * t[a];
                } else {
                    w = w * (one - t[a]);
                }
            }
            acc = acc + w * value(c);
        }
        acc
    }

    pub(crate) fn dense_lattice(&self) -> Option<&DenseLattice<T>> {
        self.lattice.get_or_init(|| self.build_dense_lattice()).as_ref()
    }

    fn build_dense_lattice(&self) -> Option<DenseLattice<T>> {
        let n = 1usize << self.level;
        if n.pow(3) > DENSE_LATTICE_LIMIT {
            return None;
        }
        let mut leaf = vec![0u32; n * n * n];
        let mut value = vec![T::zero(); n * n * n];
        for (i, node) in self.nodes.iter().enumerate() {
            if !node.is_leaf() {
                continue;
            }
            let span = 1u32 << (self.level - node.level);
            let lo = node.coords.map(|c| c * span);
            for z in lo[2]..lo[2] + span {
                for y in lo[1]..lo[1] + span {
                    let row = (z as usize * n + y as usize) * n;
                    for x in lo[0]..lo[0] + span {
                        leaf[row + x as usize] = i as u32;
                        value[row + x as usize] = node.value;
                    }
                }
            }
        }
        Some(DenseLattice { n, leaf, value })
    }

    /// Splits every band leaf with `|d| < 2 × edge`, children taking the trilinear interpolant
    /// of the parent level. Afterwards only children within the tighter band are band leaves;
    /// band leaves that did not qualify leave the band. Returns the number of split leaves.
    pub fn subdivide_band(&mut self) -> usize {
        let width = T::of(BAND_HALF_WIDTH);
        let parents: Vec<usize> = self
            .voxels
            .iter()
            .map(|&i| i as usize)
            .filter(|&i| {
                let n = &self.nodes[i];
                n.level < MAX_LEVEL && n.value.abs() < width * self.bounds.cell_edge(n.level)
            })
            .collect();
        let children: Vec<[T; 8]> = parents
            .par_iter()
            .map(|&i| {
                let n = &self.nodes[i];
                std::array::from_fn(|b| {
                    let c = self.bounds.cell_center(n.level + 1, child_coords(n.coords, b));
                    self.value_at_level(c, n.level)
                })
            })
            .collect();
        for &i in &self.voxels {
            self.nodes[i as usize].band = false;
        }
        for (&i, values) in parents.iter().zip(&children) {
            let (level, coords) = (self.nodes[i].level + 1, self.nodes[i].coords);
            let edge = self.bounds.cell_edge(level);
            self.nodes[i].first_child = Some(self.nodes.len() as u32);
            for (b, &v) in values.iter().enumerate() {
                let mut child = OctreeNode::leaf(level, child_coords(coords, b), v);
                child.band = v.abs() < width * edge;
                self.nodes.push(child);
            }
        }
        self.reindex();
        parents.len()
    }

    /// Rebuilds a volume from leaf records in any order. Fails unless the leaves tile the bounds.
    pub fn from_leaves(bounds: Cube<T>, leaves: &[(u8, [u32; 3], T, bool)]) -> Result<Self> {
        let mut nodes = vec![OctreeNode::leaf(0, [0, 0, 0], T::zero())];
        let mut assigned = vec![false];
        for &(level, coords, value, band) in leaves {
            if level > MAX_LEVEL || coords.iter().any(|&c| c >= 1u32 << level) {
                return Err(Error::Volume(format!("leaf at level {level} has coordinates {coords:?} out of range")));
            }
            let mut idx = 0usize;
            while nodes[idx].level < level {
                if assigned[idx] {
                    return Err(Error::Volume("overlapping leaves".into()));
                }
                let fc = match nodes[idx].first_child {
                    Some(fc) => fc as usize,
                    None => {
                        let fc = nodes.len();
                        let (l, c) = (nodes[idx].level, nodes[idx].coords);
                        nodes[idx].first_child = Some(fc as u32);
                        for b in 0..8 {
                            nodes.push(OctreeNode::leaf(l + 1, child_coords(c, b), T::zero()));
                            assigned.push(false);
                        }
                        fc
                    }
                };
                let shift = level - nodes[idx].level - 1;
                let b =
                    ((coords[0] >> shift) & 1) | (((coords[1] >> shift) & 1) << 1) | (((coords[2] >> shift) & 1) << 2);
                idx = fc + b as usize;
            }
            if assigned[idx] || !nodes[idx].is_leaf() {
                return Err(Error::Volume("overlapping leaves".into()));
            }
            assigned[idx] = true;
            nodes[idx].value = value;
            nodes[idx].band = band;
        }
        if nodes.iter().zip(&assigned).any(|(n, &a)| n.is_leaf() && !a) {
            return Err(Error::Volume("leaves do not cover the bounds".into()));
        }
        let mut volume = Self::assemble(bounds, nodes);
        volume.reindex();
        Ok(volume)
    }
}

/// Uniform grid at `base_level` holding the signed distance transform of `mesh`.
pub fn build_initial_volume<T: Real>(mesh: &TriangleMesh<T>, bounds: Cube<T>, base_level: u8) -> Result<SdfVolume<T>> {
    let (lo, hi) = mesh.bounding_box().ok_or_else(|| Error::Mesh("initial mesh has no vertices".into()))?;
    if !bounds.contains(lo) || !bounds.contains(hi) {
        return Err(Error::InvalidInput(format!(
            "initial mesh extends outside the volume bounds (mesh box {lo:?}..{hi:?})"
        )));
    }
    let margin = (lo - bounds.min).min(bounds.max() - hi);
    let need = T::of(2.0) * bounds.cell_edge(base_level);
    if margin.x.min(margin.y).min(margin.z) < need {
        log::warn!("initial mesh is closer than two base-level voxels to the volume bounds");
    }
    let field = MeshDistance::new(mesh)?;
    let volume = SdfVolume::from_fn(bounds, base_level, |p| field.signed_distance(p))?;
    if volume.is_empty() {
        return Err(Error::Volume(format!(
            "no voxel centre lies within the narrow band at base level {base_level}; use a finer base level"
        )));
    }
    Ok(volume)
}

/// Projected edge length in pixels of a cube of edge `edge` centred at `center`, `None` when the
/// camera does not see the centre.
pub fn pixel_footprint<T: Real>(camera: &Camera<T>, center: Vec3<T>, edge: T) -> Option<T> {
    let p = camera.project(center);
    p.in_frustum.then(|| edge * camera.focal_length / p.depth)
}

/// Whether every band leaf projects below one pixel in every camera that sees it.
pub fn refinement_complete<'a, T: Real>(
    volume: &SdfVolume<T>,
    cameras: impl IntoIterator<Item = &'a Camera<T>>,
) -> bool {
    let cameras: Vec<&Camera<T>> = cameras.into_iter().collect();
    (0..volume.len()).into_par_iter().all(|v| {
        let (c, e) = (volume.voxel_center(v), volume.voxel_edge(v));
        cameras.iter().all(|cam| pixel_footprint(cam, c, e).is_none_or(|f| f < T::one()))
    })
}
