//! Marching cubes over lattices of cell centres.

use std::collections::HashMap;

use super::tables::TRIANGLE_TABLE;
use super::SdfVolume;
use crate::geometry::{TriangleMesh, Vec3};
use crate::Real;

/// Corner offsets of a marching cube.
const CORNERS: [[u32; 3]; 8] = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]];

/// Corner pair of each cube edge.
const EDGES: [(usize, usize); 12] =
    [(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4), (0, 4), (1, 5), (2, 6), (3, 7)];

/// Accumulates marching-cubes triangles over cells of an integer lattice, welding vertices on
/// shared lattice edges.
pub(crate) struct IsoBuilder<T> {
    vertices: Vec<Vec3<T>>,
    triangles: Vec<[u32; 3]>,
    edge_vertex: HashMap<([u32; 3], u8), u32>,
}

impl<T: Real> IsoBuilder<T> {
    pub fn new() -> Self {
        Self { vertices: Vec::new(), triangles: Vec::new(), edge_vertex: HashMap::new() }
    }

    /// Adds the cell whose lowest corner is lattice point `base`. A corner is inside when its
    /// value is negative.
    pub fn add_cell(&mut self, base: [u32; 3], values: &[T; 8], positions: &[Vec3<T>; 8]) {
        let mut case = 0usize;
        for (i, v) in values.iter().enumerate() {
            if *v < T::zero() {
                case |= 1 << i;
            }
        }
        if case == 0 || case == 255 {
            return;
        }
        let row = &TRIANGLE_TABLE[case];
        for tri in row.chunks(3).take_while(|t| t[0] >= 0) {
            let ids = [
                self.edge(base, tri[0], values, positions),
                self.edge(base, tri[2], values, positions),
                self.edge(base, tri[1], values, positions),
            ];
            self.triangles.push(ids);
        }
    }

    fn edge(&mut self, base: [u32; 3], edge: i8, values: &[T; 8], positions: &[Vec3<T>; 8]) -> u32 {
        let (mut a, mut b) = EDGES[edge as usize];
        // Orient every edge from its lower lattice point so both adjacent cells agree.
        if CORNERS[a].iter().sum::<u32>() > CORNERS[b].iter().sum::<u32>() {
            std::mem::swap(&mut a, &mut b);
        }
        let axis = (0..3).find(|&k| CORNERS[a][k] != CORNERS[b][k]).unwrap_or(0) as u8;
        let low = [base[0] + CORNERS[a][0], base[1] + CORNERS[a][1], base[2] + CORNERS[a][2]];
        let vertices = &mut self.vertices;
        *self.edge_vertex.entry((low, axis)).or_insert_with(|| {
            let (va, vb) = (values[a], values[b]);
            let t = va / (va - vb);
            vertices.push(positions[a].lerp(positions[b], t));
            (vertices.len() - 1) as u32
        })
    }

    pub fn finish(self) -> TriangleMesh<T> {
        TriangleMesh::new(self.vertices, self.triangles).unwrap_or_default()
    }
}

/// Zero level set of a dense grid of samples. `values[(z * ny + y) * nx + x]` is the sample at
/// `origin + (x, y, z) * spacing`.
pub fn marching_cubes_grid<T: Real>(dims: [usize; 3], origin: Vec3<T>, spacing: T, values: &[T]) -> TriangleMesh<T> {
    assert_eq!(values.len(), dims[0] * dims[1] * dims[2], "grid size mismatch");
    let mut builder = IsoBuilder::new();
    let at = |c: [u32; 3]| values[(c[2] as usize * dims[1] + c[1] as usize) * dims[0] + c[0] as usize];
    let pos = |c: [u32; 3]| origin + Vec3::new(T::of(c[0] as f64), T::of(c[1] as f64), T::of(c[2] as f64)) * spacing;
    for z in 0..dims[2].saturating_sub(1) as u32 {
        for y in 0..dims[1].saturating_sub(1) as u32 {
            for x in 0..dims[0].saturating_sub(1) as u32 {
                let corners: [[u32; 3]; 8] = CORNERS.map(|o| [x + o[0], y + o[1], z + o[2]]);
                builder.add_cell([x, y, z], &corners.map(at), &corners.map(pos));
            }
        }
    }
    builder.finish()
}

impl<T: Real> SdfVolume<T> {
    /// Value of the finest-level lattice point `c` when it lies in a band leaf: the leaf value
    /// at the finest level, the interpolant of the leaf's own level otherwise.
    fn band_corner_value(&self, c: [u32; 3]) -> Option<T> {
        let level = self.level();
        let node = &self.nodes()[self.find(level, c)];
        if !node.is_leaf() || !node.band {
            return None;
        }
        if node.level == level {
            Some(node.value)
        } else {
            Some(self.value_at_level(self.bounds().cell_center(level, c), node.level))
        }
    }
}

/// Triangle mesh of the zero level set of the band. Cells are those of the finest-level centre
/// lattice whose eight corners lie in band leaves. Corners inside coarser leaves take the coarse
/// interpolant, so faces across level transitions share their edge vertices and no cracks open.
pub fn extract_mesh<T: Real>(volume: &SdfVolume<T>) -> TriangleMesh<T> {
    let level = volume.level();
    let n = 1u32 << level;
    let bounds = volume.bounds();
    let mut builder = IsoBuilder::new();
    let mut cache: HashMap<[u32; 3], Option<T>> = HashMap::new();
    let mut corner = |c: [u32; 3]| *cache.entry(c).or_insert_with(|| volume.band_corner_value(c));
    for voxel in 0..volume.len() {
        let node = volume.voxel_node(voxel);
        let span = 1u32 << (level - node.level);
        let lo = node.coords.map(|c| c * span);
        for z in lo[2]..lo[2] + span {
            for y in lo[1]..lo[1] + span {
                for x in lo[0]..lo[0] + span {
                    if x + 1 >= n || y + 1 >= n || z + 1 >= n {
                        continue;
                    }
                    let corners: [[u32; 3]; 8] = CORNERS.map(|o| [x + o[0], y + o[1], z + o[2]]);
                    let mut values = [T::zero(); 8];
                    let mut complete = true;
                    for (k, &c) in corners.iter().enumerate() {
                        match corner(c) {
                            Some(v) => values[k] = v,
                            None => {
                                complete = false;
                                break;
                            }
                        }
                    }
                    if complete {
                        builder.add_cell([x, y, z], &values, &corners.map(|c| bounds.cell_center(level, c)));
                    }
                }
            }
        }
    }
    let mesh = builder.finish();
    if mesh.is_empty() {
        log::warn!("the band contains no zero crossing; extracted mesh is empty");
    }
    mesh
}
