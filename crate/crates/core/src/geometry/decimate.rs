//! Quadric-error edge-collapse decimation and vertex noise, used to manufacture initial
//! estimates of controlled quality.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Mat3, TriangleMesh, Vec3};
use crate::{Error, Real, Result};

/// Symmetric 4×4 error quadric stored as its upper triangle.
#[derive(Clone, Copy, Debug, Default)]
struct Quadric([f64; 10]);

impl Quadric {
    fn from_plane(n: Vec3<f64>, d: f64, weight: f64) -> Self {
        let (a, b, c) = (n.x, n.y, n.z);
        Self([a * a, a * b, a * c, a * d, b * b, b * c, b * d, c * c, c * d, d * d].map(|v| v * weight))
    }

    fn add(&mut self, o: &Self) {
        for i in 0..10 {
            self.0[i] += o.0[i];
        }
    }

    fn sum(a: &Self, b: &Self) -> Self {
        let mut q = *a;
        q.add(b);
        q
    }

    fn eval(&self, p: Vec3<f64>) -> f64 {
        let q = &self.0;
        let (x, y, z) = (p.x, p.y, p.z);
        q[0] * x * x
            + 2.0 * q[1] * x * y
            + 2.0 * q[2] * x * z
            + 2.0 * q[3] * x
            + q[4] * y * y
            + 2.0 * q[5] * y * z
            + 2.0 * q[6] * y
            + q[7] * z * z
            + 2.0 * q[8] * z
            + q[9]
    }

    fn minimizer(&self) -> Option<Vec3<f64>> {
        let q = &self.0;
        let a = Mat3::from_rows([[q[0], q[1], q[2]], [q[1], q[4], q[5]], [q[2], q[5], q[7]]]);
        let x = a.solve(Vec3::new(-q[3], -q[6], -q[8]))?;
        x.is_finite().then_some(x)
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    cost: f64,
    u: u32,
    v: u32,
    stamp_u: u32,
    stamp_v: u32,
    target: Vec3<f64>,
}

impl PartialEq for Candidate {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Candidate {
    // Reversed so BinaryHeap pops the cheapest collapse; ties broken by vertex ids for
    // reproducibility.
    fn cmp(&self, o: &Self) -> Ordering {
        o.cost.total_cmp(&self.cost).then(o.u.cmp(&self.u)).then(o.v.cmp(&self.v))
    }
}

struct Decimator {
    pos: Vec<Vec3<f64>>,
    faces: Vec<[u32; 3]>,
    face_alive: Vec<bool>,
    vertex_faces: Vec<Vec<u32>>,
    quadrics: Vec<Quadric>,
    stamp: Vec<u32>,
    vertex_alive: Vec<bool>,
    live_faces: usize,
}

impl Decimator {
    fn new<T: Real>(mesh: &TriangleMesh<T>) -> Self {
        let pos: Vec<Vec3<f64>> = mesh.vertices.iter().map(|v| v.cast()).collect();
        let faces = mesh.triangles.clone();
        let mut vertex_faces = vec![Vec::new(); pos.len()];
        let mut quadrics = vec![Quadric::default(); pos.len()];
        for (f, tri) in faces.iter().enumerate() {
            let [a, b, c] = tri.map(|i| pos[i as usize]);
            let cross = (b - a).cross(c - a);
            let area = cross.norm() * 0.5;
            if let Some(n) = cross.try_normalized() {
                let q = Quadric::from_plane(n, -n.dot(a), area);
                for &i in tri {
                    quadrics[i as usize].add(&q);
                }
            }
            for &i in tri {
                vertex_faces[i as usize].push(f as u32);
            }
        }
        let n = pos.len();
        Self {
            pos,
            live_faces: faces.len(),
            face_alive: vec![true; faces.len()],
            faces,
            vertex_faces,
            quadrics,
            stamp: vec![0; n],
            vertex_alive: vec![true; n],
        }
    }

    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut out: Vec<u32> =
            self.vertex_faces[v as usize].iter().flat_map(|&f| self.faces[f as usize]).filter(|&w| w != v).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn candidate(&self, u: u32, v: u32) -> Candidate {
        let (a, b) = (u.min(v), u.max(v));
        let q = Quadric::sum(&self.quadrics[a as usize], &self.quadrics[b as usize]);
        let (pa, pb) = (self.pos[a as usize], self.pos[b as usize]);
        let mut best = (q.eval(pa), pa);
        let mut consider = |p: Vec3<f64>| {
            let c = q.eval(p);
            if c < best.0 {
                best = (c, p);
            }
        };
        consider(pb);
        consider((pa + pb) * 0.5);
        if let Some(p) = q.minimizer() {
            // Reject far-away minimisers of nearly flat quadrics.
            if p.distance((pa + pb) * 0.5) <= 2.0 * pa.distance(pb) {
                consider(p);
            }
        }
        Candidate {
            cost: best.0.max(0.0),
            u: a,
            v: b,
            stamp_u: self.stamp[a as usize],
            stamp_v: self.stamp[b as usize],
            target: best.1,
        }
    }

    fn is_valid(&self, c: &Candidate) -> bool {
        let (u, v) = (c.u, c.v);
        let nu = self.neighbors(u);
        let nv = self.neighbors(v);
        if nu.binary_search(&v).is_err() {
            return false;
        }
        let shared_faces =
            self.vertex_faces[u as usize].iter().filter(|&&f| self.faces[f as usize].contains(&v)).count();
        let common = nu.iter().filter(|w| nv.binary_search(w).is_ok()).count();
        if common != shared_faces {
            return false;
        }
        // Moving both endpoints to the target must not fold any surviving face.
        for &w in &[u, v] {
            for &f in &self.vertex_faces[w as usize] {
                let tri = self.faces[f as usize];
                if tri.contains(&u) && tri.contains(&v) {
                    continue;
                }
                let before = tri.map(|i| self.pos[i as usize]);
                let after = tri.map(|i| if i == u || i == v { c.target } else { self.pos[i as usize] });
                let n0 = (before[1] - before[0]).cross(before[2] - before[0]);
                let n1 = (after[1] - after[0]).cross(after[2] - after[0]);
                if n0.dot(n1) <= 1e-3 * n0.norm() * n1.norm() || n1.norm() <= 1e-14 * n0.norm() {
                    return false;
                }
            }
        }
        true
    }

    fn collapse(&mut self, c: &Candidate) {
        let (u, v) = (c.u, c.v);
        let v_faces = std::mem::take(&mut self.vertex_faces[v as usize]);
        for f in v_faces {
            let tri = &mut self.faces[f as usize];
            if tri.contains(&u) {
                if self.face_alive[f as usize] {
                    self.face_alive[f as usize] = false;
                    self.live_faces -= 1;
                }
                for &w in tri.iter() {
                    if w != v {
                        self.vertex_faces[w as usize].retain(|&g| g != f);
                    }
                }
            } else {
                for w in tri.iter_mut() {
                    if *w == v {
                        *w = u;
                    }
                }
                self.vertex_faces[u as usize].push(f);
            }
        }
        let qv = self.quadrics[v as usize];
        self.quadrics[u as usize].add(&qv);
        self.pos[u as usize] = c.target;
        self.vertex_alive[v as usize] = false;
        self.stamp[u as usize] += 1;
        self.stamp[v as usize] += 1;
    }

    fn run(&mut self, target: usize) {
        let mut heap = BinaryHeap::new();
        for tri in &self.faces {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if a < b {
                    heap.push(self.candidate(a, b));
                }
            }
        }
        while self.live_faces > target {
            let Some(c) = heap.pop() else { break };
            if !self.vertex_alive[c.u as usize]
                || !self.vertex_alive[c.v as usize]
                || c.stamp_u != self.stamp[c.u as usize]
                || c.stamp_v != self.stamp[c.v as usize]
            {
                continue;
            }
            if !self.is_valid(&c) {
                continue;
            }
            self.collapse(&c);
            for w in self.neighbors(c.u) {
                heap.push(self.candidate(c.u, w));
            }
        }
    }

    fn into_mesh<T: Real>(self) -> TriangleMesh<T> {
        let triangles: Vec<[u32; 3]> =
            self.faces.iter().zip(&self.face_alive).filter(|(_, &alive)| alive).map(|(t, _)| *t).collect();
        let mut mesh = TriangleMesh { vertices: self.pos.iter().map(|p| p.cast()).collect(), triangles, albedo: None };
        mesh.compact();
        mesh
    }
}

/// Quadric edge-collapse decimation to roughly `target_triangles`.
pub fn decimate<T: Real>(mesh: &TriangleMesh<T>, target_triangles: usize) -> Result<TriangleMesh<T>> {
    if target_triangles < 4 {
        return Err(Error::InvalidInput("cannot decimate below tetrahedron complexity (4 triangles)".into()));
    }
    if target_triangles >= mesh.triangles.len() {
        return Ok(mesh.clone());
    }
    let mut d = Decimator::new(mesh);
    d.run(target_triangles);
    Ok(d.into_mesh())
}

/// Decimates and then perturbs every vertex with isotropic Gaussian noise whose standard
/// deviation is `noise_fraction` times the mean edge length of the decimated mesh.
pub fn degrade_mesh<T: Real>(
    mesh: &TriangleMesh<T>,
    target_triangles: usize,
    noise_fraction: f64,
    seed: u64,
) -> Result<TriangleMesh<T>> {
    if !(noise_fraction >= 0.0) {
        return Err(Error::InvalidInput("noise_fraction must be non-negative".into()));
    }
    let decimated = decimate(mesh, target_triangles)?;
    add_vertex_noise(&decimated, noise_fraction, seed)
}

pub fn add_vertex_noise<T: Real>(mesh: &TriangleMesh<T>, noise_fraction: f64, seed: u64) -> Result<TriangleMesh<T>> {
    if noise_fraction == 0.0 {
        return Ok(mesh.clone());
    }
    let sigma = noise_fraction * mesh.average_edge_length().as_f64();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = mesh.clone();
    for v in &mut out.vertices {
        let offset = Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
        *v = *v + offset.cast();
    }
    Ok(out)
}
