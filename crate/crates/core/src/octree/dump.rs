//! Binary volume dump: `"SDF1"`, bounds min (3×f64) and size (f64), level (u32), leaf count
//! (u64), then per leaf in depth-first order its centre (3×f64), half size (f64), value (f64)
//! and band flag (u8). All little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Cube, SdfVolume};
use crate::geometry::Vec3;
use crate::{Error, Real, Result};

const MAGIC: &[u8; 4] = b"SDF1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeafRecord {
    pub center: [f64; 3],
    pub half_size: f64,
    pub sdf: f64,
    pub band: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VolumeDump {
    pub bounds: Cube<f64>,
    pub level: u32,
    pub leaves: Vec<LeafRecord>,
}

impl VolumeDump {
    pub fn from_volume<T: Real>(volume: &SdfVolume<T>) -> Self {
        let b = volume.bounds();
        let leaves = volume
            .leaves_dfs()
            .into_iter()
            .map(|i| {
                let n = &volume.nodes()[i];
                LeafRecord {
                    center: volume.node_center(i).to_f64(),
                    half_size: b.cell_edge(n.level).as_f64() * 0.5,
                    sdf: n.value.as_f64(),
                    band: n.band,
                }
            })
            .collect();
        Self { bounds: Cube { min: b.min.cast(), size: b.size.as_f64() }, level: volume.level() as u32, leaves }
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        for v in self.bounds.min.to_f64() {
            w.write_f64::<LittleEndian>(v)?;
        }
        w.write_f64::<LittleEndian>(self.bounds.size)?;
        w.write_u32::<LittleEndian>(self.level)?;
        w.write_u64::<LittleEndian>(self.leaves.len() as u64)?;
        for leaf in &self.leaves {
            for v in leaf.center {
                w.write_f64::<LittleEndian>(v)?;
            }
            w.write_f64::<LittleEndian>(leaf.half_size)?;
            w.write_f64::<LittleEndian>(leaf.sdf)?;
            w.write_u8(leaf.band as u8)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> std::io::Result<std::result::Result<Self, String>> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Ok(Err("not an SDF1 volume dump".into()));
        }
        let min = [r.read_f64::<LittleEndian>()?, r.read_f64::<LittleEndian>()?, r.read_f64::<LittleEndian>()?];
        let size = r.read_f64::<LittleEndian>()?;
        let level = r.read_u32::<LittleEndian>()?;
        let count = r.read_u64::<LittleEndian>()?;
        let bounds = match Cube::new(Vec3::from_f64(min), size) {
            Ok(b) => b,
            Err(e) => return Ok(Err(e.to_string())),
        };
        let mut leaves = Vec::with_capacity(count.min(1 << 24) as usize);
        for _ in 0..count {
            let center = [r.read_f64::<LittleEndian>()?, r.read_f64::<LittleEndian>()?, r.read_f64::<LittleEndian>()?];
            let half_size = r.read_f64::<LittleEndian>()?;
            let sdf = r.read_f64::<LittleEndian>()?;
            let band = match r.read_u8()? {
                0 => false,
                1 => true,
                other => return Ok(Err(format!("invalid band flag {other}"))),
            };
            leaves.push(LeafRecord { center, half_size, sdf, band });
        }
        Ok(Ok(Self { bounds, level, leaves }))
    }

    /// Rebuilds the octree the dump describes.
    pub fn to_volume<T: Real>(&self) -> Result<SdfVolume<T>> {
        let b = self.bounds;
        let mut leaves = Vec::with_capacity(self.leaves.len());
        for leaf in &self.leaves {
            let ratio = b.size / (2.0 * leaf.half_size);
            let level = ratio.log2().round();
            if !(0.0..=super::MAX_LEVEL as f64).contains(&level) || (ratio - level.exp2()).abs() > 1e-6 * ratio {
                return Err(Error::Volume(format!("leaf half size {} does not match a tree level", leaf.half_size)));
            }
            let level = level as u8;
            let coords = b.cell_of(level, Vec3::from_f64(leaf.center));
            leaves.push((level, coords, T::of(leaf.sdf), leaf.band));
        }
        SdfVolume::from_leaves(Cube::new(b.min.cast(), T::of(b.size))?, &leaves)
    }
}

pub fn write_volume<T: Real>(path: &Path, volume: &SdfVolume<T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    VolumeDump::from_volume(volume).write_to(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_volume(path: &Path) -> Result<VolumeDump> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    VolumeDump::read_from(&mut BufReader::new(file))
        .map_err(|e| Error::io(path, e))?
        .map_err(|m| Error::format(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_tree_and_bytes() {
        let bounds = Cube::new(Vec3::splat(-2.0), 4.0).unwrap();
        let mut v = SdfVolume::from_fn(bounds, 3, |p| p.norm() - 1.0).unwrap();
        v.subdivide_band();
        let dump = VolumeDump::from_volume(&v);
        let mut bytes = Vec::new();
        dump.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"SDF1");
        assert_eq!(bytes.len(), 4 + 32 + 4 + 8 + dump.leaves.len() * 41);
        let back = VolumeDump::read_from(&mut bytes.as_slice()).unwrap().unwrap();
        assert_eq!(back, dump);
        let w: SdfVolume<f64> = back.to_volume().unwrap();
        assert_eq!(w.d(), v.d());
        let mut again = Vec::new();
        VolumeDump::from_volume(&w).write_to(&mut again).unwrap();
        assert_eq!(again, bytes);
    }

    #[test]
    fn rejects_bad_magic() {
        let bytes = b"NOPE0000000000000000000000000000000000000000000000".to_vec();
        assert!(VolumeDump::read_from(&mut bytes.as_slice()).unwrap().is_err());
    }
}
