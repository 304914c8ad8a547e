//! Mesh (PLY, OBJ) and image (PNG) input/output.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Image, TriangleMesh, Vec3};
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// Loads a PLY or OBJ mesh by file extension. The result is cleaned of degenerate triangles.
pub fn read_mesh<T: Real>(path: &Path) -> Result<TriangleMesh<T>> {
    match extension(path).as_str() {
        "ply" => read_ply(path),
        "obj" => read_obj(path),
        other => Err(Error::format(path, format!("unsupported mesh extension '{other}'"))),
    }
}

pub fn write_mesh<T: Real>(path: &Path, mesh: &TriangleMesh<T>) -> Result<()> {
    match extension(path).as_str() {
        "ply" => write_ply(path, mesh, PlyFormat::BinaryLittleEndian),
        "obj" => write_obj(path, mesh),
        other => Err(Error::format(path, format!("unsupported mesh extension '{other}'"))),
    }
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn read_binary(self, r: &mut impl Read) -> std::io::Result<f64> {
        Ok(match self {
            Scalar::I8 => r.read_i8()? as f64,
            Scalar::U8 => r.read_u8()? as f64,
            Scalar::I16 => r.read_i16::<LittleEndian>()? as f64,
            Scalar::U16 => r.read_u16::<LittleEndian>()? as f64,
            Scalar::I32 => r.read_i32::<LittleEndian>()? as f64,
            Scalar::U32 => r.read_u32::<LittleEndian>()? as f64,
            Scalar::F32 => r.read_f32::<LittleEndian>()? as f64,
            Scalar::F64 => r.read_f64::<LittleEndian>()?,
        })
    }
}

#[derive(Clone, Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

pub fn read_ply<T: Real>(path: &Path) -> Result<TriangleMesh<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let bad = |m: &str| Error::format(path, m.to_string());

    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    if line.trim() != "ply" {
        return Err(bad("missing 'ply' magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
            return Err(bad("unexpected end of header"));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLittleEndian),
            ["format", other, _] => return Err(bad(&format!("unsupported PLY format {other}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| bad("bad element count"))?,
                properties: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                el.properties.push(Property::List {
                    name: name.to_string(),
                    count: Scalar::parse(count).ok_or_else(|| bad("bad list count type"))?,
                    item: Scalar::parse(item).ok_or_else(|| bad("bad list item type"))?,
                });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                el.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty).ok_or_else(|| bad("bad property type"))?,
                });
            }
            ["end_header"] => break,
            _ => {}
        }
    }
    let format = format.ok_or_else(|| bad("missing format line"))?;

    let mut vertices = Vec::new();
    let mut colors: Vec<[f64; 3]> = Vec::new();
    let mut has_color = false;
    let mut triangles = Vec::new();
    let mut ascii_tokens: Vec<String> = Vec::new();
    let mut ascii_pos = 0usize;
    if format == PlyFormat::Ascii {
        let mut rest = String::new();
        reader.read_to_string(&mut rest).map_err(|e| Error::io(path, e))?;
        ascii_tokens = rest.split_whitespace().map(str::to_string).collect();
    }
    let mut next = |ty: Scalar, reader: &mut BufReader<File>| -> Result<f64> {
        match format {
            PlyFormat::BinaryLittleEndian => ty.read_binary(reader).map_err(|e| Error::io(path, e)),
            PlyFormat::Ascii => {
                let tok = ascii_tokens.get(ascii_pos).ok_or_else(|| bad("truncated ASCII body"))?;
                ascii_pos += 1;
                tok.parse::<f64>().map_err(|_| bad("bad ASCII number"))
            }
        }
    };

    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [0.0f64; 3];
            let mut rgb = [0.0f64; 3];
            let mut color_scale = 1.0;
            for prop in &el.properties {
                match prop {
                    Property::Scalar { name, ty } => {
                        let v = next(*ty, &mut reader)?;
                        if el.name == "vertex" {
                            match name.as_str() {
                                "x" => xyz[0] = v,
                                "y" => xyz[1] = v,
                                "z" => xyz[2] = v,
                                "red" | "green" | "blue" => {
                                    has_color = true;
                                    color_scale = if *ty == Scalar::U8 { 1.0 / 255.0 } else { 1.0 };
                                    let c = match name.as_str() {
                                        "red" => 0,
                                        "green" => 1,
                                        _ => 2,
                                    };
                                    rgb[c] = v;
                                }
                                _ => {}
                            }
                        }
                    }
                    Property::List { name, count, item } => {
                        let n = next(*count, &mut reader)? as usize;
                        let mut idx = Vec::with_capacity(n);
                        for _ in 0..n {
                            idx.push(next(*item, &mut reader)? as u32);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            for k in 1..n.saturating_sub(1) {
                                triangles.push([idx[0], idx[k], idx[k + 1]]);
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                vertices.push(Vec3::from_f64(xyz));
                colors.push(rgb.map(|c| c * color_scale));
            }
        }
    }
    let mut mesh = TriangleMesh::new(vertices, triangles).map_err(|e| Error::format(path, e.to_string()))?;
    if has_color {
        mesh.albedo = Some(colors.into_iter().map(|c| c.map(T::of)).collect());
    }
    Ok(mesh)
}

pub fn write_ply<T: Real>(path: &Path, mesh: &TriangleMesh<T>, format: PlyFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut header = format!("ply\nformat {fmt} 1.0\nelement vertex {}\n", mesh.vertices.len());
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if mesh.albedo.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    header.push_str(&format!(
        "element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.triangles.len()
    ));
    w.write_all(header.as_bytes()).map_err(io)?;
    let to_u8 = |c: T| (c.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8;
    for (i, v) in mesh.vertices.iter().enumerate() {
        let c = mesh.albedo.as_ref().map(|a| a[i].map(to_u8));
        match format {
            PlyFormat::Ascii => {
                write!(w, "{} {} {}", v.x.as_f64(), v.y.as_f64(), v.z.as_f64()).map_err(io)?;
                if let Some(c) = c {
                    write!(w, " {} {} {}", c[0], c[1], c[2]).map_err(io)?;
                }
                writeln!(w).map_err(io)?;
            }
            PlyFormat::BinaryLittleEndian => {
                for x in v.to_f64() {
                    w.write_f64::<LittleEndian>(x).map_err(io)?;
                }
                if let Some(c) = c {
                    w.write_all(&c).map_err(io)?;
                }
            }
        }
    }
    for t in &mesh.triangles {
        match format {
            PlyFormat::Ascii => writeln!(w, "3 {} {} {}", t[0], t[1], t[2]).map_err(io)?,
            PlyFormat::BinaryLittleEndian => {
                w.write_u8(3).map_err(io)?;
                for &i in t {
                    w.write_i32::<LittleEndian>(i as i32).map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(io)
}

pub fn read_obj<T: Real>(path: &Path) -> Result<TriangleMesh<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| Error::format(path, format!("line {}: bad vertex", n + 1)))?;
                if c.len() != 3 {
                    return Err(Error::format(path, format!("line {}: vertex needs 3 coordinates", n + 1)));
                }
                vertices.push(Vec3::from_f64([c[0], c[1], c[2]]));
            }
            Some("f") => {
                let count = vertices.len() as i64;
                let idx: Vec<u32> = it
                    .map(|s| {
                        let first = s.split('/').next().unwrap_or("");
                        let i: i64 =
                            first.parse().map_err(|_| Error::format(path, format!("line {}: bad face", n + 1)))?;
                        let resolved = if i < 0 { count + i } else { i - 1 };
                        u32::try_from(resolved).map_err(|_| Error::format(path, format!("line {}: bad index", n + 1)))
                    })
                    .collect::<Result<_>>()?;
                for k in 1..idx.len().saturating_sub(1) {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_obj<T: Real>(path: &Path, mesh: &TriangleMesh<T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for v in &mesh.vertices {
        writeln!(w, "v {:e} {:e} {:e}", v.x.as_f64(), v.y.as_f64(), v.z.as_f64()).map_err(io)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Loads an 8- or 16-bit grayscale PNG, normalising intensities to `[0, 1]` by the maximum
/// representable value. Colour images are converted to luma.
pub fn read_png<T: Real>(path: &Path) -> Result<Image<T>> {
    let img = image::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    let (w, h) = (img.width(), img.height());
    let data: Vec<T> = match img {
        image::DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|v| T::of(v as f64 / 255.0)).collect(),
        image::DynamicImage::ImageLuma16(buf) => {
            buf.into_raw().into_iter().map(|v| T::of(v as f64 / 65535.0)).collect()
        }
        other => other.into_luma16().into_raw().into_iter().map(|v| T::of(v as f64 / 65535.0)).collect(),
    };
    Image::from_data(w, h, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

/// Writes intensities clamped to `[0, 1]` as grayscale PNG.
pub fn write_png<T: Real>(path: &Path, image: &Image<T>, depth: BitDepth) -> Result<()> {
    let clamp = |v: T| v.as_f64().clamp(0.0, 1.0);
    match depth {
        BitDepth::Sixteen => {
            let raw: Vec<u16> = image.data.iter().map(|&v| (clamp(v) * 65535.0).round() as u16).collect();
            let buf = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(image.width, image.height, raw)
                .ok_or_else(|| Error::format(path, "image buffer size mismatch"))?;
            buf.save(path)?;
        }
        BitDepth::Eight => {
            let raw: Vec<u8> = image.data.iter().map(|&v| (clamp(v) * 255.0).round() as u8).collect();
            let buf = image::ImageBuffer::<image::Luma<u8>, _>::from_raw(image.width, image.height, raw)
                .ok_or_else(|| Error::format(path, "image buffer size mismatch"))?;
            buf.save(path)?;
        }
    }
    Ok(())
}

/// Value of a 16-bit quantisation round trip, as seen after writing and re-reading a PNG.
pub fn quantize16<T: Real>(v: T) -> T {
    T::of((v.as_f64().clamp(0.0, 1.0) * 65535.0).round() / 65535.0)
}
