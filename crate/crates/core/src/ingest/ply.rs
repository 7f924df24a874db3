//! Minimal PLY codec for labeled point clouds.
//!
//! Reads ascii and binary little-endian files; big-endian input is rejected.
//! Only the `vertex` element is decoded. Other elements are skipped when they
//! precede it and ignored when they follow it.

use std::io::{self, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::LabeledPointCloud;

pub const DEFAULT_LABEL_FIELD: &str = "class_id";
pub const INSTANCE_FIELD: &str = "instance_id";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// Storage width of the x/y/z properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

/// How a cloud is laid out on disk; enough to re-emit a canonical file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlyLayout {
    pub format: PlyFormat,
    pub precision: Precision,
    pub label_field: String,
    pub write_instances: bool,
}

impl PlyLayout {
    pub fn new(format: PlyFormat, precision: Precision) -> Self {
        Self {
            format,
            precision,
            label_field: DEFAULT_LABEL_FIELD.to_string(),
            write_instances: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
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

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum PropertyKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropertyKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy)]
enum Value {
    Int(i64),
    Float(f64),
}

impl Value {
    fn as_f64(self) -> f64 {
        match self {
            Value::Int(v) => v as f64,
            Value::Float(v) => v,
        }
    }
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8], origin: &Path) -> Result<Header> {
    let fmt_err = |msg: String| Error::format(origin, msg);
    let mut offset = 0;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[offset..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            return Err(fmt_err("header is not terminated by end_header".into()));
        };
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| fmt_err("header is not valid UTF-8".into()))?
            .trim_end_matches('\r')
            .to_string();
        offset += nl + 1;
        let done = line.trim() == "end_header";
        lines.push(line);
        if done {
            break;
        }
    }

    if lines.first().map(|l| l.trim()) != Some("ply") {
        return Err(fmt_err("missing `ply` magic line".into()));
    }

    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, line) in lines.iter().enumerate().skip(1) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let lineno = i + 1;
        match tokens.as_slice() {
            [] | ["end_header"] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", kind, _version] => {
                format = Some(match *kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    "binary_big_endian" => {
                        return Err(fmt_err(
                            "binary_big_endian PLY is not supported; convert to ascii or binary_little_endian".into(),
                        ))
                    }
                    other => return Err(fmt_err(format!("unknown format `{other}` (line {lineno})"))),
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| fmt_err(format!("bad element count `{count}` (line {lineno})")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", count, item, name] => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| fmt_err(format!("property before element (line {lineno})")))?;
                let count = Scalar::parse(count)
                    .filter(|s| s.is_integer())
                    .ok_or_else(|| fmt_err(format!("bad list count type `{count}` (line {lineno})")))?;
                let item = Scalar::parse(item)
                    .ok_or_else(|| fmt_err(format!("bad list item type `{item}` (line {lineno})")))?;
                element.properties.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::List { count, item },
                });
            }
            ["property", ty, name] => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| fmt_err(format!("property before element (line {lineno})")))?;
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| fmt_err(format!("unknown property type `{ty}` (line {lineno})")))?;
                element.properties.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::Scalar(ty),
                });
            }
            _ => return Err(fmt_err(format!("unrecognized header line {lineno}: `{line}`"))),
        }
    }

    Ok(Header {
        format: format.ok_or_else(|| fmt_err("missing format line".into()))?,
        elements,
        body_offset: offset,
    })
}

/// Sequential value source over the body, ascii or binary.
enum Body<'a> {
    Ascii(std::str::SplitAsciiWhitespace<'a>),
    Binary(&'a [u8]),
}

impl<'a> Body<'a> {
    fn read(&mut self, ty: Scalar, origin: &Path) -> Result<Value> {
        match self {
            Body::Ascii(tokens) => {
                let tok = tokens
                    .next()
                    .ok_or_else(|| Error::format(origin, "ascii body ended early"))?;
                let bad = || Error::format(origin, format!("bad {ty:?} value `{tok}`"));
                Ok(match ty {
                    Scalar::F32 => Value::Float(tok.parse::<f32>().map_err(|_| bad())? as f64),
                    Scalar::F64 => Value::Float(tok.parse::<f64>().map_err(|_| bad())?),
                    _ => Value::Int(tok.parse::<i64>().map_err(|_| bad())?),
                })
            }
            Body::Binary(buf) => {
                let n = ty.size();
                if buf.len() < n {
                    return Err(Error::io(
                        origin,
                        io::Error::new(io::ErrorKind::UnexpectedEof, "truncated binary PLY payload"),
                    ));
                }
                let (head, tail) = buf.split_at(n);
                *buf = tail;
                Ok(match ty {
                    Scalar::I8 => Value::Int(head[0] as i8 as i64),
                    Scalar::U8 => Value::Int(head[0] as i64),
                    Scalar::I16 => Value::Int(i16::from_le_bytes([head[0], head[1]]) as i64),
                    Scalar::U16 => Value::Int(u16::from_le_bytes([head[0], head[1]]) as i64),
                    Scalar::I32 => Value::Int(i32::from_le_bytes(head.try_into().unwrap()) as i64),
                    Scalar::U32 => Value::Int(u32::from_le_bytes(head.try_into().unwrap()) as i64),
                    Scalar::F32 => Value::Float(f32::from_le_bytes(head.try_into().unwrap()) as f64),
                    Scalar::F64 => Value::Float(f64::from_le_bytes(head.try_into().unwrap())),
                })
            }
        }
    }

    fn skip_property(&mut self, kind: &PropertyKind, origin: &Path) -> Result<()> {
        match kind {
            PropertyKind::Scalar(ty) => {
                self.read(*ty, origin)?;
            }
            PropertyKind::List { count, item } => {
                let n = match self.read(*count, origin)? {
                    Value::Int(n) if n >= 0 => n as usize,
                    _ => return Err(Error::format(origin, "negative list length")),
                };
                for _ in 0..n {
                    self.read(*item, origin)?;
                }
            }
        }
        Ok(())
    }
}

fn label_to_class(v: i64) -> i32 {
    if v < 0 || v > i32::MAX as i64 {
        LabeledPointCloud::VOID
    } else {
        v as i32
    }
}

/// Decode a PLY image already in memory. `origin` is only used in errors.
pub fn decode_ply(bytes: &[u8], label_field: &str, origin: &Path) -> Result<(LabeledPointCloud, PlyLayout)> {
    let header = parse_header(bytes, origin)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::format(origin, "no `vertex` element"))?;
    let vertex = &header.elements[vertex_pos];

    let find = |name: &str| vertex.properties.iter().position(|p| p.name == name);
    let scalar_of = |idx: usize| match vertex.properties[idx].kind {
        PropertyKind::Scalar(s) => Some(s),
        PropertyKind::List { .. } => None,
    };

    let mut coord_idx = [0usize; 3];
    let mut precision = Precision::F32;
    for (axis, name) in ["x", "y", "z"].into_iter().enumerate() {
        let idx = find(name).ok_or_else(|| Error::format(origin, format!("missing vertex property `{name}`")))?;
        match scalar_of(idx) {
            Some(Scalar::F64) => precision = Precision::F64,
            Some(_) => {}
            None => return Err(Error::format(origin, format!("vertex property `{name}` is a list"))),
        }
        coord_idx[axis] = idx;
    }
    let label_idx = find(label_field)
        .ok_or_else(|| Error::format(origin, format!("missing vertex property `{label_field}`")))?;
    if !scalar_of(label_idx).is_some_and(Scalar::is_integer) {
        return Err(Error::format(
            origin,
            format!("label property `{label_field}` must be an integer scalar"),
        ));
    }
    let instance_idx = find(INSTANCE_FIELD)
        .filter(|&i| i != label_idx && scalar_of(i).is_some_and(Scalar::is_integer));

    let payload = &bytes[header.body_offset..];
    let mut body = match header.format {
        PlyFormat::Ascii => Body::Ascii(
            std::str::from_utf8(payload)
                .map_err(|_| Error::format(origin, "ascii body is not valid UTF-8"))?
                .split_ascii_whitespace(),
        ),
        PlyFormat::BinaryLittleEndian => Body::Binary(payload),
    };

    for element in &header.elements[..vertex_pos] {
        for _ in 0..element.count {
            for prop in &element.properties {
                body.skip_property(&prop.kind, origin)?;
            }
        }
    }

    let n = vertex.count;
    let mut points = Vec::with_capacity(n);
    let mut class_ids = Vec::with_capacity(n);
    let mut instance_ids = instance_idx.map(|_| Vec::with_capacity(n));
    let mut row = vec![Value::Int(0); vertex.properties.len()];
    for _ in 0..n {
        for (slot, prop) in row.iter_mut().zip(&vertex.properties) {
            match prop.kind {
                PropertyKind::Scalar(ty) => *slot = body.read(ty, origin)?,
                ref list => body.skip_property(list, origin)?,
            }
        }
        points.push(coord_idx.map(|i| row[i].as_f64()));
        let Value::Int(label) = row[label_idx] else { unreachable!() };
        class_ids.push(label_to_class(label));
        if let (Some(ids), Some(i)) = (instance_ids.as_mut(), instance_idx) {
            let Value::Int(inst) = row[i] else { unreachable!() };
            ids.push(inst.clamp(i32::MIN as i64, i32::MAX as i64) as i32);
        }
    }

    let layout = PlyLayout {
        format: header.format,
        precision,
        label_field: label_field.to_string(),
        write_instances: instance_ids.is_some(),
    };
    let cloud = LabeledPointCloud {
        points,
        class_ids,
        instance_ids,
    };
    Ok((cloud, layout))
}

/// Read a labeled cloud together with the layout it was stored in.
pub fn read_ply(path: impl AsRef<Path>, label_field: &str) -> Result<(LabeledPointCloud, PlyLayout)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ply(&bytes, label_field, path)
}

/// Negative labels are mapped to void; callers that know the vocabulary size
/// should follow up with [`LabeledPointCloud::clamp_to_vocabulary`].
pub fn load_point_cloud(path: impl AsRef<Path>, label_field: &str) -> Result<LabeledPointCloud> {
    read_ply(path, label_field).map(|(cloud, _)| cloud)
}

/// Serialize in canonical form: header with x/y/z, the label, and optionally
/// `instance_id`; ascii values use the shortest round-tripping decimal form.
pub fn encode_ply(cloud: &LabeledPointCloud, layout: &PlyLayout) -> Vec<u8> {
    let instances = cloud.instance_ids.as_ref().filter(|_| layout.write_instances);
    let float_ty = match layout.precision {
        Precision::F32 => "float",
        Precision::F64 => "double",
    };
    let format = match layout.format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = Vec::with_capacity(64 + cloud.len() * 24);
    let mut header = format!(
        "ply\nformat {format} 1.0\nelement vertex {}\nproperty {float_ty} x\nproperty {float_ty} y\nproperty {float_ty} z\nproperty int {}\n",
        cloud.len(),
        layout.label_field
    );
    if instances.is_some() {
        header.push_str(&format!("property int {INSTANCE_FIELD}\n"));
    }
    header.push_str("end_header\n");
    out.extend_from_slice(header.as_bytes());

    for (i, (p, &label)) in cloud.points.iter().zip(&cloud.class_ids).enumerate() {
        let inst = instances.map(|ids| ids[i]);
        match layout.format {
            PlyFormat::Ascii => {
                let coords: Vec<String> = match layout.precision {
                    Precision::F32 => p.iter().map(|&v| (v as f32).to_string()).collect(),
                    Precision::F64 => p.iter().map(|v| v.to_string()).collect(),
                };
                let _ = write!(out, "{} {label}", coords.join(" "));
                if let Some(inst) = inst {
                    let _ = write!(out, " {inst}");
                }
                out.push(b'\n');
            }
            PlyFormat::BinaryLittleEndian => {
                for &v in p {
                    match layout.precision {
                        Precision::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
                        Precision::F64 => out.extend_from_slice(&v.to_le_bytes()),
                    }
                }
                out.extend_from_slice(&label.to_le_bytes());
                if let Some(inst) = inst {
                    out.extend_from_slice(&inst.to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn write_ply(path: impl AsRef<Path>, cloud: &LabeledPointCloud, layout: &PlyLayout) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_ply(cloud, layout)).map_err(|e| Error::io(path, e))
}
