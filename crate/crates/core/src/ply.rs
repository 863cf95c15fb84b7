//! PLY point cloud reader and writer.
//!
//! Supported encodings: `ascii`, `binary_little_endian` and
//! `binary_big_endian` (read only). The `vertex` element is decoded into a
//! [`PointCloud`]:
//!
//! | property                    | PLY type written | accepted on read          |
//! |-----------------------------|------------------|---------------------------|
//! | `x`, `y`, `z`               | `double`         | any scalar                |
//! | `red`, `green`, `blue`      | `uchar`          | any scalar in `0..=255`   |
//! | `intensity`                 | `float`          | any scalar                |
//! | `label` (or `classification`) | `uchar`        | any integer in `0..=255`  |
//!
//! Other vertex properties are skipped, as are all other elements (including
//! ones with list properties, e.g. faces).

use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Ascii,
    BinaryLittleEndian,
    BinaryBigEndian,
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
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::data(format!("unknown PLY scalar type '{other}'"))),
        })
    }

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
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

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0usize;
    let mut next_line = || -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::data("PLY header is not terminated by end_header"))?;
        pos += end + 1;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| Error::data("PLY header is not valid text"))?;
        Ok(line.trim_end_matches('\r'))
    };

    if next_line()?.trim() != "ply" {
        return Err(Error::data("missing 'ply' magic line"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = next_line()?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                encoding = Some(match (tok.next(), tok.next()) {
                    (Some("ascii"), Some("1.0")) => Encoding::Ascii,
                    (Some("binary_little_endian"), Some("1.0")) => Encoding::BinaryLittleEndian,
                    (Some("binary_big_endian"), Some("1.0")) => Encoding::BinaryBigEndian,
                    _ => return Err(Error::data(format!("unsupported PLY format line '{line}'"))),
                });
            }
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| Error::data("element without a name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| Error::data(format!("element '{name}' has no valid count")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| Error::data("property declared before any element"))?;
                let ty = tok.next().ok_or_else(|| Error::data("property without type"))?;
                let kind = if ty == "list" {
                    let count = Scalar::parse(tok.next().unwrap_or(""))?;
                    let item = Scalar::parse(tok.next().unwrap_or(""))?;
                    if !count.is_integer() {
                        return Err(Error::data("PLY list count must be an integer type"));
                    }
                    PropertyKind::List { count, item }
                } else {
                    PropertyKind::Scalar(Scalar::parse(ty)?)
                };
                let name = tok
                    .next()
                    .ok_or_else(|| Error::data("property without a name"))?;
                element.properties.push(Property {
                    name: name.to_string(),
                    kind,
                });
            }
            Some("end_header") => break,
            Some(other) => return Err(Error::data(format!("unexpected PLY header keyword '{other}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::data("PLY header lacks a format line"))?;
    Ok(Header {
        encoding,
        elements,
        body_offset: pos,
    })
}

/// Source of scalar values for either encoding.
trait ValueSource {
    fn scalar(&mut self, ty: Scalar) -> Result<f64>;
    fn end_row(&mut self) -> Result<()>;
}

struct BinarySource<'a> {
    data: &'a [u8],
    pos: usize,
    big_endian: bool,
}

impl BinarySource<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let chunk = self
            .data
            .get(self.pos..end)
            .ok_or_else(|| Error::data("PLY binary body is truncated"))?;
        self.pos = end;
        let mut out: [u8; N] = chunk.try_into().unwrap();
        if self.big_endian {
            out.reverse();
        }
        Ok(out)
    }

    fn remaining(&self) -> usize {
        self.data.len().saturating_sub(self.pos)
    }
}

impl ValueSource for BinarySource<'_> {
    fn scalar(&mut self, ty: Scalar) -> Result<f64> {
        Ok(match ty {
            Scalar::I8 => i8::from_le_bytes(self.take()?) as f64,
            Scalar::U8 => u8::from_le_bytes(self.take()?) as f64,
            Scalar::I16 => i16::from_le_bytes(self.take()?) as f64,
            Scalar::U16 => u16::from_le_bytes(self.take()?) as f64,
            Scalar::I32 => i32::from_le_bytes(self.take()?) as f64,
            Scalar::U32 => u32::from_le_bytes(self.take()?) as f64,
            Scalar::F32 => f32::from_le_bytes(self.take()?) as f64,
            Scalar::F64 => f64::from_le_bytes(self.take()?),
        })
    }

    fn end_row(&mut self) -> Result<()> {
        Ok(())
    }
}

struct AsciiSource<'a> {
    lines: std::str::Lines<'a>,
    tokens: std::str::SplitWhitespace<'a>,
    line_no: usize,
}

impl<'a> AsciiSource<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines(),
            tokens: "".split_whitespace(),
            line_no: 0,
        }
    }

    fn start_row(&mut self) -> Result<()> {
        loop {
            let line = self
                .lines
                .next()
                .ok_or_else(|| Error::data("PLY ascii body has fewer rows than declared"))?;
            self.line_no += 1;
            if !line.trim().is_empty() {
                self.tokens = line.split_whitespace();
                return Ok(());
            }
        }
    }
}

impl ValueSource for AsciiSource<'_> {
    fn scalar(&mut self, ty: Scalar) -> Result<f64> {
        let tok = self.tokens.next().ok_or_else(|| {
            Error::data(format!("PLY ascii body row {} is too short", self.line_no))
        })?;
        let v = if ty.is_integer() {
            tok.parse::<i64>().map(|v| v as f64).ok()
        } else {
            tok.parse::<f64>().ok()
        };
        v.ok_or_else(|| {
            Error::data(format!(
                "PLY ascii body row {}: cannot parse '{tok}'",
                self.line_no
            ))
        })
    }

    fn end_row(&mut self) -> Result<()> {
        if self.tokens.next().is_some() {
            return Err(Error::data(format!(
                "PLY ascii body row {} has extra values",
                self.line_no
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Slot {
    X,
    Y,
    Z,
    Red,
    Green,
    Blue,
    Intensity,
    Label,
    Skip,
}

fn vertex_slots(element: &Element) -> Result<Vec<Slot>> {
    let mut slots = Vec::with_capacity(element.properties.len());
    for p in &element.properties {
        let slot = match p.name.as_str() {
            "x" => Slot::X,
            "y" => Slot::Y,
            "z" => Slot::Z,
            "red" => Slot::Red,
            "green" => Slot::Green,
            "blue" => Slot::Blue,
            "intensity" => Slot::Intensity,
            "label" | "classification" => Slot::Label,
            _ => Slot::Skip,
        };
        if !matches!(slot, Slot::Skip) && matches!(p.kind, PropertyKind::List { .. }) {
            return Err(Error::data(format!("vertex property '{}' must be a scalar", p.name)));
        }
        slots.push(slot);
    }
    for axis in ["x", "y", "z"] {
        if !element.properties.iter().any(|p| p.name == axis) {
            return Err(Error::data(format!("vertex element lacks property '{axis}'")));
        }
    }
    Ok(slots)
}

fn skip_property<S: ValueSource>(src: &mut S, kind: &PropertyKind) -> Result<()> {
    match *kind {
        PropertyKind::Scalar(ty) => {
            src.scalar(ty)?;
        }
        PropertyKind::List { count, item } => {
            let n = src.scalar(count)?;
            if !(0.0..=1e6).contains(&n) {
                return Err(Error::data(format!("implausible PLY list length {n}")));
            }
            for _ in 0..n as usize {
                src.scalar(item)?;
            }
        }
    }
    Ok(())
}

fn to_u8(v: f64, what: &str) -> Result<u8> {
    if v.fract() == 0.0 && (0.0..=255.0).contains(&v) {
        Ok(v as u8)
    } else {
        Err(Error::data(format!("{what} value {v} is not an integer in 0..=255")))
    }
}

fn read_body<S: ValueSource>(
    src: &mut S,
    header: &Header,
    mut before_row: impl FnMut(&mut S) -> Result<()>,
    capacity_hint: impl Fn(usize) -> usize,
) -> Result<PointCloud> {
    let mut cloud = None;
    for element in &header.elements {
        if element.name == "vertex" {
            if cloud.is_some() {
                return Err(Error::data("PLY file declares two vertex elements"));
            }
            let slots = vertex_slots(element)?;
            let has = |s: &str| element.properties.iter().any(|p| p.name == s);
            let has_color = has("red") && has("green") && has("blue");
            let has_intensity = has("intensity");
            let has_label = has("label") || has("classification");

            let cap = capacity_hint(element.count);
            let mut positions = Vec::with_capacity(cap);
            let mut colors = has_color.then(|| Vec::with_capacity(cap));
            let mut intensity = has_intensity.then(|| Vec::with_capacity(cap));
            let mut labels = has_label.then(|| Vec::with_capacity(cap));

            for _ in 0..element.count {
                before_row(src)?;
                let mut p = [0.0f64; 3];
                let mut rgb = [0u8; 3];
                let mut inten = 0.0f32;
                let mut label = 0u8;
                for (slot, prop) in slots.iter().zip(&element.properties) {
                    let ty = match prop.kind {
                        PropertyKind::Scalar(ty) => ty,
                        PropertyKind::List { .. } => {
                            skip_property(src, &prop.kind)?;
                            continue;
                        }
                    };
                    let v = src.scalar(ty)?;
                    match slot {
                        Slot::X => p[0] = v,
                        Slot::Y => p[1] = v,
                        Slot::Z => p[2] = v,
                        Slot::Red => rgb[0] = to_u8(v, "red")?,
                        Slot::Green => rgb[1] = to_u8(v, "green")?,
                        Slot::Blue => rgb[2] = to_u8(v, "blue")?,
                        Slot::Intensity => inten = v as f32,
                        Slot::Label => label = to_u8(v, "label")?,
                        Slot::Skip => {}
                    }
                }
                src.end_row()?;
                positions.push(p);
                if let Some(c) = colors.as_mut() {
                    c.push(rgb);
                }
                if let Some(i) = intensity.as_mut() {
                    i.push(inten);
                }
                if let Some(l) = labels.as_mut() {
                    l.push(label);
                }
            }
            cloud = Some(PointCloud {
                positions,
                colors,
                intensity,
                labels,
            });
        } else if !element.properties.is_empty() || header.encoding == Encoding::Ascii {
            for _ in 0..element.count {
                before_row(src)?;
                for prop in &element.properties {
                    skip_property(src, &prop.kind)?;
                }
                src.end_row()?;
            }
        }
    }
    let cloud = cloud.ok_or_else(|| Error::data("PLY file has no vertex element"))?;
    cloud.validate()?;
    Ok(cloud)
}

/// Parses a complete PLY document.
pub fn read_ply(bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(bytes)?;
    let body = &bytes[header.body_offset..];
    match header.encoding {
        Encoding::Ascii => {
            let text =
                std::str::from_utf8(body).map_err(|_| Error::data("PLY ascii body is not text"))?;
            let mut src = AsciiSource::new(text);
            read_body(&mut src, &header, |s| s.start_row(), |n| n.min(1 << 20))
        }
        Encoding::BinaryLittleEndian | Encoding::BinaryBigEndian => {
            let mut src = BinarySource {
                data: body,
                pos: 0,
                big_endian: header.encoding == Encoding::BinaryBigEndian,
            };
            let remaining = src.remaining();
            // A vertex row holds at least three one-byte scalars.
            read_body(&mut src, &header, |_| Ok(()), move |n| n.min(remaining / 3))
        }
    }
}

pub fn read_ply_file(path: &Path) -> Result<PointCloud> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    read_ply(&bytes).map_err(|e| match e {
        Error::Data(msg) => Error::data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Serializes a cloud. Big-endian output is not offered.
pub fn write_ply(cloud: &PointCloud, encoding: Encoding) -> Result<Vec<u8>> {
    cloud.validate()?;
    if encoding == Encoding::BinaryBigEndian {
        return Err(Error::invalid("writing big-endian PLY is not supported"));
    }
    let mut header = String::from("ply\n");
    header.push_str(match encoding {
        Encoding::Ascii => "format ascii 1.0\n",
        _ => "format binary_little_endian 1.0\n",
    });
    header.push_str(&format!("element vertex {}\n", cloud.len()));
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.colors.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if cloud.intensity.is_some() {
        header.push_str("property float intensity\n");
    }
    if cloud.labels.is_some() {
        header.push_str("property uchar label\n");
    }
    header.push_str("end_header\n");

    let mut out = header.into_bytes();
    for i in 0..cloud.len() {
        let p = cloud.positions[i];
        match encoding {
            Encoding::Ascii => {
                let mut row = format!("{} {} {}", p[0], p[1], p[2]);
                if let Some(c) = &cloud.colors {
                    row.push_str(&format!(" {} {} {}", c[i][0], c[i][1], c[i][2]));
                }
                if let Some(v) = &cloud.intensity {
                    row.push_str(&format!(" {}", v[i]));
                }
                if let Some(l) = &cloud.labels {
                    row.push_str(&format!(" {}", l[i]));
                }
                row.push('\n');
                out.extend_from_slice(row.as_bytes());
            }
            _ => {
                for c in p {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                if let Some(c) = &cloud.colors {
                    out.extend_from_slice(&c[i]);
                }
                if let Some(v) = &cloud.intensity {
                    out.extend_from_slice(&v[i].to_le_bytes());
                }
                if let Some(l) = &cloud.labels {
                    out.push(l[i]);
                }
            }
        }
    }
    Ok(out)
}

pub fn write_ply_file(path: &Path, cloud: &PointCloud, encoding: Encoding) -> Result<()> {
    std::fs::write(path, write_ply(cloud, encoding)?)?;
    Ok(())
}
