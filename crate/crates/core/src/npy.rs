//! Minimal reader and writer for the NumPy `.npy` container.
//!
//! Writes version 1.0 headers, little-endian, C order, with the header padded
//! so the payload starts on a 64-byte boundary. Reads versions 1.0, 2.0 and
//! 3.0 for the element types this crate exchanges: `u1`, `i4`, `i8`, `f4`
//! and `f8`. Fortran-ordered and big-endian arrays are rejected.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    U8,
    I32,
    I64,
    F32,
    F64,
}

impl Dtype {
    pub fn descr(self) -> &'static str {
        match self {
            Dtype::U8 => "|u1",
            Dtype::I32 => "<i4",
            Dtype::I64 => "<i8",
            Dtype::F32 => "<f4",
            Dtype::F64 => "<f8",
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::I32 | Dtype::F32 => 4,
            Dtype::I64 | Dtype::F64 => 8,
        }
    }

    fn parse(descr: &str) -> Result<Self> {
        match descr {
            "|u1" | "<u1" => Ok(Dtype::U8),
            "<i4" => Ok(Dtype::I32),
            "<i8" => Ok(Dtype::I64),
            "<f4" => Ok(Dtype::F32),
            "<f8" => Ok(Dtype::F64),
            other => Err(Error::data(format!("unsupported npy dtype '{other}'"))),
        }
    }
}

/// Decoded array: raw little-endian payload plus shape and dtype.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    data: Vec<u8>,
}

impl NpyArray {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn expect_dtype(&self, dtype: Dtype) -> Result<()> {
        if self.dtype != dtype {
            return Err(Error::data(format!(
                "expected dtype {}, found {}",
                dtype.descr(),
                self.dtype.descr()
            )));
        }
        Ok(())
    }

    pub fn expect_ndim(&self, ndim: usize) -> Result<()> {
        if self.shape.len() != ndim {
            return Err(Error::data(format!(
                "expected a {ndim}-d array, found shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    /// Elements as `u8`; only valid for `u1` arrays.
    pub fn to_u8(&self) -> Result<Vec<u8>> {
        self.expect_dtype(Dtype::U8)?;
        Ok(self.data.clone())
    }

    pub fn into_u8(self) -> Result<Vec<u8>> {
        self.expect_dtype(Dtype::U8)?;
        Ok(self.data)
    }

    /// Elements widened to `f64`. Integer arrays are converted exactly.
    pub fn to_f64(&self) -> Vec<f64> {
        match self.dtype {
            Dtype::U8 => self.data.iter().map(|&b| b as f64).collect(),
            Dtype::I32 => chunks::<4>(&self.data)
                .map(|c| i32::from_le_bytes(c) as f64)
                .collect(),
            Dtype::I64 => chunks::<8>(&self.data)
                .map(|c| i64::from_le_bytes(c) as f64)
                .collect(),
            Dtype::F32 => chunks::<4>(&self.data)
                .map(|c| f32::from_le_bytes(c) as f64)
                .collect(),
            Dtype::F64 => chunks::<8>(&self.data).map(f64::from_le_bytes).collect(),
        }
    }

    /// Elements as `f32`; accepts `f4` only.
    pub fn to_f32(&self) -> Result<Vec<f32>> {
        self.expect_dtype(Dtype::F32)?;
        Ok(chunks::<4>(&self.data).map(f32::from_le_bytes).collect())
    }

    /// Integer labels in `0..=255`, converting from any integer dtype.
    pub fn to_labels(&self) -> Result<Vec<u8>> {
        match self.dtype {
            Dtype::U8 => Ok(self.data.clone()),
            Dtype::I32 | Dtype::I64 => self
                .to_f64()
                .into_iter()
                .map(|v| {
                    u8::try_from(v as i64)
                        .map_err(|_| Error::data(format!("label value {v} outside 0..=255")))
                })
                .collect(),
            _ => Err(Error::data(format!(
                "labels must be an integer array, found {}",
                self.dtype.descr()
            ))),
        }
    }
}

fn chunks<const N: usize>(data: &[u8]) -> impl Iterator<Item = [u8; N]> + '_ {
    data.chunks_exact(N).map(|c| c.try_into().unwrap())
}

fn header_bytes(dtype: Dtype, shape: &[usize]) -> Vec<u8> {
    let shape_str = match shape {
        [n] => format!("({n},)"),
        dims => format!(
            "({})",
            dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        dtype.descr(),
        shape_str
    );
    // magic(6) + version(2) + header length(2) + dict + '\n'
    let unpadded = 10 + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');

    let mut out = Vec::with_capacity(10 + dict.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

fn check_len(shape: &[usize], len: usize) -> Result<()> {
    let expected: usize = shape.iter().product();
    if expected != len {
        return Err(Error::invalid(format!(
            "shape {shape:?} needs {expected} elements, got {len}"
        )));
    }
    Ok(())
}

pub fn write_u8<W: Write>(w: &mut W, shape: &[usize], data: &[u8]) -> Result<()> {
    check_len(shape, data.len())?;
    w.write_all(&header_bytes(Dtype::U8, shape))?;
    w.write_all(data)?;
    Ok(())
}

pub fn write_i32<W: Write>(w: &mut W, shape: &[usize], data: &[i32]) -> Result<()> {
    check_len(shape, data.len())?;
    w.write_all(&header_bytes(Dtype::I32, shape))?;
    let mut buf = Vec::with_capacity(data.len() * 4);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_f32<W: Write>(w: &mut W, shape: &[usize], data: &[f32]) -> Result<()> {
    check_len(shape, data.len())?;
    w.write_all(&header_bytes(Dtype::F32, shape))?;
    let mut buf = Vec::with_capacity(data.len() * 4);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_f64<W: Write>(w: &mut W, shape: &[usize], data: &[f64]) -> Result<()> {
    check_len(shape, data.len())?;
    w.write_all(&header_bytes(Dtype::F64, shape))?;
    let mut buf = Vec::with_capacity(data.len() * 8);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn to_bytes_u8(shape: &[usize], data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_u8(&mut out, shape, data)?;
    Ok(out)
}

/// Pulls the value text that follows `'key':` in a header dict.
fn dict_value<'a>(dict: &'a str, key: &str) -> Result<&'a str> {
    let pat = format!("'{key}':");
    let start = dict
        .find(&pat)
        .ok_or_else(|| Error::data(format!("npy header lacks '{key}'")))?
        + pat.len();
    Ok(dict[start..].trim_start())
}

fn parse_header(dict: &str) -> Result<(Dtype, bool, Vec<usize>)> {
    let descr_val = dict_value(dict, "descr")?;
    let descr = descr_val
        .strip_prefix('\'')
        .and_then(|s| s.split('\'').next())
        .ok_or_else(|| Error::data("malformed npy descr"))?;
    let dtype = Dtype::parse(descr)?;

    let fortran = dict_value(dict, "fortran_order")?;
    let fortran_order = if fortran.starts_with("True") {
        true
    } else if fortran.starts_with("False") {
        false
    } else {
        return Err(Error::data("malformed npy fortran_order"));
    };

    let shape_val = dict_value(dict, "shape")?;
    let inner = shape_val
        .strip_prefix('(')
        .and_then(|s| s.split(')').next())
        .ok_or_else(|| Error::data("malformed npy shape"))?;
    let shape = inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim_end_matches('L')
                .parse::<usize>()
                .map_err(|_| Error::data(format!("bad npy dimension '{s}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((dtype, fortran_order, shape))
}

pub fn read<R: Read>(r: &mut R) -> Result<NpyArray> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::data("truncated npy preamble"))?;
    if &magic[..6] != MAGIC {
        return Err(Error::data("not an npy file (bad magic)"));
    }
    let header_len = match magic[6] {
        1 => {
            let mut b = [0u8; 2];
            r.read_exact(&mut b)?;
            u16::from_le_bytes(b) as usize
        }
        2 | 3 => {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            u32::from_le_bytes(b) as usize
        }
        v => return Err(Error::data(format!("unsupported npy version {v}"))),
    };
    if header_len > 1 << 20 {
        return Err(Error::data(format!("npy header length {header_len} is implausible")));
    }
    let mut header = vec![0u8; header_len];
    r.read_exact(&mut header)
        .map_err(|_| Error::data("truncated npy header"))?;
    let dict = std::str::from_utf8(&header).map_err(|_| Error::data("npy header is not text"))?;
    let (dtype, fortran_order, shape) = parse_header(dict)?;
    if fortran_order && shape.len() > 1 {
        return Err(Error::data("Fortran-ordered npy arrays are not supported"));
    }
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(dtype.size()))
        .ok_or_else(|| Error::data("npy shape overflows"))?;
    let mut data = Vec::new();
    r.take(count as u64).read_to_end(&mut data)?;
    if data.len() != count {
        return Err(Error::data(format!(
            "npy payload truncated: expected {count} bytes, found {}",
            data.len()
        )));
    }
    Ok(NpyArray { dtype, shape, data })
}

pub fn from_bytes(bytes: &[u8]) -> Result<NpyArray> {
    read(&mut &bytes[..])
}

pub fn read_file(path: &std::path::Path) -> Result<NpyArray> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    from_bytes(&bytes).map_err(|e| match e {
        Error::Data(msg) => Error::data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_file_f32(path: &std::path::Path, shape: &[usize], data: &[f32]) -> Result<()> {
    let mut buf = Vec::new();
    write_f32(&mut buf, shape, data)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn write_file_u8(path: &std::path::Path, shape: &[usize], data: &[u8]) -> Result<()> {
    std::fs::write(path, to_bytes_u8(shape, data)?)?;
    Ok(())
}

pub fn write_file_f64(path: &std::path::Path, shape: &[usize], data: &[f64]) -> Result<()> {
    let mut buf = Vec::new();
    write_f64(&mut buf, shape, data)?;
    std::fs::write(path, buf)?;
    Ok(())
}
