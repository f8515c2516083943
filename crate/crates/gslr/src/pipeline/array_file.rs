//! Self-describing binary array files.
//!
//! Layout: one UTF-8 header line, then a raw little-endian payload.
//!
//! ```text
//! gslr-array v1 dtype=c128 shape=1,16,16 layout=row-major prov.seed=7\n
//! <payload bytes>
//! ```
//!
//! The header carries the dtype (c64, c128, f64, u8), the shape as
//! channels,ny,nx, the layout tag, and an arbitrary provenance map whose
//! values are percent-encoded. Round trips are bit-exact for every dtype.

use crate::error::{GslrError, Result};
use crate::grid::{KArray, KGrid};
use crate::sampling::Mask;
use num_complex::{Complex32, Complex64};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &str = "gslr-array";
const VERSION: &str = "v1";
const MAX_HEADER: usize = 1 << 16;
/// Caps shape products so hostile headers cannot trigger huge allocations.
const MAX_ELEMENTS: usize = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    C64,
    C128,
    F64,
    U8,
}

impl Dtype {
    pub fn size(&self) -> usize {
        match self {
            Dtype::C64 => 8,
            Dtype::C128 => 16,
            Dtype::F64 => 8,
            Dtype::U8 => 1,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Dtype::C64 => "c64",
            Dtype::C128 => "c128",
            Dtype::F64 => "f64",
            Dtype::U8 => "u8",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "c64" => Ok(Dtype::C64),
            "c128" => Ok(Dtype::C128),
            "f64" => Ok(Dtype::F64),
            "u8" => Ok(Dtype::U8),
            other => Err(GslrError::UnsupportedDtype(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayPayload {
    C64(Vec<Complex32>),
    C128(Vec<Complex64>),
    F64(Vec<f64>),
    U8(Vec<u8>),
}

impl ArrayPayload {
    pub fn dtype(&self) -> Dtype {
        match self {
            ArrayPayload::C64(_) => Dtype::C64,
            ArrayPayload::C128(_) => Dtype::C128,
            ArrayPayload::F64(_) => Dtype::F64,
            ArrayPayload::U8(_) => Dtype::U8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ArrayPayload::C64(v) => v.len(),
            ArrayPayload::C128(v) => v.len(),
            ArrayPayload::F64(v) => v.len(),
            ArrayPayload::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// In-memory image of an array file.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayFile {
    /// channels, ny, nx
    pub shape: [usize; 3],
    pub provenance: BTreeMap<String, String>,
    pub payload: ArrayPayload,
}

impl ArrayFile {
    pub fn new(
        shape: [usize; 3],
        provenance: BTreeMap<String, String>,
        payload: ArrayPayload,
    ) -> Result<Self> {
        let expected = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n > 0)
            .ok_or_else(|| {
                GslrError::InconsistentHeader(format!("bad shape {shape:?}"))
            })?;
        if payload.len() != expected {
            return Err(GslrError::InconsistentHeader(format!(
                "shape {shape:?} expects {expected} values, payload holds {}",
                payload.len()
            )));
        }
        Ok(Self {
            shape,
            provenance,
            payload,
        })
    }

    pub fn dtype(&self) -> Dtype {
        self.payload.dtype()
    }

    pub fn from_karray(x: &KArray, provenance: BTreeMap<String, String>) -> Self {
        Self {
            shape: [x.channels(), x.grid().ny(), x.grid().nx()],
            provenance,
            payload: ArrayPayload::C128(x.data().to_vec()),
        }
    }

    /// Interprets numeric payloads as a complex array; u8 payloads are not
    /// convertible (use [`ArrayFile::to_mask`]).
    pub fn to_karray(&self) -> Result<KArray> {
        let grid = KGrid::new(self.shape[2], self.shape[1])?;
        let data: Vec<Complex64> = match &self.payload {
            ArrayPayload::C128(v) => v.clone(),
            ArrayPayload::C64(v) => v
                .iter()
                .map(|c| Complex64::new(c.re as f64, c.im as f64))
                .collect(),
            ArrayPayload::F64(v) => v.iter().map(|&r| Complex64::new(r, 0.0)).collect(),
            ArrayPayload::U8(_) => {
                return Err(GslrError::UnsupportedDtype(
                    "u8 arrays hold masks, not complex data".into(),
                ))
            }
        };
        KArray::from_vec(grid, self.shape[0], data)
    }

    pub fn from_mask(mask: &Mask) -> Self {
        Self {
            shape: [1, mask.grid().ny(), mask.grid().nx()],
            provenance: mask.provenance().clone(),
            payload: ArrayPayload::U8(mask.flags().iter().map(|&b| b as u8).collect()),
        }
    }

    pub fn to_mask(&self) -> Result<Mask> {
        let ArrayPayload::U8(flags) = &self.payload else {
            return Err(GslrError::UnsupportedDtype(format!(
                "mask files are u8, got {}",
                self.dtype().as_str()
            )));
        };
        if self.shape[0] != 1 {
            return Err(GslrError::InconsistentHeader(
                "mask files are single-channel".into(),
            ));
        }
        let grid = KGrid::new(self.shape[2], self.shape[1])?;
        Mask::from_flags(
            grid,
            flags.iter().map(|&b| b != 0).collect(),
            self.provenance.clone(),
        )
    }
}

fn encode_prov_value(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b' ' | b'%' | b'=' | b'\n' | b'\r' | 0x00..=0x1f => {
                out.push('%');
                out.push_str(&format!("{b:02x}"));
            }
            _ => out.push(b as char),
        }
    }
    out
}

fn decode_prov_value(s: &str) -> Result<String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = s
                .get(i + 1..i + 3)
                .ok_or_else(|| GslrError::MalformedHeader("dangling percent escape".into()))?;
            let val = u8::from_str_radix(hex, 16)
                .map_err(|_| GslrError::MalformedHeader(format!("bad escape %{hex}")))?;
            out.push(val);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).map_err(|_| GslrError::MalformedHeader("provenance not UTF-8".into()))
}

/// Serializes an array file to bytes (header line + payload).
pub fn write_array_bytes(file: &ArrayFile) -> Vec<u8> {
    let mut header = format!(
        "{MAGIC} {VERSION} dtype={} shape={},{},{} layout=row-major",
        file.dtype().as_str(),
        file.shape[0],
        file.shape[1],
        file.shape[2]
    );
    for (k, v) in &file.provenance {
        header.push_str(&format!(" prov.{k}={}", encode_prov_value(v)));
    }
    header.push('\n');
    let mut out = header.into_bytes();
    match &file.payload {
        ArrayPayload::C64(v) => {
            for c in v {
                out.extend_from_slice(&c.re.to_le_bytes());
                out.extend_from_slice(&c.im.to_le_bytes());
            }
        }
        ArrayPayload::C128(v) => {
            for c in v {
                out.extend_from_slice(&c.re.to_le_bytes());
                out.extend_from_slice(&c.im.to_le_bytes());
            }
        }
        ArrayPayload::F64(v) => {
            for r in v {
                out.extend_from_slice(&r.to_le_bytes());
            }
        }
        ArrayPayload::U8(v) => out.extend_from_slice(v),
    }
    out
}

/// Parses an array file from bytes. Total on arbitrary input: every failure
/// is a typed error, never a panic.
pub fn read_array_bytes(bytes: &[u8]) -> Result<ArrayFile> {
    let nl = bytes
        .iter()
        .take(MAX_HEADER)
        .position(|&b| b == b'\n')
        .ok_or_else(|| GslrError::MalformedHeader("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| GslrError::MalformedHeader("header is not UTF-8".into()))?;
    let payload_bytes = &bytes[nl + 1..];

    let mut fields = header.split(' ');
    if fields.next() != Some(MAGIC) {
        return Err(GslrError::MalformedHeader("bad magic".into()));
    }
    if fields.next() != Some(VERSION) {
        return Err(GslrError::MalformedHeader("unsupported version".into()));
    }

    let mut dtype = None;
    let mut shape: Option<[usize; 3]> = None;
    let mut layout_seen = false;
    let mut provenance = BTreeMap::new();
    for field in fields {
        if field.is_empty() {
            return Err(GslrError::MalformedHeader("empty header field".into()));
        }
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| GslrError::MalformedHeader(format!("field '{field}' lacks '='")))?;
        match key {
            "dtype" => {
                if dtype.replace(Dtype::parse(value)?).is_some() {
                    return Err(GslrError::MalformedHeader("duplicate dtype".into()));
                }
            }
            "shape" => {
                let dims: Vec<usize> = value
                    .split(',')
                    .map(|d| {
                        d.parse::<usize>().map_err(|_| {
                            GslrError::MalformedHeader(format!("bad shape entry '{d}'"))
                        })
                    })
                    .collect::<Result<_>>()?;
                if dims.len() != 3 {
                    return Err(GslrError::MalformedHeader(format!(
                        "shape needs 3 dims, got {}",
                        dims.len()
                    )));
                }
                if shape.replace([dims[0], dims[1], dims[2]]).is_some() {
                    return Err(GslrError::MalformedHeader("duplicate shape".into()));
                }
            }
            "layout" => {
                if value != "row-major" {
                    return Err(GslrError::MalformedHeader(format!(
                        "unsupported layout '{value}'"
                    )));
                }
                if layout_seen {
                    return Err(GslrError::MalformedHeader("duplicate layout".into()));
                }
                layout_seen = true;
            }
            _ => {
                if let Some(pk) = key.strip_prefix("prov.") {
                    if pk.is_empty()
                        || !pk
                            .chars()
                            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                    {
                        return Err(GslrError::MalformedHeader(format!(
                            "bad provenance key '{pk}'"
                        )));
                    }
                    if provenance
                        .insert(pk.to_string(), decode_prov_value(value)?)
                        .is_some()
                    {
                        return Err(GslrError::MalformedHeader(format!(
                            "duplicate provenance key '{pk}'"
                        )));
                    }
                } else {
                    return Err(GslrError::MalformedHeader(format!(
                        "unknown header field '{key}'"
                    )));
                }
            }
        }
    }
    let dtype = dtype.ok_or_else(|| GslrError::MalformedHeader("missing dtype".into()))?;
    let shape = shape.ok_or_else(|| GslrError::MalformedHeader("missing shape".into()))?;
    if !layout_seen {
        return Err(GslrError::MalformedHeader("missing layout".into()));
    }

    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&n| n > 0 && n <= MAX_ELEMENTS)
        .ok_or_else(|| GslrError::InconsistentHeader(format!("bad shape {shape:?}")))?;
    let expected_bytes = count * dtype.size();
    if payload_bytes.len() < expected_bytes {
        return Err(GslrError::TruncatedPayload {
            expected: expected_bytes,
            got: payload_bytes.len(),
        });
    }
    if payload_bytes.len() > expected_bytes {
        return Err(GslrError::InconsistentHeader(format!(
            "payload holds {} bytes, header promises {expected_bytes}",
            payload_bytes.len()
        )));
    }

    let le_f64 = |chunk: &[u8]| f64::from_le_bytes(chunk.try_into().unwrap());
    let le_f32 = |chunk: &[u8]| f32::from_le_bytes(chunk.try_into().unwrap());
    let payload = match dtype {
        Dtype::C128 => ArrayPayload::C128(
            payload_bytes
                .chunks_exact(16)
                .map(|c| Complex64::new(le_f64(&c[..8]), le_f64(&c[8..])))
                .collect(),
        ),
        Dtype::C64 => ArrayPayload::C64(
            payload_bytes
                .chunks_exact(8)
                .map(|c| Complex32::new(le_f32(&c[..4]), le_f32(&c[4..])))
                .collect(),
        ),
        Dtype::F64 => ArrayPayload::F64(payload_bytes.chunks_exact(8).map(le_f64).collect()),
        Dtype::U8 => ArrayPayload::U8(payload_bytes.to_vec()),
    };
    ArrayFile::new(shape, provenance, payload)
}

pub fn write_array(path: &Path, file: &ArrayFile) -> Result<()> {
    let bytes = write_array_bytes(file);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_array(path: &Path) -> Result<ArrayFile> {
    let mut bytes = Vec::new();
    let mut f = std::fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            GslrError::InputNotFound(path.display().to_string())
        } else {
            GslrError::Io(e)
        }
    })?;
    f.read_to_end(&mut bytes)?;
    read_array_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::SplitMix64;

    fn sample_file(seed: u64) -> ArrayFile {
        let mut rng = SplitMix64::new(seed);
        let data: Vec<Complex64> = (0..2 * 4 * 3)
            .map(|_| Complex64::new(rng.next_normal(), rng.next_normal()))
            .collect();
        let mut prov = BTreeMap::new();
        prov.insert("generator".into(), "unit test".into());
        prov.insert("seed".into(), seed.to_string());
        ArrayFile::new([2, 4, 3], prov, ArrayPayload::C128(data)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let file = sample_file(7);
        let bytes = write_array_bytes(&file);
        let back = read_array_bytes(&bytes).unwrap();
        assert_eq!(back, file);
        assert_eq!(write_array_bytes(&back), bytes);
    }

    #[test]
    fn round_trip_preserves_nan_bits_and_special_values() {
        let vals = vec![f64::NAN, f64::INFINITY, -0.0, 1.5e-308];
        let file = ArrayFile::new([1, 1, 4], BTreeMap::new(), ArrayPayload::F64(vals)).unwrap();
        let bytes = write_array_bytes(&file);
        let back = read_array_bytes(&bytes).unwrap();
        assert_eq!(write_array_bytes(&back), bytes);
    }

    #[test]
    fn provenance_values_survive_escaping() {
        let mut prov = BTreeMap::new();
        prov.insert("note".into(), "two words = tricky %20\n".into());
        let file = ArrayFile::new([1, 1, 1], prov.clone(), ArrayPayload::U8(vec![1])).unwrap();
        let back = read_array_bytes(&write_array_bytes(&file)).unwrap();
        assert_eq!(back.provenance, prov);
    }

    #[test]
    fn truncated_payload_is_detected() {
        let bytes = write_array_bytes(&sample_file(3));
        let cut = &bytes[..bytes.len() - 5];
        assert!(matches!(
            read_array_bytes(cut),
            Err(GslrError::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn header_errors_are_distinct() {
        assert!(matches!(
            read_array_bytes(b"not-an-array v1 dtype=u8 shape=1,1,1 layout=row-major\n\x00"),
            Err(GslrError::MalformedHeader(_))
        ));
        assert!(matches!(
            read_array_bytes(b"gslr-array v1 dtype=i32 shape=1,1,1 layout=row-major\n\x00\x00\x00\x00"),
            Err(GslrError::UnsupportedDtype(_))
        ));
        // trailing bytes beyond the promised payload
        let mut bytes = write_array_bytes(&sample_file(4));
        bytes.push(0);
        assert!(matches!(
            read_array_bytes(&bytes),
            Err(GslrError::InconsistentHeader(_))
        ));
        // zero dimension
        assert!(matches!(
            read_array_bytes(b"gslr-array v1 dtype=u8 shape=0,1,1 layout=row-major\n"),
            Err(GslrError::InconsistentHeader(_))
        ));
        // missing newline entirely
        assert!(matches!(
            read_array_bytes(b"gslr-array v1 dtype=u8"),
            Err(GslrError::MalformedHeader(_))
        ));
    }

    #[test]
    fn mask_round_trip_keeps_provenance() {
        let grid = KGrid::new(8, 4).unwrap();
        let mask = crate::sampling::variable_density_mask(grid, 2.0, 3.0, 0.05, 11).unwrap();
        let file = ArrayFile::from_mask(&mask);
        let back = read_array_bytes(&write_array_bytes(&file)).unwrap();
        let mask2 = back.to_mask().unwrap();
        assert_eq!(mask, mask2);
        assert_eq!(mask2.provenance().get("generator").unwrap(), "variable-density");
    }

    #[test]
    fn karray_conversions() {
        let grid = KGrid::new(3, 2).unwrap();
        let x = KArray::from_vec(
            grid,
            1,
            (0..6).map(|i| Complex64::new(i as f64, -1.0)).collect(),
        )
        .unwrap();
        let file = ArrayFile::from_karray(&x, BTreeMap::new());
        assert_eq!(file.to_karray().unwrap(), x);
        // f64 loads as a real-valued complex array
        let real = ArrayFile::new(
            [1, 1, 3],
            BTreeMap::new(),
            ArrayPayload::F64(vec![1.0, 2.0, 3.0]),
        )
        .unwrap();
        let k = real.to_karray().unwrap();
        assert_eq!(k.channel(0)[1], Complex64::new(2.0, 0.0));
        // u8 does not convert to complex
        let mask_file =
            ArrayFile::new([1, 1, 3], BTreeMap::new(), ArrayPayload::U8(vec![1, 0, 1])).unwrap();
        assert!(mask_file.to_karray().is_err());
    }
}
