//! On-disk volume format ("cvol") and the vector-field artifact built on it.
//!
//! A cvol is a directory holding `header.json` and `data.raw`:
//!
//! ```json
//! {
//!   "dims": [t, z, y, x],            // z omitted for 2D frames
//!   "spacing_mm": [z, y, x],         // per spatial axis
//!   "dtype": "f32le",
//!   "order": "t-major, then z, y, x"
//! }
//! ```
//!
//! `data.raw` holds little-endian 32-bit floats in exactly that order.
//!
//! A field artifact is a directory holding `fields.json` plus one cvol per
//! vector component (`c0/`, `c1/`, `c2/`), components in axis order.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, VectorGrid};
use crate::scalar::Scalar;
use crate::sequence::{DisplacementFieldSequence, ImageSequence};

pub const DTYPE: &str = "f32le";
pub const ORDER: &str = "t-major, then z, y, x";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dims: Vec<usize>,
    spacing_mm: Vec<f64>,
    dtype: String,
    order: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldsHeader {
    components: usize,
    dims: Vec<usize>,
    spacing_mm: Vec<f64>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable header");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_raw_f32(path: &Path, values: impl Iterator<Item = f32>, len: usize) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut written = 0usize;
    for v in values {
        w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        written += 1;
    }
    debug_assert_eq!(written, len);
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_raw_f32(path: &Path, expected: usize) -> Result<Vec<f32>> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected * 4 {
        return Err(Error::parse(
            path,
            format!(
                "data.raw holds {} bytes, header implies {}",
                bytes.len(),
                expected * 4
            ),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Writes an image sequence as a cvol directory.
pub fn write_volume<S: Scalar>(dir: &Path, seq: &ImageSequence<S>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut dims = vec![seq.len()];
    dims.extend_from_slice(seq.dims());
    let header = Header {
        dims,
        spacing_mm: seq.spacing().to_vec(),
        dtype: DTYPE.to_string(),
        order: ORDER.to_string(),
    };
    write_json(&dir.join("header.json"), &header)?;
    let total: usize = seq.len() * seq.frames()[0].len();
    write_raw_f32(
        &dir.join("data.raw"),
        seq.frames()
            .iter()
            .flat_map(|f| f.data().iter().map(|v| v.as_f64() as f32)),
        total,
    )
}

/// Writes standalone scalar frames (e.g. a mask) as a cvol directory.
pub fn write_frames<S: Scalar>(dir: &Path, frames: &[Grid<S>], spacing: &[f64]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut dims = vec![frames.len()];
    dims.extend_from_slice(frames[0].dims());
    let header = Header {
        dims,
        spacing_mm: spacing.to_vec(),
        dtype: DTYPE.to_string(),
        order: ORDER.to_string(),
    };
    write_json(&dir.join("header.json"), &header)?;
    let total: usize = frames.len() * frames[0].len();
    write_raw_f32(
        &dir.join("data.raw"),
        frames
            .iter()
            .flat_map(|f| f.data().iter().map(|v| v.as_f64() as f32)),
        total,
    )
}

fn validate_header(path: &Path, header: &Header) -> Result<()> {
    if header.dtype != DTYPE {
        return Err(Error::parse(
            path,
            format!("dtype '{}' is not '{DTYPE}'", header.dtype),
        ));
    }
    if header.order != ORDER {
        return Err(Error::parse(
            path,
            format!("order '{}' is not '{ORDER}'", header.order),
        ));
    }
    if header.dims.len() < 3 || header.dims.len() > 4 {
        return Err(Error::parse(
            path,
            format!(
                "dims {:?} must be [t, y, x] or [t, z, y, x]",
                header.dims
            ),
        ));
    }
    if header.dims.contains(&0) {
        return Err(Error::parse(path, format!("dims {:?} contain zero", header.dims)));
    }
    if header.spacing_mm.len() != header.dims.len() - 1 {
        return Err(Error::parse(
            path,
            format!(
                "spacing_mm has {} entries for dims {:?}",
                header.spacing_mm.len(),
                header.dims
            ),
        ));
    }
    Ok(())
}

/// Reads a cvol directory into an image sequence.
pub fn read_volume<S: Scalar>(dir: &Path) -> Result<ImageSequence<S>> {
    let header_path = dir.join("header.json");
    let header: Header = read_json(&header_path)?;
    validate_header(&header_path, &header)?;
    let t = header.dims[0];
    let frame_dims = &header.dims[1..];
    let frame_len: usize = frame_dims.iter().product();
    let raw = read_raw_f32(&dir.join("data.raw"), t * frame_len)?;
    let mut frames = Vec::with_capacity(t);
    for ti in 0..t {
        let chunk = &raw[ti * frame_len..(ti + 1) * frame_len];
        let data: Vec<S> = chunk.iter().map(|&v| S::of_f64(v as f64)).collect();
        frames.push(Grid::from_vec(frame_dims, data)?);
    }
    ImageSequence::new(frames, header.spacing_mm)
}

/// Writes a displacement field sequence as a field artifact directory.
pub fn write_fields<S: Scalar>(dir: &Path, fields: &DisplacementFieldSequence<S>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let d = fields.dims().len();
    let mut dims = vec![fields.len()];
    dims.extend_from_slice(fields.dims());
    let header = FieldsHeader {
        components: d,
        dims,
        spacing_mm: fields.spacing().to_vec(),
    };
    write_json(&dir.join("fields.json"), &header)?;
    for c in 0..d {
        let frames: Vec<Grid<S>> = fields.fields().iter().map(|f| f.component(c)).collect();
        write_frames(&dir.join(format!("c{c}")), &frames, fields.spacing())?;
    }
    Ok(())
}

/// Reads a field artifact directory.
pub fn read_fields<S: Scalar>(dir: &Path) -> Result<DisplacementFieldSequence<S>> {
    let header_path = dir.join("fields.json");
    let header: FieldsHeader = read_json(&header_path)?;
    if header.dims.len() != header.components + 1 {
        return Err(Error::parse(
            &header_path,
            format!(
                "components {} inconsistent with dims {:?}",
                header.components, header.dims
            ),
        ));
    }
    let t = header.dims[0];
    let mut per_component: Vec<ImageSequence<S>> = Vec::with_capacity(header.components);
    for c in 0..header.components {
        let seq = read_volume(&dir.join(format!("c{c}")))?;
        if seq.len() != t || seq.dims() != &header.dims[1..] {
            return Err(Error::parse(
                &header_path,
                format!("component {c} dims do not match fields.json"),
            ));
        }
        per_component.push(seq);
    }
    let mut fields = Vec::with_capacity(t);
    for ti in 0..t {
        let comps: Vec<Grid<S>> = per_component.iter().map(|s| s.frame(ti).clone()).collect();
        fields.push(VectorGrid::from_components(&comps)?);
    }
    DisplacementFieldSequence::new(fields, header.spacing_mm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn temp_dir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("cvol_test_{name}_{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    fn small_sequence() -> ImageSequence<f32> {
        let a = Grid::from_vec(&[2, 3], vec![0.0f32, 0.5, 1.0, 1.5, 2.0, 2.5]).unwrap();
        let b = Grid::from_vec(&[2, 3], vec![1.0f32, 1.5, 2.0, 2.5, 3.0, 3.5]).unwrap();
        ImageSequence::new(vec![a, b], vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn volume_roundtrip_is_exact_for_f32() {
        let dir = temp_dir("roundtrip");
        let seq = small_sequence();
        write_volume(&dir, &seq).unwrap();
        let back: ImageSequence<f32> = read_volume(&dir).unwrap();
        assert_eq!(back.dims(), seq.dims());
        assert_eq!(back.spacing(), seq.spacing());
        for t in 0..2 {
            assert_eq!(back.frame(t).data(), seq.frame(t).data());
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn rewrite_is_bit_identical() {
        let dir_a = temp_dir("bits_a");
        let dir_b = temp_dir("bits_b");
        let seq = small_sequence();
        write_volume(&dir_a, &seq).unwrap();
        write_volume(&dir_b, &seq).unwrap();
        let raw_a = fs::read(dir_a.join("data.raw")).unwrap();
        let raw_b = fs::read(dir_b.join("data.raw")).unwrap();
        assert_eq!(raw_a, raw_b);
        let hdr_a = fs::read(dir_a.join("header.json")).unwrap();
        let hdr_b = fs::read(dir_b.join("header.json")).unwrap();
        assert_eq!(hdr_a, hdr_b);
        fs::remove_dir_all(&dir_a).unwrap();
        fs::remove_dir_all(&dir_b).unwrap();
    }

    #[test]
    fn missing_header_key_is_named() {
        let dir = temp_dir("badheader");
        fs::create_dir_all(&dir).unwrap();
        fs::write(
            dir.join("header.json"),
            r#"{"spacing_mm": [1.0, 1.0], "dtype": "f32le", "order": "t-major, then z, y, x"}"#,
        )
        .unwrap();
        fs::write(dir.join("data.raw"), []).unwrap();
        let err = read_volume::<f64>(&dir).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("dims"), "message should name the key: {msg}");
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn wrong_dtype_is_rejected() {
        let dir = temp_dir("dtype");
        fs::create_dir_all(&dir).unwrap();
        fs::write(
            dir.join("header.json"),
            r#"{"dims": [2, 2, 2], "spacing_mm": [1.0, 1.0], "dtype": "f64le", "order": "t-major, then z, y, x"}"#,
        )
        .unwrap();
        fs::write(dir.join("data.raw"), vec![0u8; 32]).unwrap();
        let err = read_volume::<f64>(&dir).unwrap_err();
        assert!(err.to_string().contains("dtype"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn truncated_raw_is_rejected() {
        let dir = temp_dir("short");
        let seq = small_sequence();
        write_volume(&dir, &seq).unwrap();
        let raw = fs::read(dir.join("data.raw")).unwrap();
        fs::write(dir.join("data.raw"), &raw[..raw.len() - 4]).unwrap();
        assert!(read_volume::<f32>(&dir).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn fields_roundtrip() {
        let dir = temp_dir("fields");
        let mut f0: VectorGrid<f32> = VectorGrid::zeros(&[2, 2]);
        let mut f1: VectorGrid<f32> = VectorGrid::zeros(&[2, 2]);
        f0.set_vector(0, &[1.0, -1.0, 0.0]);
        f1.set_vector(3, &[0.25, 0.75, 0.0]);
        let fields =
            DisplacementFieldSequence::new(vec![f0, f1], vec![1.0, 1.0]).unwrap();
        write_fields(&dir, &fields).unwrap();
        let back: DisplacementFieldSequence<f32> = read_fields(&dir).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.field(0), fields.field(0));
        assert_eq!(back.field(1), fields.field(1));
        fs::remove_dir_all(&dir).unwrap();
    }
}
