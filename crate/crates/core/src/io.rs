//! Flat binary layout shared by tensors, Fock vectors and dense matrices.
//!
//! Three little-endian `u64` header words followed by the entries as
//! little-endian `f64` pairs `(re, im)`:
//!
//! | kind        | header                    | entries          |
//! |-------------|---------------------------|------------------|
//! | tensor      | order, dim, field (0/1)   | `dim^order`, row-major |
//! | Fock vector | modes, n_bos, 1           | basis order      |
//! | matrix      | rows, cols, 1             | row-major        |
//!
//! Tensors carry a JSON sidecar (`<file>.json`) with ensemble and seed.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fock::{enumerate_basis, FockVector};
use crate::scalar::{Real, C};
use crate::tensor::{tensor_len, DenseTensor, Ensemble, Field};

const HEADER_BYTES: usize = 24;

fn encode(header: [u64; 3], entries: impl Iterator<Item = (f64, f64)>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES);
    for h in header {
        out.extend_from_slice(&h.to_le_bytes());
    }
    for (re, im) in entries {
        out.extend_from_slice(&re.to_le_bytes());
        out.extend_from_slice(&im.to_le_bytes());
    }
    out
}

fn decode<R: Real>(bytes: &[u8]) -> Result<([u64; 3], Vec<C<R>>)> {
    if bytes.len() < HEADER_BYTES || (bytes.len() - HEADER_BYTES) % 16 != 0 {
        return Err(Error::Serialization(format!("truncated payload of {} bytes", bytes.len())));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().expect("8 bytes"));
    let header = [word(0), word(1), word(2)];
    let entries = bytes[HEADER_BYTES..]
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C::new(R::lit(re), R::lit(im))
        })
        .collect();
    Ok((header, entries))
}

fn to_pairs<R: Real>(z: &[C<R>]) -> impl Iterator<Item = (f64, f64)> + '_ {
    z.iter().map(|c| (c.re.to_f64_lossy(), c.im.to_f64_lossy()))
}

fn as_usize(x: u64) -> Result<usize> {
    usize::try_from(x).map_err(|_| Error::Serialization(format!("header value {x} does not fit in usize")))
}

pub fn encode_tensor<R: Real>(t: &DenseTensor<R>) -> Vec<u8> {
    let flag = match t.field() {
        Field::Real => 0,
        Field::Complex => 1,
    };
    encode([t.order() as u64, t.dim() as u64, flag], to_pairs(t.data()))
}

/// Decodes a tensor; `symmetric` restores the flag normally kept in the sidecar.
pub fn decode_tensor<R: Real>(bytes: &[u8], symmetric: bool) -> Result<DenseTensor<R>> {
    let ([order, dim, flag], data) = decode::<R>(bytes)?;
    let (order, dim) = (as_usize(order)?, as_usize(dim)?);
    let field = match flag {
        0 => Field::Real,
        1 => Field::Complex,
        f => return Err(Error::Serialization(format!("unknown field flag {f}"))),
    };
    if order == 0 || dim == 0 {
        return Err(Error::Serialization("order and dimension must be positive".into()));
    }
    check_dim(tensor_len(order, dim)?, data.len())?;
    if field == Field::Real && data.iter().any(|z| z.im != R::zero()) {
        return Err(Error::Serialization("real tensor with nonzero imaginary parts".into()));
    }
    Ok(DenseTensor::raw_parts(order, dim, data, field, symmetric))
}

/// Sidecar metadata written next to a tensor file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorMeta {
    pub order: usize,
    pub dim: usize,
    pub field: Field,
    pub symmetric: bool,
    pub ensemble: Option<Ensemble>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub note: String,
}

impl TensorMeta {
    pub fn describe<R: Real>(t: &DenseTensor<R>, ensemble: Option<Ensemble>, seed: Option<u64>) -> Self {
        TensorMeta {
            order: t.order(),
            dim: t.dim(),
            field: t.field(),
            symmetric: t.is_symmetric(),
            ensemble,
            seed,
            note: String::new(),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_tensor<R: Real>(path: &Path, t: &DenseTensor<R>, meta: &TensorMeta) -> Result<()> {
    fs::write(path, encode_tensor(t))?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

/// Reads a tensor and its sidecar, if present.
pub fn read_tensor<R: Real>(path: &Path) -> Result<(DenseTensor<R>, Option<TensorMeta>)> {
    let bytes = fs::read(path)?;
    let side = sidecar_path(path);
    let meta: Option<TensorMeta> =
        if side.exists() { Some(serde_json::from_str(&fs::read_to_string(side)?)?) } else { None };
    let t = decode_tensor(&bytes, meta.as_ref().is_some_and(|m| m.symmetric))?;
    if let Some(m) = &meta {
        if m.order != t.order() || m.dim != t.dim() || m.field != t.field() {
            return Err(Error::Serialization("sidecar does not match the tensor header".into()));
        }
    }
    Ok((t, meta))
}

pub fn encode_fock<R: Real>(psi: &FockVector<R>) -> Vec<u8> {
    let b = psi.basis();
    encode([b.modes() as u64, b.n_bos() as u64, 1], to_pairs(psi.amplitudes()))
}

pub fn decode_fock<R: Real>(bytes: &[u8]) -> Result<FockVector<R>> {
    let ([modes, n_bos, _], amps) = decode::<R>(bytes)?;
    let basis = Arc::new(enumerate_basis(as_usize(modes)?, as_usize(n_bos)?)?);
    FockVector::from_amplitudes(basis, amps)
}

pub fn encode_matrix<R: Real>(m: &DMatrix<C<R>>) -> Vec<u8> {
    let entries = (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)]));
    encode(
        [m.nrows() as u64, m.ncols() as u64, 1],
        entries.map(|z| (z.re.to_f64_lossy(), z.im.to_f64_lossy())),
    )
}

pub fn decode_matrix<R: Real>(bytes: &[u8]) -> Result<DMatrix<C<R>>> {
    let ([rows, cols, _], data) = decode::<R>(bytes)?;
    let (rows, cols) = (as_usize(rows)?, as_usize(cols)?);
    check_dim(rows * cols, data.len())?;
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}
