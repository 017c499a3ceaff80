//! Binary state snapshots.
//!
//! Layout: magic `NPB1` (4 bytes); little-endian u32 version (= 1),
//! n_per_dim, N_species; little-endian f64 time; then the fields
//! c_1..c_N, u_1, u_2, u_3, T, each n^3 f64 values in x-fastest order.
//! write followed by read is the identity, bit for bit.

use npb_core::spectral::{ScalarField, VectorField};
use npb_core::SimState;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: [u8; 4] = *b"NPB1";
const VERSION: u32 = 1;

#[derive(Debug)]
pub enum SnapshotError {
    Format(String),
    Io(std::io::Error),
}

impl fmt::Display for SnapshotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnapshotError::Format(msg) => write!(f, "snapshot format error: {msg}"),
            SnapshotError::Io(e) => write!(f, "snapshot io error: {e}"),
        }
    }
}

impl std::error::Error for SnapshotError {}

impl From<std::io::Error> for SnapshotError {
    fn from(e: std::io::Error) -> Self {
        SnapshotError::Io(e)
    }
}

pub fn write_snapshot(state: &SimState, n_per_dim: usize, path: &Path) -> Result<(), SnapshotError> {
    let mut out = Vec::with_capacity(
        4 + 12 + 8 + (state.n_species() + 4) * state.temperature.len() * 8,
    );
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n_per_dim as u32).to_le_bytes());
    out.extend_from_slice(&(state.n_species() as u32).to_le_bytes());
    out.extend_from_slice(&state.time.to_le_bytes());
    let mut push_field = |f: &ScalarField| {
        for v in f.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    for c in &state.concentrations {
        push_field(c);
    }
    for j in 0..3 {
        push_field(state.velocity.component(j));
    }
    push_field(&state.temperature);
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

/// Reads a snapshot; returns the state and the grid resolution it was
/// written at.
pub fn read_snapshot(path: &Path) -> Result<(SimState, usize), SnapshotError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cursor = 0usize;

    let take = |cursor: &mut usize, len: usize| -> Result<&[u8], SnapshotError> {
        if *cursor + len > bytes.len() {
            return Err(SnapshotError::Format(format!(
                "truncated: wanted {} bytes at offset {}, file has {}",
                len,
                cursor,
                bytes.len()
            )));
        }
        let slice = &bytes[*cursor..*cursor + len];
        *cursor += len;
        Ok(slice)
    };

    if take(&mut cursor, 4)? != MAGIC {
        return Err(SnapshotError::Format("bad magic, expected NPB1".into()));
    }
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes"));
    let version = u32_at(take(&mut cursor, 4)?);
    if version != VERSION {
        return Err(SnapshotError::Format(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let n_per_dim = u32_at(take(&mut cursor, 4)?) as usize;
    let n_species = u32_at(take(&mut cursor, 4)?) as usize;
    let time = f64::from_le_bytes(take(&mut cursor, 8)?.try_into().expect("8 bytes"));

    let field_len = n_per_dim * n_per_dim * n_per_dim;
    let expected = cursor + (n_species + 4) * field_len * 8;
    if bytes.len() != expected {
        return Err(SnapshotError::Format(format!(
            "size mismatch: expected {} bytes total, found {}",
            expected,
            bytes.len()
        )));
    }

    let read_field = |cursor: &mut usize| -> Result<ScalarField, SnapshotError> {
        let raw = take(cursor, field_len * 8)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(ScalarField::from_values(values))
    };

    let mut concentrations = Vec::with_capacity(n_species);
    for _ in 0..n_species {
        concentrations.push(read_field(&mut cursor)?);
    }
    let u0 = read_field(&mut cursor)?;
    let u1 = read_field(&mut cursor)?;
    let u2 = read_field(&mut cursor)?;
    let temperature = read_field(&mut cursor)?;

    Ok((
        SimState {
            time,
            concentrations,
            velocity: VectorField::new(u0, u1, u2),
            temperature,
        },
        n_per_dim,
    ))
}
