//! Chunked binary container shared by activation traces and weight checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic[4] | u32 version | u32 header_len | header[header_len] (UTF-8 JSON) | f32 values...
//! ```

use std::io::{self, Read, Write};

use thiserror::Error;

pub const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unknown format version {0}")]
    UnknownVersion(u32),
    #[error("truncated payload: {0}")]
    Truncated(&'static str),
    #[error("header is not valid UTF-8 JSON: {0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Writes the preamble (magic, version, header) and returns the bytes written.
pub fn write_preamble<W: Write>(sink: &mut W, magic: &[u8; 4], header: &[u8]) -> io::Result<u64> {
    let len = u32::try_from(header.len())
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "header exceeds u32::MAX bytes"))?;
    sink.write_all(magic)?;
    sink.write_all(&CONTAINER_VERSION.to_le_bytes())?;
    sink.write_all(&len.to_le_bytes())?;
    sink.write_all(header)?;
    Ok(12 + header.len() as u64)
}

/// Writes `values` as little-endian f32 in chunks, feeding each chunk to `crc`.
pub fn write_values<W: Write>(
    sink: &mut W,
    values: &[f32],
    crc: &mut crc32fast::Hasher,
) -> io::Result<u64> {
    let mut buf = Vec::with_capacity(4 * values.len().min(4096));
    for chunk in values.chunks(4096) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        crc.update(&buf);
        sink.write_all(&buf)?;
    }
    Ok(4 * values.len() as u64)
}

/// Reads exactly `buf.len()` bytes, mapping a short read to `Truncated(what)`.
pub fn read_exact_or<R: Read>(
    source: &mut R,
    buf: &mut [u8],
    what: &'static str,
) -> Result<(), ContainerError> {
    source.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            ContainerError::Truncated(what)
        } else {
            ContainerError::Io(e)
        }
    })
}

/// Reads magic, version and header bytes.
pub fn read_preamble<R: Read>(source: &mut R, magic: &[u8; 4]) -> Result<Vec<u8>, ContainerError> {
    let mut found = [0u8; 4];
    read_exact_or(source, &mut found, "magic")?;
    if &found != magic {
        return Err(ContainerError::BadMagic {
            expected: *magic,
            found,
        });
    }
    let mut word = [0u8; 4];
    read_exact_or(source, &mut word, "version")?;
    let version = u32::from_le_bytes(word);
    if version != CONTAINER_VERSION {
        return Err(ContainerError::UnknownVersion(version));
    }
    read_exact_or(source, &mut word, "header length")?;
    let len = u32::from_le_bytes(word) as usize;
    let mut header = vec![0u8; len];
    read_exact_or(source, &mut header, "header")?;
    Ok(header)
}

/// Reads `count` f32 values into `out`, feeding the raw bytes to `crc`.
pub fn read_values<R: Read>(
    source: &mut R,
    out: &mut Vec<f32>,
    count: usize,
    crc: &mut crc32fast::Hasher,
) -> Result<(), ContainerError> {
    let mut remaining = count;
    let mut buf = vec![0u8; 4 * count.min(4096)];
    out.reserve(count);
    while remaining > 0 {
        let n = remaining.min(4096);
        let bytes = &mut buf[..4 * n];
        read_exact_or(source, bytes, "values")?;
        crc.update(bytes);
        out.extend(
            bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
        );
        remaining -= n;
    }
    Ok(())
}

/// Returns true when the source has at least one more byte.
pub fn has_trailing<R: Read>(source: &mut R) -> io::Result<bool> {
    let mut one = [0u8; 1];
    loop {
        match source.read(&mut one) {
            Ok(0) => return Ok(false),
            Ok(_) => return Ok(true),
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
}
