//! Binary activation traces.
//!
//! A trace holds the post-activation FFN values recorded while a model produced
//! its response to one question, indexed `[token][layer][neuron]`. Only response
//! tokens are stored; dumpers for external runtimes must drop prompt positions.
//!
//! File layout (little-endian):
//!
//! ```text
//! "NTRC" | u32 version = 1 | u32 header_len | header JSON | f32 values
//! ```

mod manifest;

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::container::{self, ContainerError};

pub use manifest::{validate_manifest, ManifestEntry, ManifestError, ManifestViolation, TraceManifest};

pub const TRACE_MAGIC: [u8; 4] = *b"NTRC";
pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("bad magic: expected \"NTRC\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unknown trace format version {0}")]
    UnknownVersion(u32),
    #[error("truncated payload while reading {0}")]
    Truncated(&'static str),
    #[error("value count mismatch: header implies {expected} values, {extra_bytes} trailing bytes follow")]
    CountMismatch { expected: usize, extra_bytes: u64 },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("invalid trace: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<ContainerError> for TraceError {
    fn from(err: ContainerError) -> Self {
        match err {
            ContainerError::BadMagic { found, .. } => TraceError::BadMagic(found),
            ContainerError::UnknownVersion(v) => TraceError::UnknownVersion(v),
            ContainerError::Truncated(what) => TraceError::Truncated(what),
            ContainerError::Header(msg) => TraceError::Header(msg),
            ContainerError::Io(e) => TraceError::Io(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format_version: u32,
    pub model_id: String,
    pub num_layers: usize,
    pub ffn_width: usize,
    pub question_id: String,
    pub language: String,
    pub culture: String,
    pub num_response_tokens: usize,
}

impl TraceHeader {
    /// Number of f32 values the header implies, or `None` on overflow.
    pub fn value_count(&self) -> Option<usize> {
        self.num_response_tokens
            .checked_mul(self.num_layers)?
            .checked_mul(self.ffn_width)
    }

    fn validate(&self) -> Result<usize, TraceError> {
        if self.format_version != TRACE_FORMAT_VERSION {
            return Err(TraceError::UnknownVersion(self.format_version));
        }
        if self.num_layers == 0 || self.ffn_width == 0 {
            return Err(TraceError::Validation(format!(
                "num_layers ({}) and ffn_width ({}) must be at least 1",
                self.num_layers, self.ffn_width
            )));
        }
        if self.question_id.is_empty() {
            return Err(TraceError::Validation("question_id is empty".into()));
        }
        self.value_count()
            .ok_or_else(|| TraceError::Validation("value count overflows usize".into()))
    }
}

/// Activations for one question, dense `[token][layer][neuron]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    header: TraceHeader,
    values: Vec<f32>,
}

impl ActivationTrace {
    pub fn new(header: TraceHeader, values: Vec<f32>) -> Result<Self, TraceError> {
        let trace = Self { header, values };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let expected = self.header.validate()?;
        if self.values.len() != expected {
            return Err(TraceError::Validation(format!(
                "expected {expected} values, got {}",
                self.values.len()
            )));
        }
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            let dm = self.header.ffn_width;
            let per_token = dm * self.header.num_layers;
            return Err(TraceError::Validation(format!(
                "non-finite value at token {}, layer {}, neuron {}",
                pos / per_token,
                (pos % per_token) / dm,
                pos % dm
            )));
        }
        Ok(())
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn num_tokens(&self) -> usize {
        self.header.num_response_tokens
    }

    pub fn num_layers(&self) -> usize {
        self.header.num_layers
    }

    pub fn ffn_width(&self) -> usize {
        self.header.ffn_width
    }

    /// The `ffn_width` activations of `layer` at response token `token`.
    pub fn row(&self, token: usize, layer: usize) -> &[f32] {
        let dm = self.header.ffn_width;
        let start = (token * self.header.num_layers + layer) * dm;
        &self.values[start..start + dm]
    }

    pub fn value(&self, token: usize, layer: usize, neuron: usize) -> f32 {
        self.row(token, layer)[neuron]
    }

    pub fn into_parts(self) -> (TraceHeader, Vec<f32>) {
        (self.header, self.values)
    }
}

/// CRC-32 of the little-endian value block.
pub fn value_checksum(trace: &ActivationTrace) -> u32 {
    let mut crc = crc32fast::Hasher::new();
    for v in trace.values() {
        crc.update(&v.to_le_bytes());
    }
    crc.finalize()
}

/// Serializes `trace`. Validation happens before the first byte is written.
pub fn write_trace<W: Write>(trace: &ActivationTrace, sink: &mut W) -> Result<u64, TraceError> {
    trace.validate()?;
    let header =
        serde_json::to_vec(&trace.header).map_err(|e| TraceError::Header(e.to_string()))?;
    let mut written = container::write_preamble(sink, &TRACE_MAGIC, &header)?;
    let mut crc = crc32fast::Hasher::new();
    written += container::write_values(sink, &trace.values, &mut crc)?;
    Ok(written)
}

/// Reads a whole trace and checks that no bytes follow the value block.
pub fn read_trace<R: Read>(source: &mut R) -> Result<ActivationTrace, TraceError> {
    let header = read_header(source)?;
    let count = header.validate()?;
    let mut values = Vec::new();
    let mut crc = crc32fast::Hasher::new();
    container::read_values(source, &mut values, count, &mut crc)?;
    check_trailing(source, count)?;
    ActivationTrace::new(header, values)
}

fn read_header<R: Read>(source: &mut R) -> Result<TraceHeader, TraceError> {
    let bytes = container::read_preamble(source, &TRACE_MAGIC)?;
    serde_json::from_slice(&bytes).map_err(|e| TraceError::Header(e.to_string()))
}

fn check_trailing<R: Read>(source: &mut R, expected: usize) -> Result<(), TraceError> {
    if container::has_trailing(source)? {
        let extra = 1 + io::copy(source, &mut io::sink())?;
        return Err(TraceError::CountMismatch {
            expected,
            extra_bytes: extra,
        });
    }
    Ok(())
}

/// Streaming reader that holds a single `ffn_width` row in memory at a time.
pub struct TraceReader<R: Read> {
    source: R,
    header: TraceHeader,
    row: Vec<f32>,
    next_index: usize,
    total_rows: usize,
    crc: crc32fast::Hasher,
    finished: bool,
}

impl<R: Read> TraceReader<R> {
    pub fn new(mut source: R) -> Result<Self, TraceError> {
        let header = read_header(&mut source)?;
        header.validate()?;
        let total_rows = header.num_response_tokens * header.num_layers;
        Ok(Self {
            row: Vec::with_capacity(header.ffn_width),
            source,
            header,
            next_index: 0,
            total_rows,
            crc: crc32fast::Hasher::new(),
            finished: false,
        })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    /// Yields `(token, layer, values)` rows in file order.
    pub fn next_row(&mut self) -> Result<Option<(usize, usize, &[f32])>, TraceError> {
        if self.next_index == self.total_rows {
            if !self.finished {
                let expected = self.total_rows * self.header.ffn_width;
                check_trailing(&mut self.source, expected)?;
                self.finished = true;
            }
            return Ok(None);
        }
        self.row.clear();
        container::read_values(
            &mut self.source,
            &mut self.row,
            self.header.ffn_width,
            &mut self.crc,
        )?;
        if let Some(pos) = self.row.iter().position(|v| !v.is_finite()) {
            return Err(TraceError::Validation(format!(
                "non-finite value in row {} at neuron {pos}",
                self.next_index
            )));
        }
        let index = self.next_index;
        self.next_index += 1;
        let layers = self.header.num_layers;
        Ok(Some((index / layers, index % layers, &self.row)))
    }

    /// Drains the remaining rows and returns the CRC-32 of the value block.
    pub fn finish(mut self) -> Result<u32, TraceError> {
        while self.next_row()?.is_some() {}
        Ok(self.crc.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(tokens: usize, layers: usize, width: usize) -> TraceHeader {
        TraceHeader {
            format_version: TRACE_FORMAT_VERSION,
            model_id: "tiny".into(),
            num_layers: layers,
            ffn_width: width,
            question_id: "q1".into(),
            language: "en".into(),
            culture: "US".into(),
            num_response_tokens: tokens,
        }
    }

    fn encode(trace: &ActivationTrace) -> Vec<u8> {
        let mut buf = Vec::new();
        write_trace(trace, &mut buf).unwrap();
        buf
    }

    #[test]
    fn smallest_trace_layout() {
        let trace = ActivationTrace::new(header(1, 1, 2), vec![0.5, -0.25]).unwrap();
        let mut buf = Vec::new();
        let n = write_trace(&trace, &mut buf).unwrap();
        assert_eq!(n as usize, buf.len());
        assert_eq!(&buf[..4], b"NTRC");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        let hlen = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
        assert_eq!(buf.len(), 12 + hlen + 8);
        let tail = &buf[12 + hlen..];
        assert_eq!(&tail[..4], &0.5f32.to_le_bytes());
        assert_eq!(&tail[4..], &(-0.25f32).to_le_bytes());
    }

    #[test]
    fn empty_response_round_trips() {
        let trace = ActivationTrace::new(header(0, 3, 4), vec![]).unwrap();
        let buf = encode(&trace);
        let hlen = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
        assert_eq!(buf.len(), 12 + hlen);
        assert_eq!(read_trace(&mut buf.as_slice()).unwrap(), trace);
    }

    #[test]
    fn nan_is_rejected_before_writing() {
        let trace = ActivationTrace {
            header: header(1, 1, 2),
            values: vec![f32::NAN, 1.0],
        };
        let mut buf = Vec::new();
        assert!(matches!(
            write_trace(&trace, &mut buf),
            Err(TraceError::Validation(_))
        ));
        assert!(buf.is_empty());
    }

    #[test]
    fn corrupted_files_give_distinct_errors() {
        let trace = ActivationTrace::new(header(2, 1, 3), vec![1.0; 6]).unwrap();
        let good = encode(&trace);

        let mut bad_magic = good.clone();
        bad_magic[..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            read_trace(&mut bad_magic.as_slice()),
            Err(TraceError::BadMagic(m)) if &m == b"XXXX"
        ));

        let truncated = &good[..good.len() - 5];
        assert!(matches!(
            read_trace(&mut &truncated[..]),
            Err(TraceError::Truncated("values"))
        ));

        let mut version = good.clone();
        version[4..8].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            read_trace(&mut version.as_slice()),
            Err(TraceError::UnknownVersion(7))
        ));

        let mut extra = good.clone();
        extra.extend_from_slice(&[0u8; 4]);
        assert!(matches!(
            read_trace(&mut extra.as_slice()),
            Err(TraceError::CountMismatch { expected: 6, extra_bytes: 4 })
        ));
    }

    #[test]
    fn streaming_rows_follow_index_order() {
        let values: Vec<f32> = (0..2 * 3 * 4).map(|v| v as f32).collect();
        let trace = ActivationTrace::new(header(2, 3, 4), values).unwrap();
        let buf = encode(&trace);
        let mut reader = TraceReader::new(buf.as_slice()).unwrap();
        let mut seen = 0;
        while let Some((t, l, row)) = reader.next_row().unwrap() {
            assert_eq!(row, trace.row(t, l));
            seen += 1;
        }
        assert_eq!(seen, 6);
        let reader = TraceReader::new(buf.as_slice()).unwrap();
        assert_eq!(reader.finish().unwrap(), value_checksum(&trace));
    }
}
