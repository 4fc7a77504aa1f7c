//! Digit files, resume state and report output.

mod digits;
mod report;

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sources::{GeneratorCheckpoint, StreamMeta};
use crate::stats::StatsState;

pub use digits::{
    decode_digits, decode_header, encode_digits, encode_header, read_digits, write_digits,
    DigitReader, DigitWriter, WriterState, HEADER_LEN, MAGIC, VERSION,
};
pub use report::{build_report, emit_report, Cell, Format, Report, ReportKind};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("not a digit file (bad magic)")]
    BadMagic,
    #[error("unsupported digit file version {0}")]
    UnsupportedVersion(u16),
    #[error("file is truncated")]
    Truncated,
    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error("invalid digit {value} at index {index}")]
    InvalidDigit { index: u64, value: u8 },
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("invalid resume state: {0}")]
    InvalidResume(String),
    #[error("report: {0}")]
    Report(String),
}

pub type Result<T> = std::result::Result<T, StoreError>;

/// Everything needed to continue an interrupted `generate`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResumeState {
    /// The run being produced, with its final count.
    pub meta: StreamMeta,
    pub generator: GeneratorCheckpoint,
    pub file: WriterState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<StatsState>,
}

impl ResumeState {
    pub fn validate(&self) -> Result<()> {
        let g = &self.generator;
        if g.kind != self.meta.kind || g.limbs != self.meta.limbs {
            return Err(StoreError::InvalidResume(
                "generator and stream parameters differ".into(),
            ));
        }
        if g.position != self.file.digits || g.position > self.meta.count {
            return Err(StoreError::InvalidResume(format!(
                "generator at {}, file at {} of {}",
                g.position, self.file.digits, self.meta.count
            )));
        }
        if (self.file.digits % 2 == 1) != self.file.pending.is_some() {
            return Err(StoreError::InvalidResume("pending nibble mismatch".into()));
        }
        if let Some(s) = &self.stats {
            if s.start() != 1 || s.len() != g.position || s.base() != self.meta.kind.base() {
                return Err(StoreError::InvalidResume(
                    "statistics do not cover the written digits".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ResumeState> {
        let text = fs::read_to_string(path)?;
        let state: ResumeState =
            serde_json::from_str(&text).map_err(|e| StoreError::InvalidResume(e.to_string()))?;
        state.validate()?;
        Ok(state)
    }

    /// Writes atomically through a temporary file in the same directory.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text =
            serde_json::to_string(self).map_err(|e| StoreError::InvalidResume(e.to_string()))?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, text)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}
