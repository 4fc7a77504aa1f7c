//! Packed digit files.
//!
//! Layout, little-endian:
//!
//! | offset | size | field                                   |
//! |-------:|-----:|-----------------------------------------|
//! | 0      | 4    | magic `BDIG`                            |
//! | 4      | 2    | format version (1)                      |
//! | 6      | 1    | sequence family tag                     |
//! | 7      | 1    | 1 if a seed is present                  |
//! | 8      | 8    | seed (0 when absent)                    |
//! | 16     | 2    | kernel precision in limbs               |
//! | 18     | 8    | digit count N                           |
//! | 26     | 2    | base                                    |
//! | 28     | ⌈N/2⌉| digits, two per byte, first in the high nibble, 0 pad |
//! | …      | 8    | FNV-1a 64 of the payload bytes          |

use std::fs::{File, OpenOptions};
use std::hash::Hasher;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use super::{Result, StoreError};
use crate::kernel::Digit;
use crate::sources::{DigitStream, Family, SequenceKind, StreamMeta};

pub const MAGIC: [u8; 4] = *b"BDIG";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: u64 = 28;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

pub fn encode_header(meta: &StreamMeta) -> [u8; HEADER_LEN as usize] {
    let mut h = [0u8; HEADER_LEN as usize];
    h[0..4].copy_from_slice(&MAGIC);
    h[4..6].copy_from_slice(&VERSION.to_le_bytes());
    h[6] = meta.kind.family().tag();
    h[7] = meta.kind.seed().is_some() as u8;
    h[8..16].copy_from_slice(&meta.kind.seed().unwrap_or(0).to_le_bytes());
    h[16..18].copy_from_slice(&(meta.limbs as u16).to_le_bytes());
    h[18..26].copy_from_slice(&meta.count.to_le_bytes());
    h[26..28].copy_from_slice(&(meta.kind.base() as u16).to_le_bytes());
    h
}

pub fn decode_header(h: &[u8]) -> Result<StreamMeta> {
    if h.len() < HEADER_LEN as usize {
        return Err(StoreError::Truncated);
    }
    if h[0..4] != MAGIC {
        return Err(StoreError::BadMagic);
    }
    let u16_at = |i: usize| u16::from_le_bytes([h[i], h[i + 1]]);
    let u64_at = |i: usize| u64::from_le_bytes(h[i..i + 8].try_into().unwrap());
    let version = u16_at(4);
    if version != VERSION {
        return Err(StoreError::UnsupportedVersion(version));
    }
    let family = Family::from_tag(h[6])
        .ok_or_else(|| StoreError::InvalidHeader(format!("unknown sequence tag {}", h[6])))?;
    let seed = match h[7] {
        0 => None,
        1 => Some(u64_at(8)),
        f => return Err(StoreError::InvalidHeader(format!("seed flag {f}"))),
    };
    let kind = SequenceKind::new(family, seed, u16_at(26) as u32)
        .map_err(|e| StoreError::InvalidHeader(e.to_string()))?;
    Ok(StreamMeta {
        kind,
        count: u64_at(18),
        limbs: u16_at(16) as usize,
    })
}

/// Where a partially written file stands, for resuming.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriterState {
    /// Digits written, including a pending unpaired one.
    pub digits: u64,
    /// High nibble waiting for its partner.
    pub pending: Option<u8>,
    /// FNV-1a state over the complete payload bytes.
    pub checksum: u64,
}

/// Streams digits into a file whose header already states the final count.
pub struct DigitWriter<W: Write> {
    out: W,
    meta: StreamMeta,
    state: WriterState,
    hasher: FnvHasher,
    buf: Vec<u8>,
}

impl DigitWriter<BufWriter<File>> {
    pub fn create(path: &Path, meta: StreamMeta) -> Result<Self> {
        let file = File::create(path)?;
        DigitWriter::new(BufWriter::new(file), meta)
    }

    /// Reopens a partially written file and truncates anything written
    /// after the saved state.
    pub fn reopen(path: &Path, meta: StreamMeta, state: WriterState) -> Result<Self> {
        let mut file = OpenOptions::new().read(true).write(true).open(path)?;
        let mut header = [0u8; HEADER_LEN as usize];
        file.read_exact(&mut header).map_err(truncated)?;
        if decode_header(&header)? != meta {
            return Err(StoreError::InvalidHeader(
                "file header does not match the resume state".into(),
            ));
        }
        let bytes = state.digits / 2;
        if file.metadata()?.len() < HEADER_LEN + bytes {
            return Err(StoreError::Truncated);
        }
        file.set_len(HEADER_LEN + bytes)?;
        file.seek(SeekFrom::End(0))?;
        Ok(DigitWriter {
            out: BufWriter::new(file),
            meta,
            state,
            hasher: FnvHasher::with_key(state.checksum),
            buf: Vec::new(),
        })
    }
}

impl<W: Write> DigitWriter<W> {
    pub fn new(mut out: W, meta: StreamMeta) -> Result<Self> {
        out.write_all(&encode_header(&meta))?;
        Ok(DigitWriter {
            out,
            meta,
            state: WriterState {
                digits: 0,
                pending: None,
                checksum: FNV_OFFSET,
            },
            hasher: FnvHasher::with_key(FNV_OFFSET),
            buf: Vec::new(),
        })
    }

    pub fn meta(&self) -> &StreamMeta {
        &self.meta
    }

    pub fn written(&self) -> u64 {
        self.state.digits
    }

    /// The state to save for a later [`DigitWriter::reopen`]; flushes first.
    pub fn checkpoint(&mut self) -> Result<WriterState> {
        self.out.flush()?;
        Ok(self.state)
    }

    pub fn push(&mut self, digits: &[Digit]) -> Result<()> {
        if self.state.digits + digits.len() as u64 > self.meta.count {
            return Err(StoreError::InvalidHeader(format!(
                "more than the declared {} digits",
                self.meta.count
            )));
        }
        self.buf.clear();
        let mut pending = self.state.pending;
        for d in digits {
            let v = d.get();
            match pending.take() {
                Some(hi) => self.buf.push(hi << 4 | v),
                None => pending = Some(v),
            }
        }
        self.hasher.write(&self.buf);
        self.out.write_all(&self.buf)?;
        self.state.pending = pending;
        self.state.digits += digits.len() as u64;
        self.state.checksum = self.hasher.finish();
        Ok(())
    }

    /// Pads, appends the checksum and returns the inner writer.
    pub fn finish(mut self) -> Result<W> {
        if self.state.digits != self.meta.count {
            return Err(StoreError::InvalidHeader(format!(
                "wrote {} of the declared {} digits",
                self.state.digits, self.meta.count
            )));
        }
        if let Some(hi) = self.state.pending.take() {
            let b = [hi << 4];
            self.hasher.write(&b);
            self.out.write_all(&b)?;
        }
        self.out.write_all(&self.hasher.finish().to_le_bytes())?;
        self.out.flush()?;
        Ok(self.out)
    }
}

fn truncated(e: io::Error) -> StoreError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        StoreError::Truncated
    } else {
        StoreError::Io(e)
    }
}

/// Streams digits out of a file, checking the checksum at the end.
pub struct DigitReader<R: Read> {
    input: R,
    meta: StreamMeta,
    delivered: u64,
    payload_left: u64,
    pending: Option<u8>,
    hasher: FnvHasher,
    buf: Vec<u8>,
    verified: bool,
}

impl DigitReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        DigitReader::new(BufReader::with_capacity(1 << 20, File::open(path)?))
    }
}

impl<R: Read> DigitReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN as usize];
        input.read_exact(&mut header).map_err(truncated)?;
        let meta = decode_header(&header)?;
        Ok(DigitReader {
            input,
            meta,
            delivered: 0,
            payload_left: meta.count.div_ceil(2),
            pending: None,
            hasher: FnvHasher::with_key(FNV_OFFSET),
            buf: Vec::new(),
            verified: false,
        })
    }

    pub fn meta(&self) -> &StreamMeta {
        &self.meta
    }

    /// Digits delivered so far.
    pub fn position(&self) -> u64 {
        self.delivered
    }

    /// Appends up to `max` further digits to `out`; returns how many. The
    /// checksum is verified when the last payload byte has been read, so a
    /// corrupt file fails before the final digits are handed out.
    pub fn read_chunk(&mut self, out: &mut Vec<Digit>, max: usize) -> Result<usize> {
        let base = self.meta.kind.base() as u8;
        let want = (max as u64).min(self.meta.count - self.delivered);
        let mut got = 0u64;
        if want > 0 {
            if let Some(lo) = self.pending.take() {
                out.push(self.digit(lo, base)?);
                got += 1;
            }
        }
        let bytes = (want - got).div_ceil(2).min(self.payload_left);
        if bytes > 0 {
            self.buf.resize(bytes as usize, 0);
            self.input.read_exact(&mut self.buf).map_err(truncated)?;
            self.hasher.write(&self.buf);
            self.payload_left -= bytes;
            if self.payload_left == 0 {
                self.verify()?;
            }
            let buf = std::mem::take(&mut self.buf);
            for &b in &buf {
                let (hi, lo) = (b >> 4, b & 0x0f);
                out.push(self.digit(hi, base)?);
                got += 1;
                let last_digit = self.delivered + got == self.meta.count;
                if last_digit {
                    if lo != 0 {
                        return Err(StoreError::InvalidDigit {
                            index: self.meta.count + 1,
                            value: lo,
                        });
                    }
                } else if got < want {
                    out.push(self.digit(lo, base)?);
                    got += 1;
                } else {
                    self.pending = Some(lo);
                }
            }
            self.buf = buf;
        }
        self.delivered += got;
        if self.delivered == self.meta.count && !self.verified {
            self.verify()?;
        }
        Ok(got as usize)
    }

    fn digit(&self, v: u8, base: u8) -> Result<Digit> {
        if v == 0 || v >= base {
            return Err(StoreError::InvalidDigit {
                index: self.delivered + 1,
                value: v,
            });
        }
        Ok(Digit::new(v as u32, base as u32).expect("checked range"))
    }

    fn verify(&mut self) -> Result<()> {
        if self.verified {
            return Ok(());
        }
        let mut footer = [0u8; 8];
        self.input.read_exact(&mut footer).map_err(truncated)?;
        let stored = u64::from_le_bytes(footer);
        let computed = self.hasher.finish();
        if stored != computed {
            return Err(StoreError::ChecksumMismatch { stored, computed });
        }
        self.verified = true;
        Ok(())
    }
}

pub fn write_digits(stream: &DigitStream, path: &Path) -> Result<()> {
    let meta = StreamMeta {
        count: stream.digits.len() as u64,
        ..stream.meta
    };
    let mut w = DigitWriter::create(path, meta)?;
    w.push(&stream.digits)?;
    w.finish()?;
    Ok(())
}

pub fn read_digits(path: &Path) -> Result<DigitStream> {
    let mut r = DigitReader::open(path)?;
    let meta = *r.meta();
    let mut digits = Vec::with_capacity(meta.count as usize);
    while r.read_chunk(&mut digits, 1 << 24)? > 0 {}
    Ok(DigitStream { meta, digits })
}

/// Serializes a stream to bytes, as written to disk.
pub fn encode_digits(stream: &DigitStream) -> Result<Vec<u8>> {
    let meta = StreamMeta {
        count: stream.digits.len() as u64,
        ..stream.meta
    };
    let mut w = DigitWriter::new(Vec::new(), meta)?;
    w.push(&stream.digits)?;
    w.finish()
}

pub fn decode_digits(bytes: &[u8]) -> Result<DigitStream> {
    let mut r = DigitReader::new(bytes)?;
    let meta = *r.meta();
    let mut digits = Vec::with_capacity(meta.count as usize);
    while r.read_chunk(&mut digits, 1 << 24)? > 0 {}
    Ok(DigitStream { meta, digits })
}
