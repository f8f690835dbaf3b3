//! Symbol encoders: Reed-Solomon over GF(256), Code 39 and version-2 QR.

pub mod code39;
pub mod gf256;
pub mod matrix;
pub mod qr;
pub mod reed_solomon;

use thiserror::Error;

pub use code39::{code39_decode, code39_encode, Element, ElementSequence, Role, Width};
pub use matrix::{EcLevel, ModuleMatrix, QR_SIZE};
pub use qr::{qr_decode, qr_encode, qr_encode_with_mask, QrDecoded};
pub use reed_solomon::{rs_decode, rs_encode, Codeword, Decoded};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("character {0:?} cannot be encoded")]
    UnsupportedCharacter(char),
    #[error("malformed element sequence: {0}")]
    MalformedSequence(String),
    #[error("block {0} is not in the character table")]
    UnknownBlock(String),
    #[error("no data to encode")]
    EmptyData,
    #[error("codeword needs {needed} bytes but only {available} fit")]
    CapacityExceeded { needed: usize, available: usize },
    #[error("too many errors to correct")]
    Uncorrectable,
    #[error("finder patterns not found")]
    FinderNotFound,
    #[error("format information unreadable")]
    FormatUnreadable,
    #[error("payload of {len} bytes exceeds capacity {capacity} at level {level}")]
    PayloadTooLong {
        len: usize,
        capacity: usize,
        level: EcLevel,
    },
    #[error("unsupported segment mode {0:#06b}")]
    UnsupportedMode(u8),
    #[error("matrix must be 25x25 (got {0} rows)")]
    BadMatrixSize(usize),
    #[error("cannot parse grid: {0}")]
    ParseGrid(String),
}
