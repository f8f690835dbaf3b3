//! Version-2 (25x25) QR symbols in byte mode.
//!
//! Version 2 has a single Reed-Solomon block at every EC level, one alignment
//! pattern centred on (18, 18) and 7 remainder bits after the codewords.

use super::matrix::{EcLevel, ModuleMatrix, QR_SIZE};
use super::reed_solomon::{rs_decode, rs_encode};
use super::CodecError;

const TOTAL_CODEWORDS: usize = 44;
const ALIGNMENT_CENTER: usize = 18;
const FORMAT_GENERATOR: u16 = 0x537;
const FORMAT_XOR_MASK: u16 = 0x5412;
const MODE_BYTE: u16 = 0b0100;

/// Parity codewords per level.
pub fn ec_codewords(level: EcLevel) -> usize {
    match level {
        EcLevel::L => 10,
        EcLevel::M => 16,
        EcLevel::Q => 22,
        EcLevel::H => 28,
    }
}

pub fn data_capacity_codewords(level: EcLevel) -> usize {
    TOTAL_CODEWORDS - ec_codewords(level)
}

/// Largest byte-mode payload: 4 mode bits + 8 length bits + 8 per byte.
pub fn byte_capacity(level: EcLevel) -> usize {
    (data_capacity_codewords(level) * 8 - 12) / 8
}

/// Outcome of reading a symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct QrDecoded {
    pub payload: Vec<u8>,
    pub ec_level: EcLevel,
    pub mask: u8,
    /// Codewords the Reed-Solomon decoder repaired.
    pub codewords_corrected: usize,
    /// Fraction of modules equal to the re-encoded ground truth.
    pub symbol_accuracy: f64,
}

impl QrDecoded {
    pub fn payload_str(&self) -> String {
        String::from_utf8_lossy(&self.payload).into_owned()
    }
}

/// Mode header, length, payload, terminator and pad codewords.
pub fn data_codewords(payload: &[u8], level: EcLevel) -> Result<Vec<u8>, CodecError> {
    let cap = byte_capacity(level);
    if payload.len() > cap {
        return Err(CodecError::PayloadTooLong {
            len: payload.len(),
            capacity: cap,
            level,
        });
    }
    let n_data = data_capacity_codewords(level);
    let mut bits = BitBuffer::default();
    bits.push(MODE_BYTE as u32, 4);
    bits.push(payload.len() as u32, 8);
    for &b in payload {
        bits.push(b as u32, 8);
    }
    let capacity_bits = n_data * 8;
    let terminator = (capacity_bits - bits.len()).min(4);
    bits.push(0, terminator);
    // Zero-fill to the next byte boundary, writing a whole zero byte when
    // already aligned (as common encoders do), before the pad codewords.
    let pad_to_byte = (8 - bits.len() % 8).min(capacity_bits - bits.len());
    bits.push(0, pad_to_byte);
    let mut out = bits.into_bytes();
    for pad in [0xEC, 0x11].iter().cycle() {
        if out.len() >= n_data {
            break;
        }
        out.push(*pad);
    }
    Ok(out)
}

/// Encodes with the mask that minimises the standard penalty score.
pub fn qr_encode(payload: &[u8], level: EcLevel) -> Result<ModuleMatrix, CodecError> {
    let (base, function) = base_symbol(payload, level)?;
    let mut best: Option<(u32, u8, ModuleMatrix)> = None;
    // Masks are scored before the format information is written, with the
    // format area (and the dark module) still light.
    for mask in 0..8u8 {
        let mut m = base.clone();
        apply_mask(&mut m, &function, mask);
        let score = penalty_score(&m);
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, mask, m));
        }
    }
    let (_, mask, mut m) = best.unwrap();
    draw_format_bits(&mut m, format_word(level, mask));
    Ok(m)
}

/// Encodes with a fixed mask pattern (0..8).
pub fn qr_encode_with_mask(
    payload: &[u8],
    level: EcLevel,
    mask: u8,
) -> Result<ModuleMatrix, CodecError> {
    assert!(mask < 8, "mask pattern out of range");
    let (base, function) = base_symbol(payload, level)?;
    Ok(apply_mask_and_format(&base, &function, level, mask))
}

fn base_symbol(payload: &[u8], level: EcLevel) -> Result<(ModuleMatrix, FunctionMap), CodecError> {
    let data = data_codewords(payload, level)?;
    let codewords = rs_encode(&data, ec_codewords(level))?.to_bytes();
    debug_assert_eq!(codewords.len(), TOTAL_CODEWORDS);
    let function = FunctionMap::new();
    let mut m = ModuleMatrix::blank();
    draw_function_patterns(&mut m);
    for ((row, col), i) in data_positions(&function).zip(0..) {
        let dark = i < codewords.len() * 8 && (codewords[i >> 3] >> (7 - (i & 7))) & 1 == 1;
        m.set(row, col, dark);
    }
    m.ec_level = Some(level);
    Ok((m, function))
}

fn apply_mask_and_format(
    base: &ModuleMatrix,
    function: &FunctionMap,
    level: EcLevel,
    mask: u8,
) -> ModuleMatrix {
    let mut m = base.clone();
    apply_mask(&mut m, function, mask);
    draw_format_bits(&mut m, format_word(level, mask));
    m
}

fn apply_mask(m: &mut ModuleMatrix, function: &FunctionMap, mask: u8) {
    for row in 0..QR_SIZE {
        for col in 0..QR_SIZE {
            if !function.is_function(row, col) && mask_bit(mask, row, col) {
                m.flip(row, col);
            }
        }
    }
}

/// Reads a 25x25 symbol back to its payload.
pub fn qr_decode(matrix: &ModuleMatrix) -> Result<QrDecoded, CodecError> {
    check_finders(matrix)?;
    let (level, mask) = read_format(matrix)?;
    let codewords = extract_codewords(matrix, mask);
    let decoded = rs_decode(&codewords, ec_codewords(level))?;
    let payload = parse_byte_segment(&decoded.data)?;

    let reference = qr_encode_with_mask(&payload, level, mask)?;
    Ok(QrDecoded {
        symbol_accuracy: matrix.agreement(&reference),
        payload,
        ec_level: level,
        mask,
        codewords_corrected: decoded.errors_corrected,
    })
}

/// Unmasks the data region and reads the 44 raw codewords in placement order.
pub fn extract_codewords(matrix: &ModuleMatrix, mask: u8) -> Vec<u8> {
    let function = FunctionMap::new();
    let mut codewords = vec![0u8; TOTAL_CODEWORDS];
    for ((row, col), i) in data_positions(&function).zip(0..) {
        if i >= TOTAL_CODEWORDS * 8 {
            break;
        }
        if matrix.get(row, col) ^ mask_bit(mask, row, col) {
            codewords[i >> 3] |= 1 << (7 - (i & 7));
        }
    }
    codewords
}

fn parse_byte_segment(data: &[u8]) -> Result<Vec<u8>, CodecError> {
    let mode = (data[0] >> 4) as u16;
    if mode != MODE_BYTE {
        return Err(CodecError::UnsupportedMode(mode as u8));
    }
    let len = (((data[0] & 0x0F) as usize) << 4) | (data[1] >> 4) as usize;
    if 2 + len > data.len() {
        return Err(CodecError::Uncorrectable);
    }
    let payload = (0..len)
        .map(|k| ((data[1 + k] & 0x0F) << 4) | (data[2 + k] >> 4))
        .collect();
    Ok(payload)
}

/// Data-region coordinates in placement order (upward/downward column pairs from the right).
fn data_positions(function: &FunctionMap) -> impl Iterator<Item = (usize, usize)> + '_ {
    let mut order = Vec::with_capacity(QR_SIZE * QR_SIZE);
    let mut right = QR_SIZE as isize - 1;
    while right >= 1 {
        if right == 6 {
            right = 5;
        }
        let upward = ((right + 1) & 2) == 0;
        for vert in 0..QR_SIZE {
            let row = if upward { QR_SIZE - 1 - vert } else { vert };
            for j in 0..2 {
                let col = (right - j) as usize;
                order.push((row, col));
            }
        }
        right -= 2;
    }
    order
        .into_iter()
        .filter(move |&(r, c)| !function.is_function(r, c))
}

fn mask_bit(mask: u8, row: usize, col: usize) -> bool {
    let (x, y) = (col, row);
    match mask {
        0 => (x + y) % 2 == 0,
        1 => y % 2 == 0,
        2 => x % 3 == 0,
        3 => (x + y) % 3 == 0,
        4 => (x / 3 + y / 2) % 2 == 0,
        5 => x * y % 2 + x * y % 3 == 0,
        6 => (x * y % 2 + x * y % 3) % 2 == 0,
        7 => ((x + y) % 2 + x * y % 3) % 2 == 0,
        _ => unreachable!(),
    }
}

/// 15-bit BCH-protected, XOR-masked format word.
fn format_word(level: EcLevel, mask: u8) -> u16 {
    let data = (level.format_bits() << 3) | mask as u16;
    let mut rem = data;
    for _ in 0..10 {
        rem = (rem << 1) ^ ((rem >> 9) * FORMAT_GENERATOR);
    }
    ((data << 10) | rem) ^ FORMAT_XOR_MASK
}

/// Module coordinates of format bit `i` for both copies.
fn format_positions(i: usize) -> [(usize, usize); 2] {
    let first = match i {
        0..=5 => (i, 8),
        6 => (7, 8),
        7 => (8, 8),
        8 => (8, 7),
        _ => (8, 14 - i),
    };
    let second = if i < 8 {
        (8, QR_SIZE - 1 - i)
    } else {
        (QR_SIZE - 15 + i, 8)
    };
    [first, second]
}

fn draw_format_bits(m: &mut ModuleMatrix, word: u16) {
    for i in 0..15 {
        let bit = (word >> i) & 1 == 1;
        for (r, c) in format_positions(i) {
            m.set(r, c, bit);
        }
    }
    // Always-dark module next to the lower-left finder.
    m.set(QR_SIZE - 8, 8, true);
}

fn read_format(m: &ModuleMatrix) -> Result<(EcLevel, u8), CodecError> {
    let mut copies = [0u16; 2];
    for i in 0..15 {
        for (k, (r, c)) in format_positions(i).into_iter().enumerate() {
            if m.get(r, c) {
                copies[k] |= 1 << i;
            }
        }
    }
    let mut best = (u32::MAX, EcLevel::M, 0u8);
    for level in EcLevel::ALL {
        for mask in 0..8u8 {
            let w = format_word(level, mask);
            let d = copies.iter().map(|c| (c ^ w).count_ones()).min().unwrap();
            if d < best.0 {
                best = (d, level, mask);
            }
        }
    }
    // Format words are at Hamming distance >= 7, so 3 errors are correctable.
    if best.0 > 3 {
        return Err(CodecError::FormatUnreadable);
    }
    Ok((best.1, best.2))
}

/// 7x7 finder: dark border, light ring, dark 3x3 core.
fn finder_template(dr: usize, dc: usize) -> bool {
    let ring = dr.min(dc).min(6 - dr).min(6 - dc);
    ring != 1
}

fn finder_origins() -> [(usize, usize); 3] {
    [(0, 0), (0, QR_SIZE - 7), (QR_SIZE - 7, 0)]
}

fn check_finders(m: &ModuleMatrix) -> Result<(), CodecError> {
    for (r0, c0) in finder_origins() {
        let wrong = (0..7)
            .flat_map(|dr| (0..7).map(move |dc| (dr, dc)))
            .filter(|&(dr, dc)| m.get(r0 + dr, c0 + dc) != finder_template(dr, dc))
            .count();
        // A quarter of the 49 modules may be damaged before we give up.
        if wrong > 12 {
            return Err(CodecError::FinderNotFound);
        }
    }
    Ok(())
}

/// Finder patterns, separators, timing and alignment patterns (no format bits).
fn draw_function_patterns(m: &mut ModuleMatrix) {
    for i in 8..QR_SIZE - 8 {
        m.set(6, i, i % 2 == 0);
        m.set(i, 6, i % 2 == 0);
    }
    for (r0, c0) in finder_origins() {
        for dr in 0..7 {
            for dc in 0..7 {
                m.set(r0 + dr, c0 + dc, finder_template(dr, dc));
            }
        }
    }
    for dr in 0..5 {
        for dc in 0..5 {
            let ring = dr.min(dc).min(4 - dr).min(4 - dc);
            m.set(
                ALIGNMENT_CENTER - 2 + dr,
                ALIGNMENT_CENTER - 2 + dc,
                ring != 1,
            );
        }
    }
}

/// Which modules are reserved for function patterns and format information.
pub struct FunctionMap {
    reserved: Vec<bool>,
}

impl FunctionMap {
    pub fn new() -> Self {
        let mut reserved = vec![false; QR_SIZE * QR_SIZE];
        let mut mark = |r: usize, c: usize| reserved[r * QR_SIZE + c] = true;
        // finders plus separators plus format strips
        for r in 0..9 {
            for c in 0..9 {
                mark(r, c);
            }
        }
        for r in 0..9 {
            for c in QR_SIZE - 8..QR_SIZE {
                mark(r, c);
            }
        }
        for r in QR_SIZE - 8..QR_SIZE {
            for c in 0..9 {
                mark(r, c);
            }
        }
        for i in 0..QR_SIZE {
            mark(6, i);
            mark(i, 6);
        }
        for r in ALIGNMENT_CENTER - 2..=ALIGNMENT_CENTER + 2 {
            for c in ALIGNMENT_CENTER - 2..=ALIGNMENT_CENTER + 2 {
                mark(r, c);
            }
        }
        FunctionMap { reserved }
    }

    pub fn is_function(&self, row: usize, col: usize) -> bool {
        self.reserved[row * QR_SIZE + col]
    }
}

impl Default for FunctionMap {
    fn default() -> Self {
        Self::new()
    }
}

/// Penalty rules N1..N4 with weights 3, 3, 40, 10; the area outside the symbol counts as light.
pub fn penalty_score(m: &ModuleMatrix) -> u32 {
    let lines: Vec<Vec<bool>> = (0..QR_SIZE)
        .map(|r| (0..QR_SIZE).map(|c| m.get(r, c)).collect())
        .chain((0..QR_SIZE).map(|c| (0..QR_SIZE).map(|r| m.get(r, c)).collect()))
        .collect();

    let mut score = 0u32;
    for line in &lines {
        // N1: runs of five or more
        let mut run = 1;
        for i in 1..=QR_SIZE {
            if i < QR_SIZE && line[i] == line[i - 1] {
                run += 1;
            } else {
                if run >= 5 {
                    score += 3 + (run - 5) as u32;
                }
                run = 1;
            }
        }
        // N3: 1011101 with four light modules on at least one side. A scored
        // match resumes the scan after it; an unscored one at its centre.
        const PATTERN: [bool; 7] = [true, false, true, true, true, false, true];
        let light = |i: isize| i < 0 || i >= QR_SIZE as isize || !line[i as usize];
        let mut start = 0;
        while start + 7 <= QR_SIZE {
            if line[start..start + 7] != PATTERN {
                start += 1;
                continue;
            }
            let s = start as isize;
            let before = (1..=4).all(|k| light(s - k));
            let after = (0..4).all(|k| light(s + 7 + k));
            if before || after {
                score += 40;
                start += 7;
            } else {
                start += 4;
            }
        }
    }
    // N2: 2x2 same-colour blocks
    for r in 0..QR_SIZE - 1 {
        for c in 0..QR_SIZE - 1 {
            let v = m.get(r, c);
            if m.get(r, c + 1) == v && m.get(r + 1, c) == v && m.get(r + 1, c + 1) == v {
                score += 3;
            }
        }
    }
    // N4: dark proportion
    let dark = m.popcount() as f64 / (QR_SIZE * QR_SIZE) as f64;
    score += 10 * ((dark * 100.0 - 50.0).abs() / 5.0).floor() as u32;
    score
}

#[derive(Default)]
struct BitBuffer {
    bits: Vec<bool>,
}

impl BitBuffer {
    fn push(&mut self, value: u32, n: usize) {
        for i in (0..n).rev() {
            self.bits.push((value >> i) & 1 == 1);
        }
    }

    fn len(&self) -> usize {
        self.bits.len()
    }

    fn into_bytes(self) -> Vec<u8> {
        self.bits
            .chunks(8)
            .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | b as u8))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacities() {
        assert_eq!(byte_capacity(EcLevel::L), 32);
        assert_eq!(byte_capacity(EcLevel::M), 26);
        assert_eq!(byte_capacity(EcLevel::Q), 20);
        assert_eq!(byte_capacity(EcLevel::H), 14);
    }

    #[test]
    fn function_map_leaves_exactly_the_data_modules() {
        let f = FunctionMap::new();
        let n = data_positions(&f).count();
        assert_eq!(n, TOTAL_CODEWORDS * 8 + 7);
    }

    #[test]
    fn format_words_are_far_apart() {
        let words: Vec<u16> = EcLevel::ALL
            .iter()
            .flat_map(|&l| (0..8).map(move |m| format_word(l, m)))
            .collect();
        for (i, a) in words.iter().enumerate() {
            for b in &words[i + 1..] {
                assert!((a ^ b).count_ones() >= 7);
            }
        }
        // Known value: level M, mask 0
        assert_eq!(format_word(EcLevel::M, 0), 0b101010000010010);
    }

    #[test]
    fn payload_too_long() {
        let long = vec![b'a'; 40];
        assert!(matches!(
            qr_encode(&long, EcLevel::L),
            Err(CodecError::PayloadTooLong { capacity: 32, .. })
        ));
        assert!(qr_encode(&[b'a'; 32], EcLevel::L).is_ok());
    }

    #[test]
    fn roundtrip_all_levels() {
        for level in EcLevel::ALL {
            let payload = &b"magnetic"[..];
            let m = qr_encode(payload, level).unwrap();
            let d = qr_decode(&m).unwrap();
            assert_eq!(d.payload, payload);
            assert_eq!(d.ec_level, level);
            assert_eq!(d.symbol_accuracy, 1.0);
            assert_eq!(d.codewords_corrected, 0);
        }
    }

    #[test]
    fn blank_matrix_has_no_finders() {
        assert_eq!(
            qr_decode(&ModuleMatrix::blank()),
            Err(CodecError::FinderNotFound)
        );
    }

    #[test]
    fn scrambled_format_is_unreadable() {
        let mut m = qr_encode(b"NV", EcLevel::L).unwrap();
        for i in 0..15 {
            for (r, c) in format_positions(i) {
                if i % 2 == 0 {
                    m.flip(r, c);
                }
            }
        }
        // Flipping every other bit of both copies pushes them out of range of any valid word.
        let r = qr_decode(&m);
        assert!(
            matches!(r, Err(CodecError::FormatUnreadable)) || r.as_ref().map(|d| d.ec_level) != Ok(EcLevel::L),
            "{r:?}"
        );
    }
}
