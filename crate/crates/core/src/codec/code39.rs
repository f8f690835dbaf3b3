//! Magnetic Code 39.
//!
//! Each character is 9 elements (5 bars, 4 spaces) with exactly three wide
//! elements. Bars are the magnetic (Ni) elements and spaces are non-magnetic
//! (Au), so the footprint of a symbol is a solid strip whatever the payload.
//! `*` is the start/stop delimiter and never appears inside a payload.

use std::fmt;
use std::str::FromStr;

use super::CodecError;

/// Elements per character block.
pub const BLOCK_LEN: usize = 9;
/// Start/stop character.
pub const DELIMITER: char = '*';

/// Standard Code 39 widths, bar/space alternating from a bar; `2` marks a wide element.
const TABLE: &[(char, &str)] = &[
    ('0', "111221211"),
    ('1', "211211112"),
    ('2', "112211112"),
    ('3', "212211111"),
    ('4', "111221112"),
    ('5', "211221111"),
    ('6', "112221111"),
    ('7', "111211212"),
    ('8', "211211211"),
    ('9', "112211211"),
    ('A', "211112112"),
    ('B', "112112112"),
    ('C', "212112111"),
    ('D', "111122112"),
    ('E', "211122111"),
    ('F', "112122111"),
    ('G', "111112212"),
    ('H', "211112211"),
    ('I', "112112211"),
    ('J', "111122211"),
    ('K', "211111122"),
    ('L', "112111122"),
    ('M', "212111121"),
    ('N', "111121122"),
    ('O', "211121121"),
    ('P', "112121121"),
    ('Q', "111111222"),
    ('R', "211111221"),
    ('S', "112111221"),
    ('T', "111121221"),
    ('U', "221111112"),
    ('V', "122111112"),
    ('W', "222111111"),
    ('X', "121121112"),
    ('Y', "221121111"),
    ('Z', "122121111"),
    (' ', "122111211"),
    ('*', "121121211"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Bar,
    Space,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Width {
    Narrow,
    Wide,
}

impl Width {
    /// Width in narrow units.
    pub fn units(self) -> u32 {
        match self {
            Width::Narrow => 1,
            Width::Wide => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Element {
    pub role: Role,
    pub width: Width,
    pub magnetic: bool,
}

impl Element {
    pub fn bar(width: Width) -> Self {
        Element {
            role: Role::Bar,
            width,
            magnetic: true,
        }
    }

    pub fn space(width: Width) -> Self {
        Element {
            role: Role::Space,
            width,
            magnetic: false,
        }
    }

    fn default_magnetic(role: Role) -> bool {
        role == Role::Bar
    }
}

/// A full barcode: character blocks separated by narrow inter-character spaces.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ElementSequence {
    pub elements: Vec<Element>,
}

impl ElementSequence {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Total width in narrow units, gaps included.
    pub fn total_units(&self) -> u32 {
        self.elements.iter().map(|e| e.width.units()).sum()
    }
}

impl fmt::Display for ElementSequence {
    /// `B2 S1 B1 ...`; a `:Au` / `:Ni` suffix marks a non-default material.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.elements.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            let role = match e.role {
                Role::Bar => 'B',
                Role::Space => 'S',
            };
            write!(f, "{role}{}", e.width.units())?;
            if e.magnetic != Element::default_magnetic(e.role) {
                f.write_str(if e.magnetic { ":Ni" } else { ":Au" })?;
            }
        }
        Ok(())
    }
}

impl FromStr for ElementSequence {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |tok: &str| CodecError::MalformedSequence(format!("bad token {tok:?}"));
        let mut elements = Vec::new();
        for tok in s.split_whitespace() {
            let (head, material) = match tok.split_once(':') {
                Some((h, m)) => (h, Some(m)),
                None => (tok, None),
            };
            let mut chars = head.chars();
            let role = match chars.next() {
                Some('B') => Role::Bar,
                Some('S') => Role::Space,
                _ => return Err(bad(tok)),
            };
            let width = match chars.as_str() {
                "1" => Width::Narrow,
                "2" => Width::Wide,
                _ => return Err(bad(tok)),
            };
            let magnetic = match material {
                None => Element::default_magnetic(role),
                Some("Ni") => true,
                Some("Au") => false,
                Some(_) => return Err(bad(tok)),
            };
            elements.push(Element {
                role,
                width,
                magnetic,
            });
        }
        Ok(ElementSequence { elements })
    }
}

fn pattern_for(c: char) -> Option<&'static str> {
    TABLE.iter().find(|(k, _)| *k == c).map(|(_, p)| *p)
}

fn block_for(pattern: &str) -> impl Iterator<Item = Element> + '_ {
    pattern.bytes().enumerate().map(|(i, b)| {
        let width = if b == b'2' { Width::Wide } else { Width::Narrow };
        if i % 2 == 0 {
            Element::bar(width)
        } else {
            Element::space(width)
        }
    })
}

/// Characters accepted in a payload.
pub fn supported_chars() -> impl Iterator<Item = char> {
    TABLE.iter().map(|(c, _)| *c).filter(|&c| c != DELIMITER)
}

pub fn code39_encode(text: &str) -> Result<ElementSequence, CodecError> {
    let mut patterns = Vec::with_capacity(text.len() + 2);
    patterns.push(pattern_for(DELIMITER).unwrap());
    for c in text.chars() {
        if c == DELIMITER {
            return Err(CodecError::UnsupportedCharacter(c));
        }
        patterns.push(pattern_for(c).ok_or(CodecError::UnsupportedCharacter(c))?);
    }
    patterns.push(pattern_for(DELIMITER).unwrap());

    let mut elements = Vec::with_capacity(patterns.len() * (BLOCK_LEN + 1));
    for (i, p) in patterns.iter().enumerate() {
        if i > 0 {
            elements.push(Element::space(Width::Narrow));
        }
        elements.extend(block_for(p));
    }
    Ok(ElementSequence { elements })
}

pub fn code39_decode(seq: &ElementSequence) -> Result<String, CodecError> {
    let els = &seq.elements;
    // n blocks of 9 plus n - 1 gaps
    if els.len() < 2 * BLOCK_LEN + 1 || !(els.len() + 1).is_multiple_of(BLOCK_LEN + 1) {
        return Err(CodecError::MalformedSequence(format!(
            "{} elements is not a whole number of blocks",
            els.len()
        )));
    }
    for pair in els.windows(2) {
        if pair[0].role == pair[1].role {
            return Err(CodecError::MalformedSequence(
                "adjacent elements share a role".into(),
            ));
        }
    }
    if els[0].role != Role::Bar {
        return Err(CodecError::MalformedSequence(
            "sequence must start with a bar".into(),
        ));
    }

    let n_blocks = (els.len() + 1) / (BLOCK_LEN + 1);
    let mut chars = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let start = b * (BLOCK_LEN + 1);
        if b > 0 && els[start - 1].width != Width::Narrow {
            return Err(CodecError::MalformedSequence(
                "inter-character gap must be narrow".into(),
            ));
        }
        let block = &els[start..start + BLOCK_LEN];
        let wide = block.iter().filter(|e| e.width == Width::Wide).count();
        if wide != 3 {
            return Err(CodecError::MalformedSequence(format!(
                "block {b} has {wide} wide elements"
            )));
        }
        let key: String = block
            .iter()
            .map(|e| if e.width == Width::Wide { '2' } else { '1' })
            .collect();
        let c = TABLE
            .iter()
            .find(|(_, p)| *p == key)
            .map(|(c, _)| *c)
            .ok_or(CodecError::UnknownBlock(key))?;
        chars.push(c);
    }

    if chars[0] != DELIMITER || chars[n_blocks - 1] != DELIMITER {
        return Err(CodecError::MalformedSequence("missing delimiter".into()));
    }
    let inner = &chars[1..n_blocks - 1];
    if inner.contains(&DELIMITER) {
        return Err(CodecError::MalformedSequence(
            "delimiter inside payload".into(),
        ));
    }
    Ok(inner.iter().collect())
}
