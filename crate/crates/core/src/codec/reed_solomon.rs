//! Systematic Reed-Solomon codes over GF(256) as used by QR symbols.
//!
//! Codewords are byte strings with the highest-degree coefficient first. The
//! generator polynomial has roots alpha^0 .. alpha^(n_sym - 1). Decoding runs
//! syndromes, Berlekamp-Massey, Chien search and Forney.

use super::gf256 as gf;
use super::CodecError;

/// Maximum codeword length for GF(256).
pub const MAX_CODEWORD_LEN: usize = 255;

/// A systematic codeword: `data || parity` is a multiple of the generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codeword {
    pub data: Vec<u8>,
    pub parity: Vec<u8>,
}

impl Codeword {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() + self.parity.len());
        out.extend_from_slice(&self.data);
        out.extend_from_slice(&self.parity);
        out
    }

    pub fn n_sym(&self) -> usize {
        self.parity.len()
    }
}

/// Result of a successful decode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub data: Vec<u8>,
    /// Number of byte positions that were changed.
    pub errors_corrected: usize,
}

/// prod_{i < n_sym} (x - alpha^i), highest degree first (monic).
pub fn generator_poly(n_sym: usize) -> Vec<u8> {
    let mut g = vec![1u8];
    for i in 0..n_sym {
        g = gf::poly_mul(&g, &[1, gf::exp(i)]);
    }
    g
}

/// Appends `n_sym` parity bytes to `data`.
pub fn rs_encode(data: &[u8], n_sym: usize) -> Result<Codeword, CodecError> {
    if data.is_empty() {
        return Err(CodecError::EmptyData);
    }
    if data.len() + n_sym > MAX_CODEWORD_LEN {
        return Err(CodecError::CapacityExceeded {
            needed: data.len() + n_sym,
            available: MAX_CODEWORD_LEN,
        });
    }
    if n_sym == 0 {
        return Ok(Codeword {
            data: data.to_vec(),
            parity: Vec::new(),
        });
    }
    let gen = generator_poly(n_sym);
    // LFSR division; `rem` holds the running remainder of data * x^n_sym.
    let mut rem = vec![0u8; n_sym];
    for &d in data {
        let factor = d ^ rem[0];
        rem.rotate_left(1);
        rem[n_sym - 1] = 0;
        if factor != 0 {
            for (r, &g) in rem.iter_mut().zip(&gen[1..]) {
                *r ^= gf::mul(g, factor);
            }
        }
    }
    Ok(Codeword {
        data: data.to_vec(),
        parity: rem,
    })
}

/// S_j = c(alpha^j) for j in 0..n_sym.
pub fn syndromes(codeword: &[u8], n_sym: usize) -> Vec<u8> {
    (0..n_sym)
        .map(|j| gf::poly_eval(codeword, gf::exp(j)))
        .collect()
}

/// Corrects up to `n_sym / 2` byte errors and returns the data part.
pub fn rs_decode(codeword: &[u8], n_sym: usize) -> Result<Decoded, CodecError> {
    let n = codeword.len();
    if n > MAX_CODEWORD_LEN {
        return Err(CodecError::CapacityExceeded {
            needed: n,
            available: MAX_CODEWORD_LEN,
        });
    }
    if n_sym > n {
        return Err(CodecError::Uncorrectable);
    }
    let synd = syndromes(codeword, n_sym);
    if synd.iter().all(|&s| s == 0) {
        return Ok(Decoded {
            data: codeword[..n - n_sym].to_vec(),
            errors_corrected: 0,
        });
    }

    let locator = berlekamp_massey(&synd);
    let n_errors = locator.len() - 1;
    if n_errors == 0 || 2 * n_errors > n_sym {
        return Err(CodecError::Uncorrectable);
    }

    // Chien search. Locator is stored lowest degree first: L(x) = 1 + l1 x + ...
    // A root at alpha^(-p) marks an error at power p, i.e. byte index n - 1 - p.
    let mut positions = Vec::with_capacity(n_errors);
    for p in 0..n {
        let x_inv = gf::exp(255 - (p % 255));
        if eval_low_first(&locator, x_inv) == 0 {
            positions.push(p);
        }
    }
    if positions.len() != n_errors {
        return Err(CodecError::Uncorrectable);
    }

    // Forney with first consecutive root alpha^0:
    // e_p = X_p * Omega(X_p^-1) / Lambda'(X_p^-1)
    let omega = error_evaluator(&synd, &locator, n_sym);
    let deriv = formal_derivative(&locator);
    let mut fixed = codeword.to_vec();
    for &p in &positions {
        let x = gf::exp(p);
        let x_inv = gf::inv(x);
        let denom = eval_low_first(&deriv, x_inv);
        if denom == 0 {
            return Err(CodecError::Uncorrectable);
        }
        let magnitude = gf::mul(x, gf::div(eval_low_first(&omega, x_inv), denom));
        fixed[n - 1 - p] ^= magnitude;
    }

    if syndromes(&fixed, n_sym).iter().any(|&s| s != 0) {
        return Err(CodecError::Uncorrectable);
    }
    Ok(Decoded {
        data: fixed[..n - n_sym].to_vec(),
        errors_corrected: positions.len(),
    })
}

/// Error locator, lowest degree first, trimmed of trailing zeros.
fn berlekamp_massey(synd: &[u8]) -> Vec<u8> {
    let mut c = vec![1u8];
    let mut b = vec![1u8];
    let mut l = 0usize;
    let mut m = 1usize;
    let mut last_disc = 1u8;
    for k in 0..synd.len() {
        let mut d = synd[k];
        for i in 1..=l.min(c.len() - 1) {
            d ^= gf::mul(c[i], synd[k - i]);
        }
        if d == 0 {
            m += 1;
            continue;
        }
        let coef = gf::div(d, last_disc);
        let mut next = c.clone();
        if next.len() < b.len() + m {
            next.resize(b.len() + m, 0);
        }
        for (i, &bi) in b.iter().enumerate() {
            next[i + m] ^= gf::mul(coef, bi);
        }
        if 2 * l <= k {
            l = k + 1 - l;
            b = c;
            last_disc = d;
            m = 1;
        } else {
            m += 1;
        }
        c = next;
    }
    while c.len() > 1 && *c.last().unwrap() == 0 {
        c.pop();
    }
    if c.len() - 1 != l {
        // Degree disagrees with the linear complexity; force a failure later.
        c.resize(l + 1, 0);
    }
    c
}

/// Omega(x) = S(x) * Lambda(x) mod x^n_sym, lowest degree first.
fn error_evaluator(synd: &[u8], locator: &[u8], n_sym: usize) -> Vec<u8> {
    let mut omega = vec![0u8; n_sym];
    for (i, &s) in synd.iter().enumerate() {
        for (j, &l) in locator.iter().enumerate() {
            if i + j < n_sym {
                omega[i + j] ^= gf::mul(s, l);
            }
        }
    }
    omega
}

fn formal_derivative(p: &[u8]) -> Vec<u8> {
    // In characteristic 2 only odd-degree terms survive.
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| if i % 2 == 1 { c } else { 0 })
        .collect()
}

fn eval_low_first(p: &[u8], x: u8) -> u8 {
    p.iter().rev().fold(0u8, |acc, &c| gf::mul(acc, x) ^ c)
}
