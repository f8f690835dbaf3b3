//! GF(2^8) arithmetic over the QR reducing polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D).
//!
//! Multiplication and division go through log/antilog tables built at compile
//! time. Generator element is alpha = 2.

/// Reducing polynomial with the x^8 term.
pub const REDUCING_POLY: u16 = 0x11D;

const ORDER: usize = 255;

/// alpha^i for i in 0..510, doubled so `EXP[log a + log b]` needs no modulo.
static EXP: [u8; 512] = {
    let mut t = [0u8; 512];
    let mut v: u16 = 1;
    let mut i = 0;
    while i < 512 {
        t[i] = v as u8;
        v <<= 1;
        if v & 0x100 != 0 {
            v ^= REDUCING_POLY;
        }
        i += 1;
    }
    t
};

/// Discrete log base alpha. `LOG[0]` is unused.
static LOG: [u8; 256] = {
    let mut t = [0u8; 256];
    let mut i = 0;
    while i < ORDER {
        t[EXP[i] as usize] = i as u8;
        i += 1;
    }
    t
};

#[inline]
pub fn add(a: u8, b: u8) -> u8 {
    a ^ b
}

#[inline]
pub fn mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        0
    } else {
        EXP[LOG[a as usize] as usize + LOG[b as usize] as usize]
    }
}

/// `a / b`. Panics on division by zero.
#[inline]
pub fn div(a: u8, b: u8) -> u8 {
    assert_ne!(b, 0, "GF(256) division by zero");
    if a == 0 {
        0
    } else {
        EXP[LOG[a as usize] as usize + ORDER - LOG[b as usize] as usize]
    }
}

#[inline]
pub fn inv(a: u8) -> u8 {
    div(1, a)
}

/// alpha^n for any n (reduced mod 255).
#[inline]
pub fn exp(n: usize) -> u8 {
    EXP[n % ORDER]
}

/// log_alpha(a). Panics for a = 0.
#[inline]
pub fn log(a: u8) -> usize {
    assert_ne!(a, 0, "log of zero in GF(256)");
    LOG[a as usize] as usize
}

/// Evaluates a polynomial given highest-degree coefficient first.
pub fn poly_eval(p: &[u8], x: u8) -> u8 {
    p.iter().fold(0u8, |acc, &c| mul(acc, x) ^ c)
}

/// Product of two polynomials, highest-degree coefficient first.
pub fn poly_mul(a: &[u8], b: &[u8]) -> Vec<u8> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u8; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] ^= mul(ai, bj);
        }
    }
    out
}
