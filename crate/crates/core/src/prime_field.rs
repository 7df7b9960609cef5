//! Scalar arithmetic in F_p and dense polynomials over F_p.
//!
//! Residues are always kept canonical in `[0, p)`. Primes below 2^32 take a
//! single-word multiply path; larger word-size primes go through `u128`.
//! The schoolbook multipliers in this module are the reference against which
//! every fast path in the crate is checked.

use std::fmt;

use crate::error::{invalid, Error, Result};

/// A prime modulus with the constants needed for reduction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrimeContext {
    p: u64,
    /// 2^64 mod p, used to fold the high word of a `u128` accumulator.
    r64: u64,
    small: bool,
}

impl PrimeContext {
    /// Builds a context, rejecting composite moduli.
    pub fn new(p: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let r64 = ((1u128 << 64) % p as u128) as u64;
        Ok(PrimeContext {
            p,
            r64,
            small: p < (1 << 32),
        })
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    /// True when products of two residues fit in a `u64`.
    #[inline]
    pub fn is_small(&self) -> bool {
        self.small
    }

    /// `⌈log2 p⌉`.
    pub fn lg_p(&self) -> u32 {
        lg(self.p)
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        if x < self.p {
            x
        } else {
            x % self.p
        }
    }

    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        if self.small {
            let hi = (x >> 64) as u64;
            let lo = x as u64;
            if hi == 0 {
                return lo % self.p;
            }
            // hi % p < 2^32 and r64 < 2^32, so the product fits a word.
            let h = (hi % self.p) * self.r64 % self.p;
            self.add(h, lo % self.p)
        } else {
            (x % self.p as u128) as u64
        }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let (s, overflow) = a.overflowing_add(b);
        if overflow || s >= self.p {
            s.wrapping_sub(self.p)
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a.wrapping_sub(b).wrapping_add(self.p)
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        if self.small {
            a * b % self.p
        } else {
            (a as u128 * b as u128 % self.p as u128) as u64
        }
    }

    pub fn pow(&self, mut base: u64, mut e: u64) -> u64 {
        let mut acc = self.reduce(1);
        base = self.reduce(base);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; see [`fp_inv`].
    pub fn inv(&self, a: u64) -> Result<u64> {
        fp_inv(a, self)
    }

    pub(crate) fn check_same(&self, other: &PrimeContext) -> Result<()> {
        if self.p == other.p {
            Ok(())
        } else {
            Err(Error::ContextMismatch {
                left: self.p,
                right: other.p,
            })
        }
    }
}

/// `⌈log2 x⌉`, with `lg(0) = lg(1) = 0`.
pub fn lg(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Inverse of `a` modulo the context prime via the extended Euclidean algorithm.
pub fn fp_inv(a: u64, ctx: &PrimeContext) -> Result<u64> {
    let p = ctx.p();
    let a = ctx.reduce(a);
    if a == 0 {
        return Err(Error::NoInverse { value: 0, modulus: p });
    }
    let (mut r0, mut r1) = (p as i128, a as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    debug_assert_eq!(r0, 1);
    Ok(t0.rem_euclid(p as i128) as u64)
}

fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn pow_mod_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod_u64(acc, b, m);
        }
        b = mul_mod_u64(b, b, m);
        e >>= 1;
    }
    acc
}

/// Miller-Rabin with the first twelve prime bases, which is exact for all
/// 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &b in &BASES {
        if n.is_multiple_of(b) {
            return n == b;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Dense polynomial over F_p; index `i` holds the coefficient of `X^i`.
///
/// Trailing zeros are allowed and ignored by equality.
#[derive(Clone)]
pub struct FpPoly {
    ctx: PrimeContext,
    coeffs: Vec<u64>,
}

impl FpPoly {
    /// Wraps canonical residues, rejecting any coefficient `>= p`.
    pub fn new(ctx: PrimeContext, coeffs: Vec<u64>) -> Result<Self> {
        if let Some(&c) = coeffs.iter().find(|&&c| c >= ctx.p()) {
            return Err(invalid(format!(
                "coefficient {c} is not a residue modulo {}",
                ctx.p()
            )));
        }
        Ok(FpPoly { ctx, coeffs })
    }

    /// Reduces arbitrary words modulo p.
    pub fn from_unreduced(ctx: PrimeContext, coeffs: impl IntoIterator<Item = u64>) -> Self {
        FpPoly {
            ctx,
            coeffs: coeffs.into_iter().map(|c| ctx.reduce(c)).collect(),
        }
    }

    pub(crate) fn from_raw(ctx: PrimeContext, coeffs: Vec<u64>) -> Self {
        debug_assert!(coeffs.iter().all(|&c| c < ctx.p()));
        FpPoly { ctx, coeffs }
    }

    pub fn zero(ctx: PrimeContext) -> Self {
        FpPoly {
            ctx,
            coeffs: Vec::new(),
        }
    }

    pub fn one(ctx: PrimeContext) -> Self {
        FpPoly {
            ctx,
            coeffs: vec![1],
        }
    }

    /// `c · X^deg`.
    pub fn monomial(ctx: PrimeContext, deg: usize, c: u64) -> Self {
        let mut coeffs = vec![0; deg + 1];
        coeffs[deg] = ctx.reduce(c);
        FpPoly { ctx, coeffs }
    }

    #[inline]
    pub fn ctx(&self) -> &PrimeContext {
        &self.ctx
    }

    #[inline]
    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<u64> {
        self.coeffs
    }

    /// Stored length, including any trailing zeros.
    #[inline]
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest index with a nonzero coefficient; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|&c| c != 0)
    }

    pub fn is_zero(&self) -> bool {
        self.degree().is_none()
    }

    /// Number of coefficients up to and including the leading one.
    pub fn significant_len(&self) -> usize {
        self.degree().map_or(0, |d| d + 1)
    }

    pub fn trim(&mut self) {
        let len = self.significant_len();
        self.coeffs.truncate(len);
    }

    pub fn trimmed(mut self) -> Self {
        self.trim();
        self
    }

    /// Coefficient of `X^i`, zero beyond the stored length.
    pub fn coeff(&self, i: usize) -> u64 {
        self.coeffs.get(i).copied().unwrap_or(0)
    }

    /// Copy padded (or truncated) to exactly `len` coefficients.
    pub fn resized(&self, len: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(len, 0);
        FpPoly {
            ctx: self.ctx,
            coeffs,
        }
    }

    pub fn add(&self, other: &FpPoly) -> Result<FpPoly> {
        self.ctx.check_same(&other.ctx)?;
        let len = self.len().max(other.len());
        let coeffs = (0..len)
            .map(|i| self.ctx.add(self.coeff(i), other.coeff(i)))
            .collect();
        Ok(FpPoly::from_raw(self.ctx, coeffs))
    }

    pub fn sub(&self, other: &FpPoly) -> Result<FpPoly> {
        self.ctx.check_same(&other.ctx)?;
        let len = self.len().max(other.len());
        let coeffs = (0..len)
            .map(|i| self.ctx.sub(self.coeff(i), other.coeff(i)))
            .collect();
        Ok(FpPoly::from_raw(self.ctx, coeffs))
    }

    pub fn scale(&self, c: u64) -> FpPoly {
        let c = self.ctx.reduce(c);
        FpPoly::from_raw(
            self.ctx,
            self.coeffs.iter().map(|&x| self.ctx.mul(x, c)).collect(),
        )
    }

    /// Reduction modulo `X^n - 1`; the result has length exactly `n`.
    pub fn fold_cyclic(&self, n: usize) -> Result<FpPoly> {
        if n == 0 {
            return Err(invalid("cyclic length must be positive"));
        }
        Ok(FpPoly::from_raw(self.ctx, fold_cyclic_raw(&self.ctx, &self.coeffs, n)))
    }
}

impl PartialEq for FpPoly {
    fn eq(&self, other: &Self) -> bool {
        let n = self.significant_len();
        self.ctx == other.ctx
            && n == other.significant_len()
            && self.coeffs[..n] == other.coeffs[..n]
    }
}

impl Eq for FpPoly {}

impl fmt::Debug for FpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FpPoly(p={}, {:?})", self.ctx.p(), self.coeffs)
    }
}

pub(crate) fn fold_cyclic_raw(ctx: &PrimeContext, coeffs: &[u64], n: usize) -> Vec<u64> {
    let mut out = vec![0u64; n];
    for (i, &c) in coeffs.iter().enumerate() {
        let slot = &mut out[i % n];
        *slot = ctx.add(*slot, c);
    }
    out
}

/// Schoolbook product of raw coefficient slices; returns `len a + len b - 1`
/// coefficients (empty if either input is empty).
pub(crate) fn mul_naive_raw(ctx: &PrimeContext, a: &[u64], b: &[u64]) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut acc = vec![0u128; a.len() + b.len() - 1];
    if ctx.is_small() {
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (slot, &y) in acc[i..].iter_mut().zip(b) {
                *slot += (x * y) as u128;
            }
        }
    } else {
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (slot, &y) in acc[i..].iter_mut().zip(b) {
                *slot += ctx.mul(x, y) as u128;
            }
        }
    }
    acc.into_iter().map(|v| ctx.reduce_u128(v)).collect()
}

/// Exact schoolbook product, trimmed to `deg a + deg b + 1` coefficients.
pub fn poly_mul_naive(a: &FpPoly, b: &FpPoly) -> Result<FpPoly> {
    a.ctx.check_same(&b.ctx)?;
    let la = a.significant_len();
    let lb = b.significant_len();
    Ok(FpPoly::from_raw(
        a.ctx,
        mul_naive_raw(&a.ctx, &a.coeffs[..la], &b.coeffs[..lb]),
    ))
}

/// `a · b mod (X^n - 1)` by direct wrap-around accumulation; length exactly `n`.
pub fn poly_cyclic_naive(a: &FpPoly, b: &FpPoly, n: usize) -> Result<FpPoly> {
    a.ctx.check_same(&b.ctx)?;
    if n == 0 {
        return Err(invalid("cyclic length must be positive"));
    }
    let la = a.significant_len();
    let lb = b.significant_len();
    if la > n || lb > n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: la.max(lb),
        });
    }
    let ctx = a.ctx;
    let mut acc = vec![0u128; n];
    for (i, &x) in a.coeffs[..la].iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.coeffs[..lb].iter().enumerate() {
            let k = if i + j >= n { i + j - n } else { i + j };
            acc[k] += ctx.mul(x, y) as u128;
        }
    }
    Ok(FpPoly::from_raw(
        ctx,
        acc.into_iter().map(|v| ctx.reduce_u128(v)).collect(),
    ))
}
