//! Kronecker substitution in both directions used by the multiplier:
//! polynomial to integer (the base case), and bivariate to univariate (how
//! polynomials over an extension field are pushed back down to F_p).

use num_bigint::BigUint;

use crate::error::{invalid, Error, Result};
use crate::prime_field::{fold_cyclic_raw, lg, poly_mul_naive, FpPoly, PrimeContext};

/// Anything that can multiply dense polynomials over F_p.
///
/// The bivariate substitutions are parameterised by this so that the
/// univariate product can be routed back through the top-level multiplier.
pub trait UnivariateMultiplier {
    fn multiply(&self, a: &FpPoly, b: &FpPoly) -> Result<FpPoly>;

    /// `a · b mod (X^n - 1)`, length exactly `n`.
    fn cyclic_multiply(&self, a: &FpPoly, b: &FpPoly, n: usize) -> Result<FpPoly> {
        if a.significant_len() > n || b.significant_len() > n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: a.significant_len().max(b.significant_len()),
            });
        }
        self.multiply(a, b)?.fold_cyclic(n)
    }
}

/// Quadratic reference multiplier.
#[derive(Clone, Copy, Debug, Default)]
pub struct SchoolbookMultiplier;

impl UnivariateMultiplier for SchoolbookMultiplier {
    fn multiply(&self, a: &FpPoly, b: &FpPoly) -> Result<FpPoly> {
        poly_mul_naive(a, b)
    }
}

/// Multiplier that always packs into a single big-integer product.
#[derive(Clone, Copy, Debug, Default)]
pub struct IntegerKronecker;

impl UnivariateMultiplier for IntegerKronecker {
    fn multiply(&self, a: &FpPoly, b: &FpPoly) -> Result<FpPoly> {
        ks_multiply(a, b)
    }
}

/// Unrounded slot width `2 lg p + lg n`, enough to hold any coefficient of a
/// product of two polynomials with at most `n` terms each.
pub fn min_slot_width(p: u64, n: usize) -> u32 {
    2 * lg(p) + lg(n as u64)
}

/// Slot width used by [`ks_multiply`]: the minimum rounded up to whole bytes.
pub fn slot_width(p: u64, n: usize) -> u32 {
    min_slot_width(p, n).max(1).div_ceil(8) * 8
}

/// A nonnegative integer holding `slots` fields of `slot_bits` bits each,
/// least significant field first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedInteger {
    pub value: BigUint,
    pub slot_bits: u32,
    pub slots: usize,
}

impl PackedInteger {
    /// Packs `values` (each assumed `< 2^slot_bits`) into one integer.
    pub fn pack(values: &[u64], slot_bits: u32) -> Self {
        assert!(slot_bits > 0);
        let total_bits = values.len() as u64 * slot_bits as u64;
        let mut words = vec![0u64; total_bits.div_ceil(64) as usize];
        if slot_bits.is_multiple_of(8) && slot_bits <= 64 {
            pack_bytes(values, slot_bits as usize / 8, &mut words);
        } else {
            for (i, &v) in values.iter().enumerate() {
                if v == 0 {
                    continue;
                }
                let off = i as u64 * slot_bits as u64;
                let (w, s) = ((off / 64) as usize, (off % 64) as u32);
                words[w] |= v << s;
                if s > 0 && w + 1 < words.len() {
                    words[w + 1] |= v >> (64 - s);
                }
            }
        }
        PackedInteger {
            value: words_to_biguint(&words),
            slot_bits,
            slots: values.len(),
        }
    }

    /// Reads back each slot as a little-endian word vector.
    pub fn slot_words(&self) -> Vec<Vec<u64>> {
        let words = self.value.to_u64_digits();
        (0..self.slots)
            .map(|i| read_slot(&words, i as u64 * self.slot_bits as u64, self.slot_bits))
            .collect()
    }

    /// Reads back each slot reduced modulo p.
    pub fn unpack_mod(&self, ctx: &PrimeContext) -> Vec<u64> {
        unpack_mod(&self.value, self.slot_bits, self.slots, ctx)
    }
}

fn pack_bytes(values: &[u64], bytes_per_slot: usize, words: &mut [u64]) {
    let mut buf = vec![0u8; words.len() * 8];
    for (i, &v) in values.iter().enumerate() {
        let le = v.to_le_bytes();
        let take = bytes_per_slot.min(8);
        buf[i * bytes_per_slot..i * bytes_per_slot + take].copy_from_slice(&le[..take]);
    }
    for (w, chunk) in words.iter_mut().zip(buf.chunks_exact(8)) {
        *w = u64::from_le_bytes(chunk.try_into().unwrap());
    }
}

fn words_to_biguint(words: &[u64]) -> BigUint {
    let mut digits = Vec::with_capacity(words.len() * 2);
    for &w in words {
        digits.push(w as u32);
        digits.push((w >> 32) as u32);
    }
    BigUint::new(digits)
}

fn get_bits(words: &[u64], off: u64, nbits: u32) -> u64 {
    debug_assert!(nbits <= 64 && nbits > 0);
    let (w, s) = ((off / 64) as usize, (off % 64) as u32);
    let lo = words.get(w).copied().unwrap_or(0) >> s;
    let hi = if s > 0 {
        words.get(w + 1).copied().unwrap_or(0) << (64 - s)
    } else {
        0
    };
    let v = lo | hi;
    if nbits == 64 {
        v
    } else {
        v & ((1u64 << nbits) - 1)
    }
}

fn read_slot(words: &[u64], off: u64, slot_bits: u32) -> Vec<u64> {
    let mut out = Vec::with_capacity(slot_bits.div_ceil(64) as usize);
    let mut done = 0u32;
    while done < slot_bits {
        let take = (slot_bits - done).min(64);
        out.push(get_bits(words, off + done as u64, take));
        done += take;
    }
    out
}

fn unpack_mod(value: &BigUint, slot_bits: u32, slots: usize, ctx: &PrimeContext) -> Vec<u64> {
    let words = value.to_u64_digits();
    let mut out = Vec::with_capacity(slots);
    for i in 0..slots {
        let off = i as u64 * slot_bits as u64;
        if slot_bits <= 64 {
            out.push(ctx.reduce(get_bits(&words, off, slot_bits)));
        } else {
            let parts = read_slot(&words, off, slot_bits);
            let mut r = 0u64;
            for &w in parts.iter().rev() {
                r = ctx.reduce_u128(((r as u128) << 64) | w as u128);
            }
            out.push(r);
        }
    }
    out
}

/// Product of raw coefficient slices through one big-integer multiplication.
pub(crate) fn ks_mul_raw(ctx: &PrimeContext, a: &[u64], b: &[u64], slot_bits: u32) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let pa = PackedInteger::pack(a, slot_bits);
    let pb = PackedInteger::pack(b, slot_bits);
    let prod = &pa.value * &pb.value;
    unpack_mod(&prod, slot_bits, a.len() + b.len() - 1, ctx)
}

/// Multiplies in F_p[X] by packing both operands into integers with slots of
/// [`slot_width`] bits and multiplying those.
pub fn ks_multiply(a: &FpPoly, b: &FpPoly) -> Result<FpPoly> {
    let n = a.significant_len().max(b.significant_len());
    ks_multiply_with_width(a, b, slot_width(a.ctx().p(), n))
}

/// [`ks_multiply`] with an explicit slot width, which must be at least
/// [`min_slot_width`].
pub fn ks_multiply_with_width(a: &FpPoly, b: &FpPoly, slot_bits: u32) -> Result<FpPoly> {
    a.ctx().check_same(b.ctx())?;
    let la = a.significant_len();
    let lb = b.significant_len();
    let need = min_slot_width(a.ctx().p(), la.max(lb));
    if slot_bits < need.max(1) {
        return Err(invalid(format!(
            "slot width {slot_bits} is below the required {need} bits"
        )));
    }
    let ctx = *a.ctx();
    Ok(FpPoly::from_raw(
        ctx,
        ks_mul_raw(&ctx, &a.coeffs()[..la], &b.coeffs()[..lb], slot_bits),
    ))
}

/// A cyclic product `u · v mod (X^n - 1)` with `v` and `n` fixed in advance.
pub trait PreparedCyclic: Send + Sync {
    fn cyclic_len(&self) -> usize;

    /// `u` has at most `cyclic_len()` terms; the result has exactly that many.
    fn multiply(&self, u: &[u64]) -> Result<Vec<u64>>;

    /// Recursion depth of the route taken (0 for a direct base case).
    fn depth(&self) -> usize {
        0
    }
}

/// Factory for [`PreparedCyclic`] operands; this is how short transforms
/// hand their convolutions back to a (possibly recursive) multiplier.
pub trait CyclicEngine: Send + Sync {
    fn prepare(&self, ctx: &PrimeContext, v: &[u64], n: usize) -> Result<Box<dyn PreparedCyclic>>;
}

/// Engine that always uses one big-integer product per call.
#[derive(Clone, Copy, Debug, Default)]
pub struct KroneckerEngine;

struct PreparedKronecker {
    ctx: PrimeContext,
    n: usize,
    op: PackedOperand,
}

impl PreparedCyclic for PreparedKronecker {
    fn cyclic_len(&self) -> usize {
        self.n
    }

    fn multiply(&self, u: &[u64]) -> Result<Vec<u64>> {
        if u.len() > self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: u.len(),
            });
        }
        Ok(self.op.cyclic_mul(&self.ctx, u, self.n))
    }
}

impl CyclicEngine for KroneckerEngine {
    fn prepare(&self, ctx: &PrimeContext, v: &[u64], n: usize) -> Result<Box<dyn PreparedCyclic>> {
        if n == 0 || v.len() > n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: v.len(),
            });
        }
        Ok(Box::new(PreparedKronecker {
            ctx: *ctx,
            n,
            op: PackedOperand::new(ctx, v, n),
        }))
    }
}

/// Cyclic product through integer Kronecker substitution with one operand
/// packed ahead of time.
#[derive(Clone, Debug)]
pub(crate) struct PackedOperand {
    packed: BigUint,
    len: usize,
    slot_bits: u32,
}

impl PackedOperand {
    /// Slot width is sized for cyclic length `n` so any operand of length
    /// `<= n` can be multiplied against it.
    pub(crate) fn new(ctx: &PrimeContext, v: &[u64], n: usize) -> Self {
        let slot_bits = slot_width(ctx.p(), n);
        PackedOperand {
            packed: PackedInteger::pack(v, slot_bits).value,
            len: v.len(),
            slot_bits,
        }
    }

    pub(crate) fn cyclic_mul(&self, ctx: &PrimeContext, u: &[u64], n: usize) -> Vec<u64> {
        if u.is_empty() || self.len == 0 {
            return vec![0; n];
        }
        let pu = PackedInteger::pack(u, self.slot_bits);
        let prod = &pu.value * &self.packed;
        let raw = unpack_mod(&prod, self.slot_bits, u.len() + self.len - 1, ctx);
        fold_cyclic_raw(ctx, &raw, n)
    }
}

/// Polynomial in F_p[X, Z] stored X-major: the coefficient of `X^i Z^j` lives
/// at `i * z_width + j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bivariate {
    ctx: PrimeContext,
    z_width: usize,
    coeffs: Vec<u64>,
}

impl Bivariate {
    pub fn new(ctx: PrimeContext, z_width: usize, coeffs: Vec<u64>) -> Result<Self> {
        if z_width == 0 {
            return Err(invalid("Z-width must be positive"));
        }
        if !coeffs.len().is_multiple_of(z_width) {
            return Err(Error::LengthMismatch {
                expected: coeffs.len().div_ceil(z_width) * z_width,
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|&c| c >= ctx.p()) {
            return Err(invalid("coefficient is not a canonical residue"));
        }
        Ok(Bivariate {
            ctx,
            z_width,
            coeffs,
        })
    }

    /// Builds from per-`X^i` rows, each a Z-polynomial of at most `z_width` terms.
    pub fn from_rows(ctx: PrimeContext, z_width: usize, rows: &[Vec<u64>]) -> Result<Self> {
        let mut coeffs = vec![0u64; rows.len() * z_width];
        for (i, row) in rows.iter().enumerate() {
            if row.len() > z_width {
                return Err(invalid(format!(
                    "row {i} has {} terms, wider than {z_width}",
                    row.len()
                )));
            }
            coeffs[i * z_width..i * z_width + row.len()].copy_from_slice(row);
        }
        Bivariate::new(ctx, z_width, coeffs)
    }

    pub fn zero(ctx: PrimeContext, x_len: usize, z_width: usize) -> Self {
        Bivariate {
            ctx,
            z_width,
            coeffs: vec![0; x_len * z_width],
        }
    }

    pub fn ctx(&self) -> &PrimeContext {
        &self.ctx
    }

    pub fn x_len(&self) -> usize {
        self.coeffs.len() / self.z_width
    }

    pub fn z_width(&self) -> usize {
        self.z_width
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.coeffs[i * self.z_width..(i + 1) * self.z_width]
    }

    pub fn coeff(&self, i: usize, j: usize) -> u64 {
        if j >= self.z_width || i >= self.x_len() {
            0
        } else {
            self.coeffs[i * self.z_width + j]
        }
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    /// Largest Z-degree present plus one.
    fn z_extent(&self) -> usize {
        (0..self.x_len())
            .filter_map(|i| self.row(i).iter().rposition(|&c| c != 0))
            .max()
            .map_or(0, |d| d + 1)
    }
}

/// `X -> Y^stride, Z -> Y` on flat X-major data with the given row width.
pub(crate) fn substitute(data: &[u64], width: usize, stride: usize, x_len: usize) -> Vec<u64> {
    let mut out = vec![0u64; x_len * stride];
    for (i, row) in data.chunks(width).enumerate().take(x_len) {
        out[i * stride..i * stride + width].copy_from_slice(row);
    }
    out
}

/// Splits a Y-polynomial into chunks of `stride` and keeps `width` terms of each.
pub(crate) fn split_chunks(y: &[u64], stride: usize, width: usize, x_len: usize) -> Vec<u64> {
    let mut out = vec![0u64; x_len * width];
    for i in 0..x_len {
        let start = i * stride;
        if start >= y.len() {
            break;
        }
        let end = (start + width).min(y.len());
        out[i * width..i * width + end - start].copy_from_slice(&y[start..end]);
    }
    out
}

fn check_kappa(a: &Bivariate, b: &Bivariate, kappa: usize) -> Result<()> {
    a.ctx.check_same(&b.ctx)?;
    if kappa == 0 {
        return Err(invalid("Z-degree bound must be positive"));
    }
    if a.z_extent() > kappa || b.z_extent() > kappa {
        return Err(invalid(format!("operand has Z-degree >= {kappa}")));
    }
    Ok(())
}

/// Product in F_p[X, Z] via `X -> Y^(2κ)`, one univariate multiplication and
/// a split back into chunks of width `2κ`. The result has Z-width `2κ - 1`.
pub fn ks_bivariate_multiply(
    a: &Bivariate,
    b: &Bivariate,
    kappa: usize,
    mul: &dyn UnivariateMultiplier,
) -> Result<Bivariate> {
    check_kappa(a, b, kappa)?;
    let stride = 2 * kappa;
    let width = 2 * kappa - 1;
    if a.x_len() == 0 || b.x_len() == 0 {
        return Ok(Bivariate::zero(a.ctx, 0, width));
    }
    let ya = substitute(&narrow(a, kappa), kappa.min(a.z_width), stride, a.x_len());
    let yb = substitute(&narrow(b, kappa), kappa.min(b.z_width), stride, b.x_len());
    let prod = mul.multiply(&FpPoly::from_raw(a.ctx, ya), &FpPoly::from_raw(a.ctx, yb))?;
    let x_len = a.x_len() + b.x_len() - 1;
    Ok(Bivariate {
        ctx: a.ctx,
        z_width: width,
        coeffs: split_chunks(prod.coeffs(), stride, width, x_len),
    })
}

/// Cyclic variant: multiplication in `F_p[X, Z] / (X^n - 1)` through
/// `F_p[Y] / (Y^(2nκ) - 1)`.
pub fn ks_cyclic_multiply(
    a: &Bivariate,
    b: &Bivariate,
    n: usize,
    kappa: usize,
    mul: &dyn UnivariateMultiplier,
) -> Result<Bivariate> {
    check_kappa(a, b, kappa)?;
    if n == 0 {
        return Err(invalid("cyclic length must be positive"));
    }
    if a.x_len() > n || b.x_len() > n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: a.x_len().max(b.x_len()),
        });
    }
    let stride = 2 * kappa;
    let width = 2 * kappa - 1;
    let ya = substitute(&narrow(a, kappa), kappa.min(a.z_width), stride, a.x_len());
    let yb = substitute(&narrow(b, kappa), kappa.min(b.z_width), stride, b.x_len());
    let prod = mul.cyclic_multiply(
        &FpPoly::from_raw(a.ctx, ya),
        &FpPoly::from_raw(a.ctx, yb),
        n * stride,
    )?;
    Ok(Bivariate {
        ctx: a.ctx,
        z_width: width,
        coeffs: split_chunks(prod.coeffs(), stride, width, n),
    })
}

/// Rows cut (or kept) at width `min(z_width, kappa)`; trailing columns beyond
/// `kappa` are known to be zero by `check_kappa`.
fn narrow(a: &Bivariate, kappa: usize) -> Vec<u64> {
    if a.z_width <= kappa {
        return a.coeffs.clone();
    }
    let mut out = Vec::with_capacity(a.x_len() * kappa);
    for i in 0..a.x_len() {
        out.extend_from_slice(&a.row(i)[..kappa]);
    }
    out
}
