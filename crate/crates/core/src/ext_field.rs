//! Arithmetic in F_{p^κ} = F_p[Z]/P.
//!
//! Elements are dense residues of length exactly κ. Multiplication below the
//! Kronecker threshold is schoolbook followed by a table reduction
//! (`Z^{κ+t} mod P` precomputed); above it, the product goes through an
//! integer Kronecker substitution and the reduction through the Newton
//! inverse of the reversed modulus.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigUint;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::kronecker::{
    ks_bivariate_multiply, ks_mul_raw, slot_width, Bivariate, IntegerKronecker,
    UnivariateMultiplier,
};
use crate::prime_field::{mul_naive_raw, FpPoly, PrimeContext};

/// Extension degree at and above which products use Kronecker substitution.
pub const DEFAULT_KRONECKER_THRESHOLD: usize = 32;

static NEXT_FIELD_ID: AtomicU64 = AtomicU64::new(1);

/// Product of raw slices choosing schoolbook or Kronecker by size.
pub(crate) fn mul_auto_raw(ctx: &PrimeContext, a: &[u64], b: &[u64]) -> Vec<u64> {
    if a.len().min(b.len()) < 24 {
        mul_naive_raw(ctx, a, b)
    } else {
        ks_mul_raw(ctx, a, b, slot_width(ctx.p(), a.len().max(b.len())))
    }
}

fn trim(v: &mut Vec<u64>) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

/// Schoolbook division of `a` by `b` (b nonzero); both outputs trimmed.
pub(crate) fn poly_divrem_raw(ctx: &PrimeContext, a: &[u64], b: &[u64]) -> (Vec<u64>, Vec<u64>) {
    let mut b = b.to_vec();
    trim(&mut b);
    assert!(!b.is_empty(), "division by the zero polynomial");
    let mut r = a.to_vec();
    trim(&mut r);
    if r.len() < b.len() {
        return (Vec::new(), r);
    }
    let db = b.len() - 1;
    let lead_inv = ctx.inv(b[db]).expect("leading coefficient is nonzero");
    let mut q = vec![0u64; r.len() - db];
    for i in (db..r.len()).rev() {
        let c = ctx.mul(r[i], lead_inv);
        if c == 0 {
            continue;
        }
        q[i - db] = c;
        for j in 0..=db {
            let k = i - db + j;
            r[k] = ctx.sub(r[k], ctx.mul(c, b[j]));
        }
    }
    r.truncate(db);
    trim(&mut r);
    trim(&mut q);
    (q, r)
}

/// Monic gcd (empty vector for gcd(0, 0)).
pub(crate) fn poly_gcd_raw(ctx: &PrimeContext, a: &[u64], b: &[u64]) -> Vec<u64> {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    trim(&mut a);
    trim(&mut b);
    while !b.is_empty() {
        let (_, r) = poly_divrem_raw(ctx, &a, &b);
        a = std::mem::replace(&mut b, r);
    }
    if let Some(&lead) = a.last() {
        let li = ctx.inv(lead).unwrap();
        for c in a.iter_mut() {
            *c = ctx.mul(*c, li);
        }
    }
    a
}

/// `s` with `s·a ≡ 1 (mod m)`, or `None` if `gcd(a, m) ≠ 1`.
fn poly_inv_mod_raw(ctx: &PrimeContext, a: &[u64], m: &[u64]) -> Option<Vec<u64>> {
    // invariant: r0 ≡ s0·a, r1 ≡ s1·a (mod m)
    let (_, mut r0) = poly_divrem_raw(ctx, a, m);
    let mut r1 = m.to_vec();
    trim(&mut r1);
    let mut s0 = vec![1u64];
    let mut s1: Vec<u64> = Vec::new();
    while !r1.is_empty() && !r0.is_empty() {
        let (q, r) = poly_divrem_raw(ctx, &r1, &r0);
        let qs = mul_naive_raw(ctx, &q, &s0);
        let mut s = vec![0u64; s1.len().max(qs.len())];
        for (i, v) in s.iter_mut().enumerate() {
            *v = ctx.sub(
                s1.get(i).copied().unwrap_or(0),
                qs.get(i).copied().unwrap_or(0),
            );
        }
        trim(&mut s);
        r1 = std::mem::replace(&mut r0, r);
        s1 = std::mem::replace(&mut s0, s);
    }
    // r1 holds the gcd, s1 its cofactor
    if r1.len() != 1 {
        return None;
    }
    let li = ctx.inv(r1[0]).ok()?;
    let (_, mut s) = poly_divrem_raw(ctx, &s1, m);
    for c in s.iter_mut() {
        *c = ctx.mul(*c, li);
    }
    Some(s)
}

/// A finite field F_p[Z]/P with P monic irreducible of degree κ.
#[derive(Clone)]
pub struct ExtField {
    id: u64,
    ctx: PrimeContext,
    kappa: usize,
    modulus: Vec<u64>,
    rev_inv: Vec<u64>,
    reduce_table: Vec<u64>,
    kron_threshold: usize,
}

/// A residue modulo P, tagged with the id of the field it belongs to.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExtElement {
    field_id: u64,
    coeffs: Vec<u64>,
}

impl ExtElement {
    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<u64> {
        self.coeffs
    }

    pub fn field_id(&self) -> u64 {
        self.field_id
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }
}

impl fmt::Debug for ExtElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExtElement{:?}", self.coeffs)
    }
}

impl fmt::Debug for ExtField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ExtField(p={}, κ={}, P={:?})",
            self.ctx.p(),
            self.kappa,
            self.modulus
        )
    }
}

impl ExtField {
    /// Builds the field for a monic modulus, verifying irreducibility.
    pub fn new(ctx: PrimeContext, modulus: Vec<u64>) -> Result<Self> {
        if modulus.len() < 2 {
            return Err(invalid("modulus must have degree at least 1"));
        }
        if modulus.iter().any(|&c| c >= ctx.p()) {
            return Err(invalid("modulus coefficient is not a canonical residue"));
        }
        if *modulus.last().unwrap() != 1 {
            return Err(invalid("modulus must be monic"));
        }
        if !is_irreducible(&ctx, &modulus) {
            return Err(invalid(format!("modulus {modulus:?} is reducible")));
        }
        Ok(Self::unchecked(ctx, modulus))
    }

    /// F_p itself, as F_p[Z]/(Z).
    pub fn prime_field(ctx: PrimeContext) -> Self {
        Self::unchecked(ctx, vec![0, 1])
    }

    /// Field data for a monic modulus of degree ≥ 1 without the
    /// irreducibility check; arithmetic is that of the quotient ring.
    pub(crate) fn unchecked(ctx: PrimeContext, modulus: Vec<u64>) -> Self {
        let kappa = modulus.len() - 1;
        let mut f = ExtField {
            id: NEXT_FIELD_ID.fetch_add(1, Ordering::Relaxed),
            ctx,
            kappa,
            rev_inv: newton_rev_inverse(&ctx, &modulus),
            modulus,
            reduce_table: Vec::new(),
            kron_threshold: DEFAULT_KRONECKER_THRESHOLD,
        };
        f.build_table();
        f
    }

    /// Same field (same id, elements stay compatible) with a different
    /// switch-over point for the Kronecker multiplication path.
    pub fn with_kronecker_threshold(mut self, threshold: usize) -> Self {
        self.kron_threshold = threshold.max(2);
        self.build_table();
        self
    }

    fn uses_kronecker(&self) -> bool {
        self.kappa >= self.kron_threshold
    }

    fn build_table(&mut self) {
        let k = self.kappa;
        self.reduce_table.clear();
        if self.uses_kronecker() || k < 2 {
            return;
        }
        let ctx = self.ctx;
        let mut row: Vec<u64> = self.modulus[..k].iter().map(|&c| ctx.neg(c)).collect();
        self.reduce_table.reserve((k - 1) * k);
        for _ in 0..k - 1 {
            self.reduce_table.extend_from_slice(&row);
            let top = row[k - 1];
            for j in (1..k).rev() {
                row[j] = ctx.sub(row[j - 1], ctx.mul(top, self.modulus[j]));
            }
            row[0] = ctx.neg(ctx.mul(top, self.modulus[0]));
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn ctx(&self) -> &PrimeContext {
        &self.ctx
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    /// Monic modulus, low coefficient first, length κ+1.
    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    pub fn modulus_poly(&self) -> FpPoly {
        FpPoly::from_raw(self.ctx, self.modulus.clone())
    }

    /// Inverse of the reversed modulus modulo Z^κ.
    pub fn rev_inverse(&self) -> &[u64] {
        &self.rev_inv
    }

    pub fn kronecker_threshold(&self) -> usize {
        self.kron_threshold
    }

    /// `p^κ - 1`, the order of the multiplicative group.
    pub fn group_order(&self) -> BigUint {
        BigUint::from(self.ctx.p()).pow(self.kappa as u32) - 1u32
    }

    pub(crate) fn wrap(&self, coeffs: Vec<u64>) -> ExtElement {
        debug_assert_eq!(coeffs.len(), self.kappa);
        ExtElement {
            field_id: self.id,
            coeffs,
        }
    }

    pub fn zero(&self) -> ExtElement {
        self.wrap(vec![0; self.kappa])
    }

    pub fn one(&self) -> ExtElement {
        self.scalar(1)
    }

    pub fn scalar(&self, c: u64) -> ExtElement {
        let mut v = vec![0; self.kappa];
        v[0] = self.ctx.reduce(c);
        self.wrap(v)
    }

    /// The class of Z.
    pub fn generator(&self) -> ExtElement {
        self.wrap(self.reduce_wide(&[0, 1]))
    }

    /// Element from at most κ canonical residues.
    pub fn element(&self, coeffs: Vec<u64>) -> Result<ExtElement> {
        if coeffs.len() > self.kappa {
            return Err(Error::LengthMismatch {
                expected: self.kappa,
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|&c| c >= self.ctx.p()) {
            return Err(invalid("coefficient is not a canonical residue"));
        }
        let mut coeffs = coeffs;
        coeffs.resize(self.kappa, 0);
        Ok(self.wrap(coeffs))
    }

    /// Residue of an arbitrary polynomial.
    pub fn from_poly(&self, f: &FpPoly) -> Result<ExtElement> {
        self.ctx.check_same(f.ctx())?;
        let v = &f.coeffs()[..f.significant_len()];
        if v.len() >= 2 * self.kappa {
            let (_, mut r) = poly_divrem_raw(&self.ctx, v, &self.modulus);
            r.resize(self.kappa, 0);
            return Ok(self.wrap(r));
        }
        Ok(self.wrap(self.reduce_wide(v)))
    }

    pub fn random(&self, rng: &mut impl Rng) -> ExtElement {
        let p = self.ctx.p();
        self.wrap((0..self.kappa).map(|_| rng.random_range(0..p)).collect())
    }

    pub(crate) fn check(&self, x: &ExtElement) -> Result<()> {
        if x.field_id != self.id {
            return Err(Error::FieldMismatch);
        }
        Ok(())
    }

    pub fn add(&self, x: &ExtElement, y: &ExtElement) -> ExtElement {
        let mut out = vec![0; self.kappa];
        self.add_into(&x.coeffs, &y.coeffs, &mut out);
        self.wrap(out)
    }

    pub fn sub(&self, x: &ExtElement, y: &ExtElement) -> ExtElement {
        let mut out = vec![0; self.kappa];
        self.sub_into(&x.coeffs, &y.coeffs, &mut out);
        self.wrap(out)
    }

    pub fn neg(&self, x: &ExtElement) -> ExtElement {
        self.wrap(x.coeffs.iter().map(|&c| self.ctx.neg(c)).collect())
    }

    pub fn scale(&self, x: &ExtElement, c: u64) -> ExtElement {
        let c = self.ctx.reduce(c);
        self.wrap(x.coeffs.iter().map(|&v| self.ctx.mul(v, c)).collect())
    }

    pub fn mul(&self, x: &ExtElement, y: &ExtElement) -> ExtElement {
        let mut out = vec![0; self.kappa];
        self.mul_into(&x.coeffs, &y.coeffs, &mut out);
        self.wrap(out)
    }

    pub fn square(&self, x: &ExtElement) -> ExtElement {
        self.mul(x, x)
    }

    pub fn inv(&self, x: &ExtElement) -> Result<ExtElement> {
        let mut s = poly_inv_mod_raw(&self.ctx, &x.coeffs, &self.modulus).ok_or_else(|| invalid("zero has no inverse in the extension field"))?;
        s.resize(self.kappa, 0);
        Ok(self.wrap(s))
    }

    pub fn pow(&self, x: &ExtElement, e: u64) -> ExtElement {
        let mut result = self.one();
        let mut base = x.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = self.mul(&result, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.square(&base);
            }
        }
        result
    }

    pub fn pow_big(&self, x: &ExtElement, e: &BigUint) -> ExtElement {
        let mut result = self.one();
        for i in (0..e.bits()).rev() {
            result = self.square(&result);
            if e.bit(i) {
                result = self.mul(&result, x);
            }
        }
        result
    }

    pub(crate) fn add_into(&self, a: &[u64], b: &[u64], out: &mut [u64]) {
        for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
            *o = self.ctx.add(x, y);
        }
    }

    pub(crate) fn sub_into(&self, a: &[u64], b: &[u64], out: &mut [u64]) {
        for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
            *o = self.ctx.sub(x, y);
        }
    }

    /// `out = a·b mod P` on raw κ-length slices.
    pub(crate) fn mul_into(&self, a: &[u64], b: &[u64], out: &mut [u64]) {
        let k = self.kappa;
        let ctx = &self.ctx;
        if k == 1 {
            out[0] = ctx.mul(a[0], b[0]);
            return;
        }
        if self.uses_kronecker() {
            let wide = ks_mul_raw(ctx, a, b, slot_width(ctx.p(), k));
            let r = self.newton_reduce(&wide);
            out.copy_from_slice(&r);
            return;
        }
        let pm = (ctx.p() - 1) as u128;
        // both passes add at most 2κ products (p-1)² per slot
        let bound = pm.saturating_mul(pm).saturating_mul(2 * k as u128);
        if bound < 1u128 << 32 {
            self.mul_word::<u32>(a, b, out);
        } else if bound < 1u128 << 64 {
            self.mul_word::<u64>(a, b, out);
        } else if ctx.is_small() {
            // every partial product < 2^64, so at most κ of them fit in u128
            const STACK: usize = 128;
            let mut stack = [0u128; STACK];
            let mut heap;
            let acc: &mut [u128] = if 2 * k - 1 <= STACK {
                &mut stack[..2 * k - 1]
            } else {
                heap = vec![0u128; 2 * k - 1];
                &mut heap
            };
            for (i, &x) in a.iter().enumerate() {
                if x == 0 {
                    continue;
                }
                for (j, &y) in b.iter().enumerate() {
                    acc[i + j] += (x * y) as u128;
                }
            }
            let high: Vec<u64> = acc[k..].iter().map(|&v| ctx.reduce_u128(v)).collect();
            for (t, &h) in high.iter().enumerate() {
                if h == 0 {
                    continue;
                }
                let row = &self.reduce_table[t * k..(t + 1) * k];
                for (j, &r) in row.iter().enumerate() {
                    acc[j] += (h * r) as u128;
                }
            }
            for (o, &v) in out.iter_mut().zip(acc.iter()) {
                *o = ctx.reduce_u128(v);
            }
        } else {
            let wide = mul_naive_raw(ctx, a, b);
            out.copy_from_slice(&self.table_reduce(&wide));
        }
    }

    /// Schoolbook product and table reduction with accumulators of type `W`;
    /// the caller guarantees no slot overflows.
    fn mul_word<W: Acc>(&self, a: &[u64], b: &[u64], out: &mut [u64]) {
        let k = self.kappa;
        let p = self.ctx.p();
        const STACK: usize = 256;
        let mut stack = [W::ZERO; STACK];
        let mut heap;
        let acc: &mut [W] = if 2 * k - 1 <= STACK {
            &mut stack[..2 * k - 1]
        } else {
            heap = vec![W::ZERO; 2 * k - 1];
            &mut heap
        };
        let bw: Vec<W> = b.iter().map(|&y| W::from_u64(y)).collect();
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            let x = W::from_u64(x);
            for (s, &y) in acc[i..i + k].iter_mut().zip(&bw) {
                *s = s.add(x.mul(y));
            }
        }
        for t in (0..k - 1).rev() {
            let h = acc[k + t].to_u64() % p;
            if h == 0 {
                continue;
            }
            let h = W::from_u64(h);
            let row = &self.reduce_table[t * k..(t + 1) * k];
            for (s, &r) in acc[..k].iter_mut().zip(row) {
                *s = s.add(h.mul(W::from_u64(r)));
            }
        }
        for (o, &v) in out.iter_mut().zip(acc.iter()) {
            *o = v.to_u64() % p;
        }
    }

    fn table_reduce(&self, wide: &[u64]) -> Vec<u64> {
        let k = self.kappa;
        let ctx = &self.ctx;
        let mut out = vec![0u64; k];
        out[..wide.len().min(k)].copy_from_slice(&wide[..wide.len().min(k)]);
        for (t, &h) in wide.iter().enumerate().skip(k) {
            let t = t - k;
            if h == 0 {
                continue;
            }
            let row = &self.reduce_table[t * k..(t + 1) * k];
            for (o, &r) in out.iter_mut().zip(row) {
                *o = ctx.add(*o, ctx.mul(h, r));
            }
        }
        out
    }

    /// Remainder modulo P of a polynomial of length `< 2κ`.
    pub(crate) fn reduce_wide(&self, wide: &[u64]) -> Vec<u64> {
        debug_assert!(wide.len() < 2 * self.kappa || self.kappa == 1);
        if self.kappa == 1 {
            let (_, r) = poly_divrem_raw(&self.ctx, wide, &self.modulus);
            return vec![r.first().copied().unwrap_or(0)];
        }
        if self.uses_kronecker() {
            self.newton_reduce(wide)
        } else {
            self.table_reduce(wide)
        }
    }

    /// Quotient by Newton inversion; `wide.len() <= 2κ`.
    fn newton_quotient(&self, wide: &[u64]) -> Vec<u64> {
        let k = self.kappa;
        let m = wide.len();
        if m <= k {
            return Vec::new();
        }
        let l = m - k;
        let rev_top: Vec<u64> = (0..l).map(|i| wide[m - 1 - i]).collect();
        let mut q = mul_auto_raw(&self.ctx, &rev_top, &self.rev_inv[..l]);
        q.resize(l, 0);
        q.reverse();
        q
    }

    fn newton_reduce(&self, wide: &[u64]) -> Vec<u64> {
        let k = self.kappa;
        let mut r = wide[..wide.len().min(k)].to_vec();
        r.resize(k, 0);
        let q = self.newton_quotient(wide);
        if !q.is_empty() {
            let qp = mul_auto_raw(&self.ctx, &q, &self.modulus[..k]);
            for (j, &v) in qp.iter().enumerate().take(k) {
                r[j] = self.ctx.sub(r[j], v);
            }
        }
        r
    }

    /// `f = q·P + r` for `deg f < 2κ`, through the precomputed reverse inverse.
    pub fn div_rem(&self, f: &FpPoly) -> Result<(FpPoly, FpPoly)> {
        self.ctx.check_same(f.ctx())?;
        let len = f.significant_len();
        if len > 2 * self.kappa {
            return Err(Error::LengthMismatch {
                expected: 2 * self.kappa,
                got: len,
            });
        }
        let wide = &f.coeffs()[..len];
        let q = self.newton_quotient(wide);
        let mut r = wide[..len.min(self.kappa)].to_vec();
        if !q.is_empty() {
            let qp = mul_auto_raw(&self.ctx, &q, &self.modulus[..self.kappa]);
            r.resize(self.kappa, 0);
            for (j, &v) in qp.iter().enumerate().take(self.kappa) {
                r[j] = self.ctx.sub(r[j], v);
            }
        }
        Ok((
            FpPoly::from_raw(self.ctx, q).trimmed(),
            FpPoly::from_raw(self.ctx, r).trimmed(),
        ))
    }

    /// Image of `x` under the Frobenius map, using a precomputed matrix whose
    /// column `j` is `Z^{jp} mod P`.
    fn frobenius_apply(&self, columns: &[Vec<u64>], x: &[u64]) -> Vec<u64> {
        let ctx = &self.ctx;
        let mut out = vec![0u64; self.kappa];
        for (j, &c) in x.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(&columns[j]) {
                *o = ctx.add(*o, ctx.mul(c, v));
            }
        }
        out
    }
}

/// Inverse of `rev(P)` modulo `Z^κ` by Newton iteration `g ← g(2 - f g)`.
fn newton_rev_inverse(ctx: &PrimeContext, modulus: &[u64]) -> Vec<u64> {
    let k = modulus.len() - 1;
    let f: Vec<u64> = modulus.iter().rev().copied().collect();
    let mut g = vec![1u64];
    let mut prec = 1;
    while prec < k {
        let next = (2 * prec).min(k);
        let mut e = mul_auto_raw(ctx, &f[..next.min(f.len())], &g);
        e.resize(next, 0);
        for c in e.iter_mut() {
            *c = ctx.neg(*c);
        }
        e[0] = ctx.add(e[0], 2);
        let mut h = mul_auto_raw(ctx, &g, &e);
        h.resize(next, 0);
        g = h;
        prec = next;
    }
    g.resize(k, 0);
    g
}

/// Distinct-degree test: P of degree κ is irreducible iff
/// `gcd(Z^{p^i} - Z, P) = 1` for every `i <= κ/2`. Random candidates usually
/// have a small factor, so most rejections happen after a few steps.
/// Frobenius steps use the matrix of `x ↦ x^p` when p is large and direct
/// exponentiation otherwise.
pub fn is_irreducible(ctx: &PrimeContext, modulus: &[u64]) -> bool {
    let mut m = modulus.to_vec();
    trim(&mut m);
    if m.len() < 2 {
        return false;
    }
    if m.len() == 2 {
        return true;
    }
    let lead_inv = ctx.inv(*m.last().unwrap()).unwrap();
    for c in m.iter_mut() {
        *c = ctx.mul(*c, lead_inv);
    }
    if m[0] == 0 {
        return false;
    }
    let k = m.len() - 1;
    let ring = ExtField::unchecked(*ctx, m.clone());
    let z = ring.generator();
    let columns = (ctx.lg_p() as usize > k).then(|| {
        let zp = ring.pow(&z, ctx.p());
        let mut cols = Vec::with_capacity(k);
        let mut acc = ring.one();
        for _ in 0..k {
            cols.push(acc.coeffs.clone());
            acc = ring.mul(&acc, &zp);
        }
        cols
    });
    let mut x = z.coeffs.clone();
    for _ in 1..=k / 2 {
        x = match &columns {
            Some(cols) => ring.frobenius_apply(cols, &x),
            None => ring.pow(&ring.wrap(x), ctx.p()).coeffs,
        };
        let mut d = x.clone();
        d[1] = ctx.sub(d[1], 1);
        if poly_gcd_raw(ctx, &d, &m).len() != 1 {
            return false;
        }
    }
    true
}

/// Seeded random search for a monic irreducible of degree κ.
pub fn find_irreducible(ctx: &PrimeContext, kappa: usize, seed: u64) -> Result<ExtField> {
    if kappa == 0 {
        return Err(invalid("extension degree must be at least 1"));
    }
    if kappa == 1 {
        return Ok(ExtField::prime_field(*ctx));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = ctx.p();
    let cap = (64 * kappa).max(256);
    for _ in 0..cap {
        let mut m: Vec<u64> = (0..kappa).map(|_| rng.random_range(0..p)).collect();
        if m[0] == 0 {
            m[0] = 1;
        }
        m.push(1);
        if is_irreducible(ctx, &m) {
            return Ok(ExtField::unchecked(*ctx, m));
        }
    }
    Err(Error::SearchExhausted(format!(
        "no irreducible of degree {kappa} over F_{p} in {cap} trials"
    )))
}

pub fn ext_mul(field: &ExtField, x: &ExtElement, y: &ExtElement) -> Result<ExtElement> {
    field.check(x)?;
    field.check(y)?;
    Ok(field.mul(x, y))
}

pub fn ext_div_rem(f: &FpPoly, field: &ExtField) -> Result<(FpPoly, FpPoly)> {
    field.div_rem(f)
}

pub fn ext_pow(field: &ExtField, x: &ExtElement, e: &BigUint) -> Result<ExtElement> {
    field.check(x)?;
    Ok(field.pow_big(x, e))
}

/// Random element raised to `(p^κ - 1)/N`, accepted once `ω^{N/s} ≠ 1` for
/// every prime `s | N`.
pub fn find_root_of_order(
    field: &ExtField,
    n: u64,
    factors: &[(u64, u32)],
    seed: u64,
) -> Result<ExtElement> {
    if n == 0 {
        return Err(invalid("root order must be positive"));
    }
    let order = field.group_order();
    if !(&order % n).is_zero() {
        return Err(Error::NotDivisor(format!(
            "{n} does not divide p^κ - 1 = {order}"
        )));
    }
    let product: u128 = factors
        .iter()
        .map(|&(q, e)| (q as u128).pow(e))
        .product();
    if product != n as u128 || factors.iter().any(|&(q, _)| !crate::prime_field::is_prime(q)) {
        return Err(invalid(format!(
            "{factors:?} is not the prime factorization of {n}"
        )));
    }
    if n == 1 {
        return Ok(field.one());
    }
    let cofactor = order / n;
    let one = field.one();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = (64 * field.kappa()).max(256);
    for _ in 0..cap {
        let x = field.random(&mut rng);
        if x.is_zero() {
            continue;
        }
        let w = field.pow_big(&x, &cofactor);
        if factors.iter().all(|&(q, _)| field.pow(&w, n / q) != one) {
            return Ok(w);
        }
    }
    Err(Error::SearchExhausted(format!(
        "no element of order {n} found in {cap} trials"
    )))
}

/// Multiplies polynomials with coefficients in the field by lifting to
/// F_p[X, Z], one bivariate Kronecker product, and a reduction of each
/// X-coefficient modulo P.
pub fn ext_poly_multiply(
    field: &ExtField,
    a: &[ExtElement],
    b: &[ExtElement],
) -> Result<Vec<ExtElement>> {
    ext_poly_multiply_with(field, a, b, &IntegerKronecker)
}

pub fn ext_poly_multiply_with(
    field: &ExtField,
    a: &[ExtElement],
    b: &[ExtElement],
    mul: &dyn UnivariateMultiplier,
) -> Result<Vec<ExtElement>> {
    for x in a.iter().chain(b) {
        field.check(x)?;
    }
    if a.is_empty() || b.is_empty() {
        return Ok(Vec::new());
    }
    let k = field.kappa();
    let flat = |v: &[ExtElement]| -> Vec<u64> { v.iter().flat_map(|e| e.coeffs.clone()).collect() };
    let ba = Bivariate::new(*field.ctx(), k, flat(a))?;
    let bb = Bivariate::new(*field.ctx(), k, flat(b))?;
    let prod = ks_bivariate_multiply(&ba, &bb, k, mul)?;
    Ok((0..prod.x_len())
        .map(|i| field.wrap(field.reduce_wide(prod.row(i))))
        .collect())
}

/// Accumulator word for the schoolbook path.
trait Acc: Copy {
    const ZERO: Self;
    fn from_u64(v: u64) -> Self;
    fn to_u64(self) -> u64;
    fn add(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
}

macro_rules! acc_word {
    ($t:ty) => {
        impl Acc for $t {
            const ZERO: Self = 0;
            #[inline(always)]
            fn from_u64(v: u64) -> Self {
                v as $t
            }
            #[inline(always)]
            fn to_u64(self) -> u64 {
                self as u64
            }
            #[inline(always)]
            fn add(self, o: Self) -> Self {
                self.wrapping_add(o)
            }
            #[inline(always)]
            fn mul(self, o: Self) -> Self {
                self.wrapping_mul(o)
            }
        }
    };
}

acc_word!(u32);
acc_word!(u64);

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(p: u64) -> PrimeContext {
        PrimeContext::new(p).unwrap()
    }

    fn gf16() -> ExtField {
        ExtField::new(ctx(2), vec![1, 1, 0, 0, 1]).unwrap()
    }

    fn z_pow(f: &ExtField, e: u64) -> ExtElement {
        f.pow(&f.generator(), e)
    }

    /// Schoolbook multiply then long division: the oracle for field products.
    fn mul_oracle(f: &ExtField, x: &ExtElement, y: &ExtElement) -> Vec<u64> {
        let prod = mul_naive_raw(f.ctx(), x.coeffs(), y.coeffs());
        let (_, mut r) = poly_divrem_raw(f.ctx(), &prod, f.modulus());
        r.resize(f.kappa(), 0);
        r
    }

    #[test]
    fn gf16_examples() {
        let f = gf16();
        let z = f.generator();
        assert_eq!(ext_mul(&f, &z, &z_pow(&f, 3)).unwrap().coeffs(), &[1, 1, 0, 0]);
        let x = f.element(vec![1, 1]).unwrap();
        assert_eq!(f.mul(&x, &f.one()), x);
        assert_eq!(f.square(&x).coeffs(), &[1, 0, 1, 0]);
        assert_eq!(z_pow(&f, 15), f.one());
        assert_eq!(f.pow(&x, 0), f.one());
        assert_eq!(f.pow(&x, 1), x);
        assert_eq!(ext_pow(&f, &z, &BigUint::from(15u32)).unwrap(), f.one());
    }

    #[test]
    fn irreducibility() {
        let c2 = ctx(2);
        assert!(is_irreducible(&c2, &[1, 1, 0, 0, 1]));
        // (Z^2 + Z + 1)^2
        assert!(!is_irreducible(&c2, &[1, 0, 1, 0, 1]));
        assert!(ExtField::new(c2, vec![1, 0, 1, 0, 1]).is_err());
        let f = find_irreducible(&c2, 1, 0).unwrap();
        assert_eq!(f.modulus(), &[0, 1]);
        let f = find_irreducible(&c2, 4, 3).unwrap();
        assert!(is_irreducible(&c2, f.modulus()));
        let f = find_irreducible(&ctx(7), 4, 3).unwrap();
        assert!(is_irreducible(&ctx(7), f.modulus()));
        assert!(find_irreducible(&c2, 0, 0).is_err());
    }

    #[test]
    fn irreducible_count_matches_necklace_formula() {
        // number of monic irreducibles of degree 4 over F_3 is (81 - 9)/4 = 18
        let c = ctx(3);
        let mut count = 0;
        for code in 0..81u64 {
            let m = vec![code % 3, code / 3 % 3, code / 9 % 3, code / 27, 1];
            if is_irreducible(&c, &m) {
                count += 1;
            }
        }
        assert_eq!(count, 18);
        // and 6 of degree 6 over F_2: (64 - 8 - 4 + 2)/6 = 9
        let c = ctx(2);
        let count = (0..64u64)
            .filter(|code| {
                let mut m: Vec<u64> = (0..6).map(|i| code >> i & 1).collect();
                m.push(1);
                is_irreducible(&c, &m)
            })
            .count();
        assert_eq!(count, 9);
    }

    #[test]
    fn mul_matches_oracle_both_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (p, k) in [(2u64, 5usize), (3, 33), (13, 40), (101, 7), (65_521, 48), (18_446_744_073_709_551_557, 9), (18_446_744_073_709_551_557, 36)] {
            let c = ctx(p);
            let f = find_irreducible(&c, k, 1).unwrap();
            for threshold in [2, DEFAULT_KRONECKER_THRESHOLD, 1000] {
                let g = f.clone().with_kronecker_threshold(threshold);
                for _ in 0..10 {
                    let x = g.random(&mut rng);
                    let y = g.random(&mut rng);
                    assert_eq!(g.mul(&x, &y).coeffs(), mul_oracle(&g, &x, &y), "p={p} κ={k}");
                }
            }
        }
    }

    #[test]
    fn inverse_and_fermat() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let c = ctx(13);
        let f = find_irreducible(&c, 6, 9).unwrap();
        for _ in 0..20 {
            let x = f.random(&mut rng);
            if x.is_zero() {
                assert!(f.inv(&x).is_err());
                continue;
            }
            assert_eq!(f.mul(&x, &f.inv(&x).unwrap()), f.one());
            assert_eq!(f.pow_big(&x, &f.group_order()), f.one());
        }
    }

    #[test]
    fn div_rem_examples() {
        let f = gf16();
        let c = *f.ctx();
        let z4 = FpPoly::monomial(c, 4, 1);
        let (q, r) = ext_div_rem(&z4, &f).unwrap();
        assert_eq!(q, FpPoly::one(c));
        assert_eq!(r, FpPoly::new(c, vec![1, 1]).unwrap());
        let small = FpPoly::new(c, vec![1, 0, 1]).unwrap();
        let (q, r) = ext_div_rem(&small, &f).unwrap();
        assert!(q.is_zero());
        assert_eq!(r, small);
        assert!(ext_div_rem(&FpPoly::monomial(c, 8, 1), &f).is_err());
    }

    #[test]
    fn div_rem_matches_long_division() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for p in [2u64, 5, 65_537] {
            let c = ctx(p);
            for k in [1usize, 2, 3, 8, 17, 31, 32, 50, 64] {
                let f = find_irreducible(&c, k, k as u64).unwrap();
                for _ in 0..5 {
                    let len = rng.random_range(0..2 * k);
                    let a = FpPoly::new(c, (0..len).map(|_| rng.random_range(0..p)).collect()).unwrap();
                    let (q, r) = f.div_rem(&a).unwrap();
                    let (q0, r0) = poly_divrem_raw(&c, a.coeffs(), f.modulus());
                    assert_eq!(q, FpPoly::from_raw(c, q0));
                    assert_eq!(r, FpPoly::from_raw(c, r0));
                }
                let mut prod = mul_auto_raw(&c, &f.modulus().iter().rev().copied().collect::<Vec<_>>(), f.rev_inverse());
                prod.truncate(k);
                let mut one = vec![0u64; k];
                one[0] = 1;
                assert_eq!(prod, one);
            }
        }
    }

    #[test]
    fn from_poly_reduces_long_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let c = ctx(7);
        let f = find_irreducible(&c, 5, 2).unwrap();
        for len in [0usize, 3, 9, 10, 11, 40] {
            let a = FpPoly::new(c, (0..len).map(|_| rng.random_range(0..7)).collect()).unwrap();
            let (_, mut r) = poly_divrem_raw(&c, a.coeffs(), f.modulus());
            r.resize(5, 0);
            assert_eq!(f.from_poly(&a).unwrap().coeffs(), &r[..]);
        }
    }

    #[test]
    fn roots_of_order() {
        let f5 = ExtField::prime_field(ctx(5));
        let w = find_root_of_order(&f5, 4, &[(2, 2)], 0).unwrap();
        assert!(w.coeffs() == [2] || w.coeffs() == [3]);
        assert_eq!(find_root_of_order(&f5, 1, &[], 0).unwrap(), f5.one());
        assert!(matches!(
            find_root_of_order(&f5, 3, &[(3, 1)], 0),
            Err(Error::NotDivisor(_))
        ));
        assert!(find_root_of_order(&f5, 4, &[(2, 1)], 0).is_err());
        let f = gf16();
        let w = find_root_of_order(&f, 15, &[(3, 1), (5, 1)], 5).unwrap();
        let mut seen = std::collections::HashSet::new();
        let mut acc = f.one();
        for _ in 0..15 {
            seen.insert(acc.clone());
            acc = f.mul(&acc, &w);
        }
        assert_eq!(seen.len(), 15);
    }

    #[test]
    fn principal_root_sums_vanish() {
        let c = ctx(13);
        let f = find_irreducible(&c, 2, 4).unwrap();
        // 168 = 13^2 - 1 = 2^3 * 3 * 7
        for (n, fac) in [(8u64, vec![(2u64, 3u32)]), (12, vec![(2, 2), (3, 1)]), (56, vec![(2, 3), (7, 1)])] {
            let w = find_root_of_order(&f, n, &fac, n).unwrap();
            for i in 1..n {
                let wi = f.pow(&w, i);
                let mut sum = f.zero();
                let mut acc = f.one();
                for _ in 0..n {
                    sum = f.add(&sum, &acc);
                    acc = f.mul(&acc, &wi);
                }
                assert!(sum.is_zero(), "n={n} i={i}");
            }
        }
    }

    #[test]
    fn poly_multiply_over_extension() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for (p, k) in [(2u64, 4usize), (3, 8), (101, 3)] {
            let c = ctx(p);
            let f = find_irreducible(&c, k, 7).unwrap();
            for _ in 0..10 {
                let la = rng.random_range(1..=64);
                let lb = rng.random_range(1..=64);
                let a: Vec<_> = (0..la).map(|_| f.random(&mut rng)).collect();
                let b: Vec<_> = (0..lb).map(|_| f.random(&mut rng)).collect();
                let got = ext_poly_multiply(&f, &a, &b).unwrap();
                let mut want = vec![f.zero(); la + lb - 1];
                for (i, x) in a.iter().enumerate() {
                    for (j, y) in b.iter().enumerate() {
                        want[i + j] = f.add(&want[i + j], &f.mul(x, y));
                    }
                }
                assert_eq!(got, want);
            }
            let x = f.random(&mut rng);
            let y = f.random(&mut rng);
            assert_eq!(ext_poly_multiply(&f, std::slice::from_ref(&x), std::slice::from_ref(&y)).unwrap(), vec![f.mul(&x, &y)]);
            assert_eq!(ext_poly_multiply(&f, std::slice::from_ref(&x), &[f.one()]).unwrap(), vec![x]);
        }
    }

    #[test]
    fn field_mismatch_is_rejected() {
        let a = gf16();
        let b = gf16();
        assert_eq!(ext_mul(&a, &a.one(), &b.one()), Err(Error::FieldMismatch));
    }
}

