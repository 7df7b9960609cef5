//! Discrete Fourier transforms over F_{p^κ}.
//!
//! Vectors of field elements are stored flat: element `i` occupies
//! `data[i*κ..(i+1)*κ]`. A [`DftPlan`] decomposes its length as
//! `(((N_1 ⊙ N_2) ⊙ N_3) ⊙ ...)`: every split node has the product of the
//! earlier factors on its left and the last factor as a short leaf on its
//! right. Leaves of length at most `direct_threshold` are evaluated directly;
//! longer ones go through Bluestein's conversion to a cyclic convolution.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::ext_field::{ExtElement, ExtField};
use crate::kronecker::{split_chunks, substitute, CyclicEngine, KroneckerEngine, PreparedCyclic};
use crate::prime_field::fp_inv;
use crate::smooth::factor_u64;

/// Work (in words) above which row loops fan out over the thread pool.
const PAR_WORDS: usize = 1 << 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DftOptions {
    /// Leaves of at most this length skip Bluestein.
    pub direct_threshold: usize,
    /// Bluestein convolutions of at most this length are done naively.
    pub bluestein_floor: usize,
}

impl Default for DftOptions {
    fn default() -> Self {
        DftOptions {
            direct_threshold: 8,
            bluestein_floor: 32,
        }
    }
}

pub(crate) fn flatten(field: &ExtField, a: &[ExtElement]) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(a.len() * field.kappa());
    for x in a {
        field.check(x)?;
        out.extend_from_slice(x.coeffs());
    }
    Ok(out)
}

pub(crate) fn unflatten(field: &ExtField, data: &[u64]) -> Vec<ExtElement> {
    data.chunks(field.kappa())
        .map(|c| field.wrap(c.to_vec()))
        .collect()
}

/// `ω^N = 1` and `ω^{N/s} ≠ 1` for every prime `s | N`.
pub fn has_order(field: &ExtField, omega: &ExtElement, n: usize) -> bool {
    if n == 0 {
        return false;
    }
    let one = field.one();
    field.pow(omega, n as u64) == one
        && factor_u64(n as u64)
            .iter()
            .all(|&(s, _)| field.pow(omega, n as u64 / s) != one)
}

fn check_root(field: &ExtField, omega: &ExtElement, n: usize) -> Result<()> {
    field.check(omega)?;
    if !has_order(field, omega, n) {
        return Err(Error::BadRoot(format!("{omega:?} does not have order {n}")));
    }
    Ok(())
}

/// Flat table `w^0, w^1, ..., w^{n-1}`.
fn power_table(field: &ExtField, w: &ExtElement, n: usize) -> Vec<u64> {
    let k = field.kappa();
    let mut out = vec![0u64; n * k];
    let mut acc = field.one();
    for i in 0..n {
        out[i * k..(i + 1) * k].copy_from_slice(acc.coeffs());
        acc = field.mul(&acc, w);
    }
    out
}

/// Quadratic-time evaluation `â_i = Σ_k a_k ω^{ik}` by Horner's rule.
pub fn dft_direct(field: &ExtField, a: &[ExtElement], omega: &ExtElement) -> Result<Vec<ExtElement>> {
    let n = a.len();
    check_root(field, omega, n)?;
    let flat = flatten(field, a)?;
    let mut out = Vec::with_capacity(n);
    let mut x = field.one();
    for _ in 0..n {
        out.push(field.wrap(horner(field, &flat, x.coeffs())));
        x = field.mul(&x, omega);
    }
    Ok(out)
}

fn horner(field: &ExtField, coeffs: &[u64], x: &[u64]) -> Vec<u64> {
    let k = field.kappa();
    let mut acc = vec![0u64; k];
    let mut tmp = vec![0u64; k];
    for c in coeffs.chunks(k).rev() {
        field.mul_into(&acc, x, &mut tmp);
        field.add_into(&tmp, c, &mut acc);
    }
    acc
}

enum Convolution {
    /// `G` as flat elements; product computed by the quadratic formula.
    Naive(Vec<u64>),
    /// `G` substituted to `F_p[Y]/(Y^{2nκ} - 1)` and handed to an engine.
    Engine(Box<dyn PreparedCyclic>),
}

enum ShortKind {
    Direct {
        powers: Vec<u64>,
    },
    Bluestein {
        /// input weights `f_i`
        f: Vec<u64>,
        /// output weights: `f'_i` (odd), or `½f_i` then `½f'_i` for `i < n/2` (even)
        out_w: Vec<u64>,
        /// `σ = (-1)^{n/2}` as a residue (even case only)
        sigma: u64,
        conv: Convolution,
    },
}

/// Transform of one short length with a fixed root, shared by every leaf of
/// that length.
pub struct ShortPlan {
    field: Arc<ExtField>,
    n: usize,
    kind: ShortKind,
}

impl ShortPlan {
    /// Direct evaluation for `n <= opts.direct_threshold`, Bluestein otherwise.
    pub fn new(
        field: Arc<ExtField>,
        omega: &ExtElement,
        n: usize,
        opts: &DftOptions,
        engine: &dyn CyclicEngine,
    ) -> Result<Self> {
        check_root(&field, omega, n)?;
        if n <= opts.direct_threshold {
            let powers = power_table(&field, omega, n);
            return Ok(ShortPlan {
                field,
                n,
                kind: ShortKind::Direct { powers },
            });
        }
        Self::bluestein(field, omega, n, opts, engine)
    }

    /// Always uses Bluestein's conversion.
    pub fn bluestein(
        field: Arc<ExtField>,
        omega: &ExtElement,
        n: usize,
        opts: &DftOptions,
        engine: &dyn CyclicEngine,
    ) -> Result<Self> {
        check_root(&field, omega, n)?;
        let ctx = *field.ctx();
        let k = field.kappa();
        let pw = power_table(&field, omega, n);
        let at = |e: u128| -> &[u64] {
            let j = (e % n as u128) as usize;
            &pw[j * k..(j + 1) * k]
        };
        let neg = |e: u128| -> u128 { (n as u128 - e % n as u128) % n as u128 };
        let mut f = Vec::with_capacity(n * k);
        let mut g = Vec::with_capacity(n * k);
        let mut out_w = Vec::with_capacity(n * k);
        let mut sigma = 0;
        if n % 2 == 1 {
            for i in 0..n as u128 {
                f.extend_from_slice(at((i * i - i) / 2));
                out_w.extend_from_slice(at((i * i + i) / 2));
                g.extend_from_slice(at(neg((i * i + i) / 2)));
            }
        } else {
            if ctx.p() == 2 {
                return Err(invalid("even-length Bluestein needs 2 to be invertible"));
            }
            let minus_one = field.neg(&field.one());
            if field.pow(omega, n as u64 / 2) != minus_one {
                return Err(Error::BadRoot("even Bluestein needs ω^{n/2} = -1".into()));
            }
            sigma = if (n / 2).is_multiple_of(2) { 1 } else { ctx.p() - 1 };
            let half = ctx.inv(2)?;
            let mut tmp = vec![0u64; k];
            for i in 0..n as u128 {
                f.extend_from_slice(at(i * i));
                field.add_into(at(neg(i * i)), at(neg(i * i + i)), &mut tmp);
                g.extend_from_slice(&tmp);
            }
            for i in 0..(n / 2) as u128 {
                out_w.extend(at(i * i).iter().map(|&c| ctx.mul(c, half)));
            }
            for i in 0..(n / 2) as u128 {
                out_w.extend(at(i * i + i).iter().map(|&c| ctx.mul(c, half)));
            }
        }
        let conv = if n <= opts.bluestein_floor {
            Convolution::Naive(g)
        } else {
            let y = substitute(&g, k, 2 * k, n);
            Convolution::Engine(engine.prepare(&ctx, &y, 2 * n * k)?)
        };
        Ok(ShortPlan {
            field,
            n,
            kind: ShortKind::Bluestein {
                f,
                out_w,
                sigma,
                conv,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_bluestein(&self) -> bool {
        matches!(self.kind, ShortKind::Bluestein { .. })
    }

    /// Recursion depth of the convolution engine behind this leaf.
    pub fn depth(&self) -> usize {
        match &self.kind {
            ShortKind::Bluestein {
                conv: Convolution::Engine(e),
                ..
            } => e.depth(),
            _ => 0,
        }
    }

    /// Transforms `n` flat elements in place.
    pub fn apply(&self, data: &mut [u64]) -> Result<()> {
        let field = &*self.field;
        let k = field.kappa();
        let n = self.n;
        debug_assert_eq!(data.len(), n * k);
        match &self.kind {
            ShortKind::Direct { powers } => {
                let mut out = vec![0u64; n * k];
                let mut tmp = vec![0u64; k];
                for i in 0..n {
                    let acc = &mut out[i * k..(i + 1) * k];
                    for j in 0..n {
                        let e = (i * j) % n;
                        field.mul_into(&data[j * k..(j + 1) * k], &powers[e * k..(e + 1) * k], &mut tmp);
                        for (a, &t) in acc.iter_mut().zip(&tmp) {
                            *a = field.ctx().add(*a, t);
                        }
                    }
                }
                data.copy_from_slice(&out);
            }
            ShortKind::Bluestein {
                f,
                out_w,
                sigma,
                conv,
            } => {
                let mut weighted = vec![0u64; n * k];
                for i in 0..n {
                    let r = i * k..(i + 1) * k;
                    field.mul_into(&data[r.clone()], &f[r.clone()], &mut weighted[r]);
                }
                let c = self.convolve(conv, &weighted)?;
                if n % 2 == 1 {
                    for i in 0..n {
                        let r = i * k..(i + 1) * k;
                        field.mul_into(&c[r.clone()], &out_w[r.clone()], &mut data[r]);
                    }
                } else {
                    let ctx = field.ctx();
                    let h = n / 2;
                    let mut plus = vec![0u64; k];
                    let mut minus = vec![0u64; k];
                    for i in 0..h {
                        let lo = &c[i * k..(i + 1) * k];
                        let hi = &c[(i + h) * k..(i + h + 1) * k];
                        for j in 0..k {
                            let s = ctx.mul(*sigma, hi[j]);
                            plus[j] = ctx.add(lo[j], s);
                            minus[j] = ctx.sub(lo[j], s);
                        }
                        let e = 2 * i;
                        field.mul_into(&plus, &out_w[i * k..(i + 1) * k], &mut data[e * k..(e + 1) * k]);
                        let o = 2 * i + 1;
                        field.mul_into(
                            &minus,
                            &out_w[(h + i) * k..(h + i + 1) * k],
                            &mut data[o * k..(o + 1) * k],
                        );
                    }
                }
            }
        }
        Ok(())
    }

    /// Cyclic convolution of `x` with the fixed `G`, length `n` over the field.
    fn convolve(&self, conv: &Convolution, x: &[u64]) -> Result<Vec<u64>> {
        let field = &*self.field;
        let k = field.kappa();
        let n = self.n;
        match conv {
            Convolution::Naive(g) => {
                let mut out = vec![0u64; n * k];
                let mut tmp = vec![0u64; k];
                for i in 0..n {
                    let xi = &x[i * k..(i + 1) * k];
                    if xi.iter().all(|&c| c == 0) {
                        continue;
                    }
                    for j in 0..n {
                        let t = (i + j) % n;
                        field.mul_into(xi, &g[j * k..(j + 1) * k], &mut tmp);
                        let o = &mut out[t * k..(t + 1) * k];
                        for (a, &b) in o.iter_mut().zip(&tmp) {
                            *a = field.ctx().add(*a, b);
                        }
                    }
                }
                Ok(out)
            }
            Convolution::Engine(e) => {
                let y = substitute(x, k, 2 * k, n);
                let prod = e.multiply(&y)?;
                let chunks = split_chunks(&prod, 2 * k, 2 * k - 1, n);
                let mut out = Vec::with_capacity(n * k);
                for c in chunks.chunks(2 * k - 1) {
                    out.extend(field.reduce_wide(c));
                }
                Ok(out)
            }
        }
    }
}

/// DFT of arbitrary length through Bluestein's conversion (odd or even
/// length), using naive convolution up to `opts.bluestein_floor` and the
/// Kronecker engine beyond.
pub fn bluestein(
    field: &ExtField,
    omega: &ExtElement,
    n: usize,
    a: &[ExtElement],
) -> Result<Vec<ExtElement>> {
    if a.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: a.len(),
        });
    }
    let plan = ShortPlan::bluestein(
        Arc::new(field.clone()),
        omega,
        n,
        &DftOptions::default(),
        &KroneckerEngine,
    )?;
    let mut data = flatten(field, a)?;
    plan.apply(&mut data)?;
    Ok(unflatten(field, &data))
}

enum Node {
    Leaf(Arc<ShortPlan>),
    Split {
        n1: usize,
        n2: usize,
        left: Box<Node>,
        right: Arc<ShortPlan>,
        /// `twiddle[k1*n2 + i2] = ω_node^{k1·i2}` (flat elements)
        twiddle: Vec<u64>,
    },
}

fn transpose(src: &[u64], rows: usize, cols: usize, k: usize) -> Vec<u64> {
    let mut dst = vec![0u64; src.len()];
    for r in 0..rows {
        for c in 0..cols {
            let s = (r * cols + c) * k;
            let d = (c * rows + r) * k;
            dst[d..d + k].copy_from_slice(&src[s..s + k]);
        }
    }
    dst
}

fn for_rows(
    data: &mut [u64],
    row_words: usize,
    f: impl Fn(usize, &mut [u64]) -> Result<()> + Send + Sync,
) -> Result<()> {
    if data.len() >= PAR_WORDS {
        data.par_chunks_mut(row_words)
            .enumerate()
            .try_for_each(|(i, row)| f(i, row))
    } else {
        data.chunks_mut(row_words)
            .enumerate()
            .try_for_each(|(i, row)| f(i, row))
    }
}

impl Node {
    fn len(&self) -> usize {
        match self {
            Node::Leaf(s) => s.len(),
            Node::Split { n1, n2, .. } => n1 * n2,
        }
    }

    fn depth(&self) -> usize {
        match self {
            Node::Leaf(s) => s.depth(),
            Node::Split { left, right, .. } => left.depth().max(right.depth()),
        }
    }

    fn apply(&self, field: &ExtField, data: &mut [u64]) -> Result<()> {
        let k = field.kappa();
        match self {
            Node::Leaf(s) => s.apply(data),
            Node::Split {
                n1,
                n2,
                left,
                right,
                twiddle,
            } => {
                let (n1, n2) = (*n1, *n2);
                // data[k2][k1] -> t[k1][k2]
                let mut t = transpose(data, n2, n1, k);
                for_rows(&mut t, n2 * k, |k1, row| {
                    right.apply(row)?;
                    if k1 > 0 {
                        let mut tmp = vec![0u64; k];
                        for i2 in 1..n2 {
                            let r = i2 * k..(i2 + 1) * k;
                            let w = (k1 * n2 + i2) * k;
                            field.mul_into(&row[r.clone()], &twiddle[w..w + k], &mut tmp);
                            row[r].copy_from_slice(&tmp);
                        }
                    }
                    Ok(())
                })?;
                // t[k1][i2] -> u[i2][k1]
                let mut u = transpose(&t, n1, n2, k);
                for_rows(&mut u, n1 * k, |_, row| left.apply(field, row))?;
                // u[i2][i1] -> out[i1][i2], i.e. index i1*n2 + i2
                data.copy_from_slice(&transpose(&u, n2, n1, k));
                Ok(())
            }
        }
    }
}

/// Immutable plan for transforms of length `N = Π N_i` with root ω.
pub struct DftPlan {
    field: Arc<ExtField>,
    n: usize,
    factors: Vec<usize>,
    omega: ExtElement,
    roots: Vec<u64>,
    leaves: HashMap<usize, Arc<ShortPlan>>,
    root: Node,
    inv_n: u64,
}

impl std::fmt::Debug for DftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DftPlan")
            .field("n", &self.n)
            .field("factors", &self.factors)
            .field("omega", &self.omega)
            .finish()
    }
}

impl DftPlan {
    /// Plan with default options and Kronecker convolutions in the leaves.
    pub fn new(field: Arc<ExtField>, n: usize, factors: &[usize], omega: ExtElement) -> Result<Self> {
        Self::with_engine(field, n, factors, omega, &DftOptions::default(), &KroneckerEngine)
    }

    pub fn with_engine(
        field: Arc<ExtField>,
        n: usize,
        factors: &[usize],
        omega: ExtElement,
        opts: &DftOptions,
        engine: &dyn CyclicEngine,
    ) -> Result<Self> {
        if factors.contains(&0) {
            return Err(invalid("transform factors must be positive"));
        }
        let prod: u128 = factors.iter().map(|&f| f as u128).product();
        if prod != n as u128 {
            return Err(invalid(format!(
                "factors {factors:?} multiply to {prod}, not {n}"
            )));
        }
        check_root(&field, &omega, n)?;
        let ctx = *field.ctx();
        let inv_n = fp_inv(ctx.reduce(n as u64), &ctx)?;
        let k = field.kappa();
        let roots = power_table(&field, &omega, n);
        let last = field.wrap(roots[(n - 1) * k..].to_vec());
        if field.mul(&last, &omega) != field.one() {
            return Err(Error::BadRoot("root table is inconsistent".into()));
        }
        let factors: Vec<usize> = if factors.is_empty() { vec![1] } else { factors.to_vec() };
        let mut leaves: HashMap<usize, Arc<ShortPlan>> = HashMap::new();
        for &m in &factors {
            if leaves.contains_key(&m) {
                continue;
            }
            let e = ((n / m) % n) * k;
            let w = field.wrap(roots[e..e + k].to_vec());
            let leaf = ShortPlan::new(field.clone(), &w, m, opts, engine)?;
            leaves.insert(m, Arc::new(leaf));
        }
        // left-nested: node for factors[..=j] = node(factors[..j]) ⊙ factors[j]
        let mut node = Node::Leaf(leaves[&factors[0]].clone());
        for &m in &factors[1..] {
            let n1 = node.len();
            let n2 = m;
            let stride = n / (n1 * n2);
            let mut twiddle = vec![0u64; n1 * n2 * k];
            for k1 in 0..n1 {
                for i2 in 0..n2 {
                    let e = (k1 * i2 % (n1 * n2)) * stride;
                    let d = (k1 * n2 + i2) * k;
                    twiddle[d..d + k].copy_from_slice(&roots[e * k..(e + 1) * k]);
                }
            }
            node = Node::Split {
                n1,
                n2,
                left: Box::new(node),
                right: leaves[&m].clone(),
                twiddle,
            };
        }
        Ok(DftPlan {
            field,
            n,
            factors,
            omega,
            roots,
            leaves,
            root: node,
            inv_n,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn field(&self) -> &Arc<ExtField> {
        &self.field
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn omega(&self) -> &ExtElement {
        &self.omega
    }

    /// `ω^j` for `j < N`.
    pub fn root_power(&self, j: usize) -> ExtElement {
        let k = self.field.kappa();
        let j = j % self.n;
        self.field.wrap(self.roots[j * k..(j + 1) * k].to_vec())
    }

    /// Short plan used for leaves of length `m`.
    pub fn leaf(&self, m: usize) -> Option<&ShortPlan> {
        self.leaves.get(&m).map(|a| a.as_ref())
    }

    /// `1/N` in F_p.
    pub fn inv_len(&self) -> u64 {
        self.inv_n
    }

    /// Deepest recursion reached by any leaf convolution.
    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n * self.field.kappa() {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: len / self.field.kappa().max(1),
            });
        }
        Ok(())
    }

    /// Forward transform on flat data.
    pub(crate) fn forward_raw(&self, data: &mut [u64]) -> Result<()> {
        self.check_len(data.len())?;
        self.root.apply(&self.field, data)
    }

    /// `out[i] = data[(N - i) mod N]` in place.
    pub(crate) fn reverse_indices(&self, data: &mut [u64]) {
        let k = self.field.kappa();
        for i in 1..self.n.div_ceil(2) {
            let j = self.n - i;
            for c in 0..k {
                data.swap(i * k + c, j * k + c);
            }
        }
    }

    /// Inverse transform on flat data: forward, index reversal, scale by 1/N.
    pub(crate) fn inverse_raw(&self, data: &mut [u64]) -> Result<()> {
        self.forward_raw(data)?;
        self.reverse_indices(data);
        let ctx = *self.field.ctx();
        for c in data.iter_mut() {
            *c = ctx.mul(*c, self.inv_n);
        }
        Ok(())
    }

    pub fn dft(&self, a: &[ExtElement]) -> Result<Vec<ExtElement>> {
        if a.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: a.len(),
            });
        }
        let mut data = flatten(&self.field, a)?;
        self.forward_raw(&mut data)?;
        Ok(unflatten(&self.field, &data))
    }

    pub fn idft(&self, a: &[ExtElement]) -> Result<Vec<ExtElement>> {
        if a.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: a.len(),
            });
        }
        let mut data = flatten(&self.field, a)?;
        self.inverse_raw(&mut data)?;
        Ok(unflatten(&self.field, &data))
    }

    /// Transform of a fixed convolution operand, pre-scaled by 1/N.
    pub fn prepare(&self, b: &[ExtElement]) -> Result<PreparedOperand> {
        if b.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let data = flatten(&self.field, b)?;
        self.prepare_raw(data)
    }

    pub(crate) fn prepare_raw(&self, mut data: Vec<u64>) -> Result<PreparedOperand> {
        self.forward_raw(&mut data)?;
        let ctx = *self.field.ctx();
        for c in data.iter_mut() {
            *c = ctx.mul(*c, self.inv_n);
        }
        Ok(PreparedOperand {
            field_id: self.field.id(),
            n: self.n,
            spectrum: data,
        })
    }

    /// `a · b̂` pointwise, forward transform again and reverse: the cyclic
    /// product with the prepared operand.
    pub(crate) fn convolve_prepared_raw(&self, a: &mut [u64], b: &PreparedOperand) -> Result<()> {
        if b.field_id != self.field.id() || b.n != self.n {
            return Err(Error::FieldMismatch);
        }
        self.forward_raw(a)?;
        let k = self.field.kappa();
        let field = &*self.field;
        let spec = &b.spectrum;
        let mul_rows = |(i, x): (usize, &mut [u64])| {
            let mut tmp = vec![0u64; k];
            field.mul_into(x, &spec[i * k..(i + 1) * k], &mut tmp);
            x.copy_from_slice(&tmp);
        };
        if a.len() >= PAR_WORDS {
            a.par_chunks_mut(k).enumerate().for_each(mul_rows);
        } else {
            a.chunks_mut(k).enumerate().for_each(mul_rows);
        }
        self.forward_raw(a)?;
        self.reverse_indices(a);
        Ok(())
    }

    pub fn cyclic_convolve_prepared(&self, a: &[ExtElement], b: &PreparedOperand) -> Result<Vec<ExtElement>> {
        if a.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: a.len(),
            });
        }
        let mut data = flatten(&self.field, a)?;
        self.convolve_prepared_raw(&mut data, b)?;
        Ok(unflatten(&self.field, &data))
    }
}

/// Spectrum of a fixed operand, already multiplied by 1/N.
#[derive(Clone, Debug)]
pub struct PreparedOperand {
    field_id: u64,
    n: usize,
    spectrum: Vec<u64>,
}

/// `a · b mod (X^N - 1)` over the field through the plan's transforms.
pub fn cyclic_convolve(plan: &DftPlan, a: &[ExtElement], b: &[ExtElement]) -> Result<Vec<ExtElement>> {
    let prepared = plan.prepare(b)?;
    plan.cyclic_convolve_prepared(a, &prepared)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ext_field::{find_irreducible, find_root_of_order};
    use crate::prime_field::PrimeContext;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fp(p: u64) -> Arc<ExtField> {
        Arc::new(ExtField::prime_field(PrimeContext::new(p).unwrap()))
    }

    fn elems(f: &ExtField, v: &[u64]) -> Vec<ExtElement> {
        v.iter().map(|&c| f.scalar(c)).collect()
    }

    fn scalars(v: &[ExtElement]) -> Vec<u64> {
        v.iter().map(|e| e.coeffs()[0]).collect()
    }

    #[test]
    fn direct_examples() {
        let f = fp(5);
        let w = f.scalar(2);
        let d = |v: &[u64]| scalars(&dft_direct(&f, &elems(&f, v), &w).unwrap());
        assert_eq!(d(&[1, 0, 0, 0]), vec![1, 1, 1, 1]);
        assert_eq!(d(&[1, 1, 1, 1]), vec![4, 0, 0, 0]);
        assert_eq!(d(&[1, 2, 3, 4]), vec![0, 4, 3, 2]);
        assert!(dft_direct(&f, &elems(&f, &[1, 2, 3]), &w).is_err());
    }

    #[test]
    fn plan_examples() {
        let f = fp(13);
        let plan = DftPlan::new(f.clone(), 12, &[3, 4], f.scalar(2)).unwrap();
        assert_eq!(plan.root_power(3).coeffs(), &[8]);
        assert_eq!(plan.root_power(4).coeffs(), &[3]);
        assert_eq!(plan.leaf(4).unwrap().len(), 4);
        let trivial = DftPlan::new(f.clone(), 1, &[1], f.one()).unwrap();
        assert_eq!(trivial.dft(&elems(&f, &[7])).unwrap(), elems(&f, &[7]));
        assert!(matches!(
            DftPlan::new(f.clone(), 2, &[2], f.one()),
            Err(Error::BadRoot(_))
        ));
        assert!(DftPlan::new(f.clone(), 12, &[3, 5], f.scalar(2)).is_err());
    }

    #[test]
    fn plans_match_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let c = PrimeContext::new(13).unwrap();
        let f = Arc::new(find_irreducible(&c, 2, 3).unwrap());
        // 13^2 - 1 = 168 = 2^3 * 3 * 7
        let cases: &[(usize, &[usize])] = &[
            (12, &[2, 2, 3]),
            (12, &[3, 4]),
            (24, &[2, 3, 4]),
            (56, &[8, 7]),
            (168, &[8, 3, 7]),
            (168, &[24, 7]),
            (84, &[84]),
        ];
        for &(n, factors) in cases {
            let fac = factor_u64(n as u64);
            let w = find_root_of_order(&f, n as u64, &fac, 1).unwrap();
            let plan = DftPlan::new(f.clone(), n, factors, w.clone()).unwrap();
            for _ in 0..3 {
                let a: Vec<_> = (0..n).map(|_| f.random(&mut rng)).collect();
                let want = dft_direct(&f, &a, &w).unwrap();
                let got = plan.dft(&a).unwrap();
                assert_eq!(got, want, "n={n} factors={factors:?}");
                assert_eq!(plan.idft(&got).unwrap(), a);
                assert_eq!(plan.dft(&plan.idft(&a).unwrap()).unwrap(), a);
            }
        }
    }

    #[test]
    fn bluestein_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let f7 = fp(7);
        let a: Vec<_> = (0..3).map(|_| f7.random(&mut rng)).collect();
        let w = f7.scalar(2);
        assert_eq!(bluestein(&f7, &w, 3, &a).unwrap(), dft_direct(&f7, &a, &w).unwrap());
        let f5 = fp(5);
        let a: Vec<_> = (0..4).map(|_| f5.random(&mut rng)).collect();
        let w = f5.scalar(2);
        assert_eq!(bluestein(&f5, &w, 4, &a).unwrap(), dft_direct(&f5, &a, &w).unwrap());
        let out = bluestein(&f5, &f5.scalar(4), 2, &elems(&f5, &[3, 1])).unwrap();
        assert_eq!(scalars(&out), vec![4, 2]);
        let f2 = Arc::new(find_irreducible(&PrimeContext::new(2).unwrap(), 2, 0).unwrap());
        let w3 = find_root_of_order(&f2, 3, &[(3, 1)], 0).unwrap();
        assert!(bluestein(&f2, &f2.pow(&w3, 1), 3, &[f2.one(), f2.zero(), f2.zero()]).is_ok());
    }

    #[test]
    fn bluestein_both_parities_long() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        // 257 - 1 = 256 and 3^4 - 1 = 80
        let f = fp(257);
        for n in [2usize, 4, 8, 16, 32, 64, 128] {
            let w = find_root_of_order(&f, n as u64, &factor_u64(n as u64), 0).unwrap();
            let a: Vec<_> = (0..n).map(|_| f.random(&mut rng)).collect();
            assert_eq!(bluestein(&f, &w, n, &a).unwrap(), dft_direct(&f, &a, &w).unwrap(), "n={n}");
        }
        let g = Arc::new(find_irreducible(&PrimeContext::new(3).unwrap(), 4, 2).unwrap());
        for n in [5usize, 10, 16, 20, 40, 80] {
            let w = find_root_of_order(&g, n as u64, &factor_u64(n as u64), 1).unwrap();
            let a: Vec<_> = (0..n).map(|_| g.random(&mut rng)).collect();
            assert_eq!(bluestein(&g, &w, n, &a).unwrap(), dft_direct(&g, &a, &w).unwrap(), "n={n}");
        }
    }

    #[test]
    fn odd_weights_match_exponentiation() {
        // 3^5 - 1 = 242 = 2 * 11^2
        let c3 = PrimeContext::new(3).unwrap();
        let g = Arc::new(find_irreducible(&c3, 5, 1).unwrap());
        let w = find_root_of_order(&g, 121, &[(11, 2)], 0).unwrap();
        let plan = ShortPlan::bluestein(g.clone(), &w, 121, &DftOptions::default(), &KroneckerEngine).unwrap();
        if let ShortKind::Bluestein { f: fw, out_w, .. } = &plan.kind {
            let k = g.kappa();
            for i in 0..121u64 {
                let e = (i * i - i) / 2;
                assert_eq!(&fw[i as usize * k..(i as usize + 1) * k], g.pow(&w, e).coeffs());
                let e = (i * i + i) / 2;
                assert_eq!(&out_w[i as usize * k..(i as usize + 1) * k], g.pow(&w, e).coeffs());
            }
        } else {
            panic!("expected a Bluestein plan");
        }
    }

    #[test]
    fn convolution_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let c = PrimeContext::new(5).unwrap();
        let f = Arc::new(find_irreducible(&c, 2, 5).unwrap());
        // 24 = 2^3 * 3
        let w = find_root_of_order(&f, 24, &[(2, 3), (3, 1)], 0).unwrap();
        let plan = DftPlan::new(f.clone(), 24, &[2, 3, 4], w).unwrap();
        let rand_vec = |rng: &mut ChaCha8Rng| -> Vec<ExtElement> { (0..24).map(|_| f.random(rng)).collect() };
        let naive = |a: &[ExtElement], b: &[ExtElement]| {
            let mut out = vec![f.zero(); 24];
            for i in 0..24 {
                for j in 0..24 {
                    out[(i + j) % 24] = f.add(&out[(i + j) % 24], &f.mul(&a[i], &b[j]));
                }
            }
            out
        };
        let mut delta = vec![f.zero(); 24];
        delta[0] = f.one();
        for _ in 0..5 {
            let a = rand_vec(&mut rng);
            let b = rand_vec(&mut rng);
            let d = rand_vec(&mut rng);
            let ab = cyclic_convolve(&plan, &a, &b).unwrap();
            assert_eq!(ab, naive(&a, &b));
            assert_eq!(cyclic_convolve(&plan, &a, &delta).unwrap(), a);
            assert_eq!(ab, cyclic_convolve(&plan, &b, &a).unwrap());
            let prepared = plan.prepare(&b).unwrap();
            assert_eq!(plan.cyclic_convolve_prepared(&a, &prepared).unwrap(), ab);
            let ab_d = cyclic_convolve(&plan, &ab, &d).unwrap();
            let bd = cyclic_convolve(&plan, &b, &d).unwrap();
            assert_eq!(ab_d, cyclic_convolve(&plan, &a, &bd).unwrap());
            // convolution theorem
            let lhs = plan.dft(&ab).unwrap();
            let fa = plan.dft(&a).unwrap();
            let fb = plan.dft(&b).unwrap();
            let rhs: Vec<_> = fa.iter().zip(&fb).map(|(x, y)| f.mul(x, y)).collect();
            assert_eq!(lhs, rhs);
            // linearity
            let sum: Vec<_> = a.iter().zip(&b).map(|(x, y)| f.add(x, y)).collect();
            let fs = plan.dft(&sum).unwrap();
            let fsum: Vec<_> = fa.iter().zip(&fb).map(|(x, y)| f.add(x, y)).collect();
            assert_eq!(fs, fsum);
        }
    }
}
