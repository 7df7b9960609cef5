//! Weighted splitting of `F_p[X]/(X^n - 1)` into `F_{p^κ}[Y]/(Y^N - 1)`.
//!
//! `u` is cut at `e_i = ⌈ni/N⌉`; chunk `i` becomes an element of the field by
//! `X ↦ Z` and is scaled by `θ^{c_i}` with `c_i = N e_i - n i` and `θ^N = Z`.
//! A cyclic product of the weighted sequences, unweighted and overlap-added
//! at the offsets `e_i`, is `u v mod (X^n - 1)`.

use std::sync::Arc;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::ext_field::{find_irreducible, ExtElement, ExtField};
use crate::linalg::{rank, solve, Matrix};
use crate::prime_field::{FpPoly, PrimeContext};

const PAR_CHUNKS: usize = 1 << 12;

/// Finds a modulus P of degree κ and θ in F_p[Z]/P with `θ^N = Z`.
///
/// Random ζ in some field of degree κ is accepted when `1, ζ^N, ..., ζ^{(κ-1)N}`
/// are independent; P is then the minimal polynomial of `ζ^N` and θ the
/// preimage of ζ under `Z ↦ ζ^N`.
pub fn find_theta(ctx: &PrimeContext, kappa: usize, n: u64, seed: u64) -> Result<(ExtField, ExtElement)> {
    if kappa == 0 || n == 0 {
        return Err(invalid("κ and N must be positive"));
    }
    let size = BigUint::from(ctx.p()).pow(kappa as u32);
    if size <= BigUint::from(n) * n {
        return Err(invalid(format!(
            "θ search needs p^(κ/2) > N (p={}, κ={kappa}, N={n})",
            ctx.p()
        )));
    }
    let base = find_irreducible(ctx, kappa, seed)?;
    if n == 1 {
        let z = base.generator();
        return Ok((base, z));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e7a);
    let cap = (64 * kappa).max(256);
    for _ in 0..cap {
        let zeta = base.random(&mut rng);
        if zeta.is_zero() {
            continue;
        }
        let alpha = base.pow(&zeta, n);
        let mut powers = Vec::with_capacity(kappa + 1);
        let mut acc = base.one();
        for _ in 0..=kappa {
            powers.push(acc.coeffs().to_vec());
            acc = base.mul(&acc, &alpha);
        }
        let b = Matrix::from_columns(kappa, &powers[..kappa]);
        if rank(ctx, &b) < kappa {
            continue;
        }
        let sol = solve(ctx, &b, &[powers[kappa].clone(), zeta.coeffs().to_vec()])
            .ok_or_else(|| Error::SearchExhausted("basis change is singular".into()))?;
        let mut modulus: Vec<u64> = sol[0].iter().map(|&c| ctx.neg(c)).collect();
        modulus.push(1);
        let field = ExtField::new(*ctx, modulus)?;
        let theta = field.element(sol[1].clone())?;
        if field.pow(&theta, n) != field.generator() {
            return Err(Error::BadRoot("θ^N ≠ Z after basis change".into()));
        }
        return Ok((field, theta));
    }
    Err(Error::SearchExhausted(format!(
        "no θ with θ^{n} = Z in degree {kappa} after {cap} trials"
    )))
}

/// Split positions, weights and unweights for one `(n, N)` pair.
#[derive(Clone, Debug)]
pub struct CfPlan {
    n: usize,
    big_n: usize,
    field: Arc<ExtField>,
    theta: ExtElement,
    /// `e_0..e_N` with `e_N = n`
    e: Vec<usize>,
    c: Vec<usize>,
    weights: Vec<u64>,
    unweights: Vec<u64>,
}

/// Builds the split tables incrementally: `c_{i+1}` is `c_i - r` or
/// `c_i - r + N` (`n = qN + r`), so each weight is the previous one times one
/// of two fixed factors.
pub fn cf_plan(n: usize, big_n: usize, field: Arc<ExtField>, theta: ExtElement) -> Result<CfPlan> {
    if big_n == 0 || big_n > n {
        return Err(invalid(format!("need 1 <= N <= n, got N={big_n}, n={n}")));
    }
    let kappa = field.kappa();
    let width = n.div_ceil(big_n);
    if kappa < 2 * width {
        return Err(invalid(format!(
            "need κ >= 2⌈n/N⌉ = {}, got κ={kappa}",
            2 * width
        )));
    }
    field.check(&theta)?;
    if field.pow(&theta, big_n as u64) != field.generator() {
        return Err(Error::BadRoot("θ^N ≠ Z".into()));
    }
    let (q, r) = (n / big_n, n % big_n);
    let mut e = Vec::with_capacity(big_n + 1);
    let mut c = Vec::with_capacity(big_n);
    let (mut ei, mut ci) = (0usize, 0usize);
    for _ in 0..big_n {
        e.push(ei);
        c.push(ci);
        if ci >= r {
            ei += q;
            ci -= r;
        } else {
            ei += q + 1;
            ci = ci + big_n - r;
        }
    }
    e.push(ei);
    debug_assert_eq!(ei, n);

    let k = kappa;
    let mut weights = Vec::with_capacity(big_n * k);
    let mut unweights = Vec::with_capacity(big_n * k);
    if r == 0 {
        let one = field.one();
        for _ in 0..big_n {
            weights.extend_from_slice(one.coeffs());
            unweights.extend_from_slice(one.coeffs());
        }
    } else {
        // θ^{-1} = θ^{N-1} Z^{-1}
        let z_inv = field.inv(&field.generator())?;
        let theta_inv = field.mul(&field.pow(&theta, big_n as u64 - 1), &z_inv);
        let down = field.pow(&theta_inv, r as u64);
        let down_wrap = field.pow(&theta, (big_n - r) as u64);
        let up = field.pow(&theta, r as u64);
        let up_wrap = field.mul(&up, &z_inv);
        let mut w = field.one();
        let mut u = field.one();
        for i in 0..big_n {
            weights.extend_from_slice(w.coeffs());
            unweights.extend_from_slice(u.coeffs());
            if i + 1 < big_n {
                if c[i] >= r {
                    w = field.mul(&w, &down);
                    u = field.mul(&u, &up);
                } else {
                    w = field.mul(&w, &down_wrap);
                    u = field.mul(&u, &up_wrap);
                }
            }
        }
    }
    Ok(CfPlan {
        n,
        big_n,
        field,
        theta,
        e,
        c,
        weights,
        unweights,
    })
}

impl CfPlan {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn big_n(&self) -> usize {
        self.big_n
    }

    pub fn field(&self) -> &Arc<ExtField> {
        &self.field
    }

    pub fn theta(&self) -> &ExtElement {
        &self.theta
    }

    /// `e_0..e_{N-1}`.
    pub fn split_positions(&self) -> &[usize] {
        &self.e[..self.big_n]
    }

    pub fn residues(&self) -> &[usize] {
        &self.c
    }

    pub fn weight(&self, i: usize) -> ExtElement {
        let k = self.field.kappa();
        self.field.wrap(self.weights[i * k..(i + 1) * k].to_vec())
    }

    pub fn unweight(&self, i: usize) -> ExtElement {
        let k = self.field.kappa();
        self.field.wrap(self.unweights[i * k..(i + 1) * k].to_vec())
    }

    pub(crate) fn split_weight_raw(&self, u: &[u64]) -> Vec<u64> {
        let k = self.field.kappa();
        let mut out = vec![0u64; self.big_n * k];
        let field = &*self.field;
        let job = |(i, dst): (usize, &mut [u64])| {
            let (lo, hi) = (self.e[i].min(u.len()), self.e[i + 1].min(u.len()));
            if lo >= hi {
                return;
            }
            let mut chunk = vec![0u64; k];
            chunk[..hi - lo].copy_from_slice(&u[lo..hi]);
            field.mul_into(&chunk, &self.weights[i * k..(i + 1) * k], dst);
        };
        if self.big_n >= PAR_CHUNKS {
            out.par_chunks_mut(k).enumerate().for_each(job);
        } else {
            out.chunks_mut(k).enumerate().for_each(job);
        }
        out
    }

    pub(crate) fn recombine_raw(&self, w: &[u64]) -> Vec<u64> {
        let k = self.field.kappa();
        let field = &*self.field;
        let ctx = *field.ctx();
        let unweight = |i: usize| {
            let mut t = vec![0u64; k];
            field.mul_into(&w[i * k..(i + 1) * k], &self.unweights[i * k..(i + 1) * k], &mut t);
            t
        };
        let pieces: Vec<Vec<u64>> = if self.big_n >= PAR_CHUNKS {
            (0..self.big_n).into_par_iter().map(unweight).collect()
        } else {
            (0..self.big_n).map(unweight).collect()
        };
        let mut out = vec![0u64; self.n];
        for (i, piece) in pieces.iter().enumerate() {
            let base = self.e[i];
            for (j, &v) in piece.iter().enumerate() {
                if v != 0 {
                    let t = (base + j) % self.n;
                    out[t] = ctx.add(out[t], v);
                }
            }
        }
        out
    }
}

/// Chunks `u` at the split positions and weights chunk `i` by `θ^{c_i}`.
pub fn cf_split_weight(u: &FpPoly, plan: &CfPlan) -> Result<Vec<ExtElement>> {
    plan.field.ctx().check_same(u.ctx())?;
    if u.significant_len() > plan.n {
        return Err(Error::LengthMismatch {
            expected: plan.n,
            got: u.significant_len(),
        });
    }
    let raw = plan.split_weight_raw(&u.coeffs()[..u.significant_len()]);
    Ok(crate::dft::unflatten(&plan.field, &raw))
}

/// Unweights by `θ^{-c_i}` and overlap-adds at `e_i` modulo `X^n - 1`.
pub fn cf_recombine(w: &[ExtElement], plan: &CfPlan) -> Result<FpPoly> {
    if w.len() != plan.big_n {
        return Err(Error::LengthMismatch {
            expected: plan.big_n,
            got: w.len(),
        });
    }
    let flat = crate::dft::flatten(&plan.field, w)?;
    Ok(FpPoly::from_raw(*plan.field.ctx(), plan.recombine_raw(&flat)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ext_field::ext_poly_multiply;
    use crate::prime_field::poly_cyclic_naive;
    use rand::Rng;

    fn ctx(p: u64) -> PrimeContext {
        PrimeContext::new(p).unwrap()
    }

    fn plan_for(p: u64, n: usize, big_n: usize, kappa: usize, seed: u64) -> CfPlan {
        let (f, t) = find_theta(&ctx(p), kappa, big_n as u64, seed).unwrap();
        cf_plan(n, big_n, Arc::new(f), t).unwrap()
    }

    /// Cyclic product over the extension via one bivariate Kronecker product.
    fn convolve(plan: &CfPlan, a: &[ExtElement], b: &[ExtElement]) -> Vec<ExtElement> {
        let f = plan.field();
        let full = ext_poly_multiply(f, a, b).unwrap();
        let mut out = vec![f.zero(); plan.big_n()];
        for (i, x) in full.iter().enumerate() {
            let t = i % plan.big_n();
            out[t] = f.add(&out[t], x);
        }
        out
    }

    #[test]
    fn theta_examples() {
        let (f, t) = find_theta(&ctx(2), 4, 3, 0).unwrap();
        assert_eq!(f.modulus(), &[1, 1, 1, 1, 1]);
        assert_eq!(f.pow(&t, 3), f.generator());
        let (f, t) = find_theta(&ctx(5), 3, 1, 0).unwrap();
        assert_eq!(t, f.generator());
        assert!(find_theta(&ctx(2), 2, 5, 0).is_err());
    }

    #[test]
    fn no_cube_root_of_z_in_standard_gf16() {
        let f = ExtField::new(ctx(2), vec![1, 1, 0, 0, 1]).unwrap();
        let z = f.generator();
        for code in 0..16u64 {
            let x = f.element((0..4).map(|i| code >> i & 1).collect()).unwrap();
            assert_ne!(f.pow(&x, 3), z);
        }
    }

    #[test]
    fn plan_tables() {
        let plan = plan_for(3, 10, 4, 6, 1);
        assert_eq!(plan.split_positions(), &[0, 3, 5, 8]);
        assert_eq!(plan.residues(), &[0, 2, 0, 2]);
        let widths: Vec<usize> = plan.e.windows(2).map(|w| w[1] - w[0]).collect();
        assert_eq!(widths, vec![3, 2, 3, 2]);
        let plan = plan_for(3, 8, 4, 4, 1);
        assert_eq!(plan.residues(), &[0, 0, 0, 0]);
        for i in 0..4 {
            assert_eq!(plan.weight(i), plan.field().one());
        }
    }

    #[test]
    fn plan_rejects_bad_parameters() {
        let (f, t) = find_theta(&ctx(3), 4, 4, 1).unwrap();
        let f = Arc::new(f);
        assert!(cf_plan(10, 4, f.clone(), t.clone()).is_err()); // κ < 6
        assert!(cf_plan(3, 4, f.clone(), t.clone()).is_err()); // N > n
        assert!(cf_plan(8, 4, f.clone(), f.generator()).is_err()); // θ^N ≠ Z
    }

    #[test]
    fn split_examples() {
        let plan = plan_for(3, 8, 4, 4, 2);
        let c = ctx(3);
        let u = FpPoly::new(c, vec![1, 0, 0, 0, 1]).unwrap();
        let s = cf_split_weight(&u, &plan).unwrap();
        let f = plan.field();
        assert_eq!(s, vec![f.one(), f.zero(), f.one(), f.zero()]);
        assert!(cf_split_weight(&FpPoly::zero(c), &plan).unwrap().iter().all(|x| x.is_zero()));
        let plan = plan_for(3, 10, 4, 6, 2);
        let s = cf_split_weight(&FpPoly::monomial(c, 3, 1), &plan).unwrap();
        let f = plan.field();
        assert_eq!(s, vec![f.zero(), plan.weight(1), f.zero(), f.zero()]);
        assert_eq!(plan.weight(1), f.pow(plan.theta(), 2));
    }

    #[test]
    fn tables_are_consistent() {
        for (p, n, big_n, kappa) in [(3u64, 10usize, 4usize, 6usize), (2, 37, 5, 16), (7, 100, 9, 24), (13, 64, 7, 20)] {
            let plan = plan_for(p, n, big_n, kappa, 3);
            let f = plan.field();
            for i in 0..big_n {
                assert_eq!(f.mul(&plan.weight(i), &plan.unweight(i)), f.one());
                assert_eq!(plan.weight(i), f.pow(plan.theta(), plan.residues()[i] as u64));
                assert!(plan.residues()[i] < big_n);
            }
            let (q, r) = (n / big_n, n % big_n);
            for w in plan.e.windows(2) {
                assert!(w[1] - w[0] == q || w[1] - w[0] == q + (r > 0) as usize);
            }
            // c_{i1} + c_{i2} - c_{(i1+i2) mod N} = N·δ with δ ∈ {0, 1}
            for i1 in 0..big_n {
                for i2 in 0..big_n {
                    let i = (i1 + i2) % big_n;
                    let d = plan.c[i1] as i64 + plan.c[i2] as i64 - plan.c[i] as i64;
                    assert!(d == 0 || d == big_n as i64, "δ out of range");
                }
            }
        }
    }

    #[test]
    fn pipeline_matches_naive_cyclic() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..40 {
            let p = [2u64, 3, 5, 7, 101][rng.random_range(0..5)];
            let n = rng.random_range(1..=300usize);
            let big_n = rng.random_range((n / 16).max(1)..=n.min(40));
            let width = n.div_ceil(big_n);
            let mut kappa = 2 * width;
            while BigUint::from(p).pow(kappa as u32) <= BigUint::from(big_n * big_n) {
                kappa += 1;
            }
            let plan = plan_for(p, n, big_n, kappa, rng.random());
            let c = ctx(p);
            let u = FpPoly::new(c, (0..n).map(|_| rng.random_range(0..p)).collect()).unwrap();
            let v = FpPoly::new(c, (0..n).map(|_| rng.random_range(0..p)).collect()).unwrap();
            let w = convolve(&plan, &cf_split_weight(&u, &plan).unwrap(), &cf_split_weight(&v, &plan).unwrap());
            let got = cf_recombine(&w, &plan).unwrap();
            assert_eq!(got, poly_cyclic_naive(&u, &v, n).unwrap(), "p={p} n={n} N={big_n} κ={kappa}");
        }
        let plan = plan_for(5, 12, 5, 6, 9);
        let delta = FpPoly::one(ctx(5));
        let s = cf_split_weight(&delta, &plan).unwrap();
        let out = cf_recombine(&convolve(&plan, &s, &s), &plan).unwrap();
        assert_eq!(out, delta);
        let zeros = vec![plan.field().zero(); 5];
        assert!(cf_recombine(&zeros, &plan).unwrap().is_zero());
    }
}
