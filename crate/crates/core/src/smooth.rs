//! Smooth multiplicative orders: `H_λ`, the choice of λ, the modulus-order
//! `M | p^λ - 1`, and packaging the prime factors of `M` into transform lengths.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{invalid, Error, Result};
use crate::prime_field::{is_prime, PrimeContext};

/// Prime factorization as `(prime, exponent)` pairs, primes ascending.
pub type Factorization = Vec<(u64, u32)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SmoothConfig {
    /// λ is accepted once `M >= target_multiple * n`.
    pub target_multiple: u64,
    /// Multiply in the whole (λ+1)-smooth part of `p^λ - 1`.
    pub accidental_factors: bool,
    pub lambda_max: u64,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        SmoothConfig {
            target_multiple: 2,
            accidental_factors: false,
            lambda_max: 10_000,
        }
    }
}

fn divisors(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

pub fn factorization_value(f: &[(u64, u32)]) -> BigUint {
    f.iter()
        .fold(BigUint::one(), |acc, &(q, e)| acc * BigUint::from(q).pow(e))
}

/// `H_λ = Π q` over primes `q` with `(q - 1) | λ`, with its prime list.
pub fn compute_h(lambda: u64) -> Result<(BigUint, Vec<u64>)> {
    if lambda == 0 {
        return Err(invalid("λ must be positive"));
    }
    let primes: Vec<u64> = divisors(lambda)
        .into_iter()
        .map(|d| d + 1)
        .filter(|&q| is_prime(q))
        .collect();
    let value = primes.iter().fold(BigUint::one(), |acc, &q| acc * q);
    Ok((value, primes))
}

/// Exponents of the primes `<= bound` in `value`, by trial division.
pub fn smooth_part(value: &BigUint, bound: u64) -> Factorization {
    let mut out = Vec::new();
    if value.is_zero() {
        return out;
    }
    let mut v = value.clone();
    for q in 2..=bound {
        if !is_prime(q) {
            continue;
        }
        let mut e = 0;
        loop {
            let (quot, rem) = v.div_rem(&BigUint::from(q));
            if !rem.is_zero() {
                break;
            }
            v = quot;
            e += 1;
        }
        if e > 0 {
            out.push((q, e));
        }
    }
    out
}

/// The smooth order `M` for a given λ and its factorization.
///
/// Without enrichment, `M = H_λ / p` if `p | H_λ` and `H_λ` otherwise; with
/// enrichment, the full (λ+1)-smooth part of `p^λ - 1`.
pub fn build_m(ctx: &PrimeContext, lambda: u64, cfg: &SmoothConfig) -> Result<(BigUint, Factorization)> {
    if lambda < 2 {
        return Err(invalid("λ must be at least 2"));
    }
    let factors = if cfg.accidental_factors {
        let order = BigUint::from(ctx.p()).pow(lambda as u32) - 1u32;
        smooth_part(&order, lambda + 1)
    } else {
        let (_, primes) = compute_h(lambda)?;
        primes
            .into_iter()
            .filter(|&q| q != ctx.p())
            .map(|q| (q, 1))
            .collect()
    };
    Ok((factorization_value(&factors), factors))
}

/// `Σ log2 q` over primes with `(q-1) | λ`, for every λ up to `max`, by
/// striding each prime's contribution across the multiples of `q - 1`.
fn log_h_sieve(max: u64) -> Vec<f64> {
    let size = max as usize + 1;
    let mut composite = vec![false; size + 1];
    let mut log_h = vec![0.0f64; size];
    for q in 2..=size {
        if composite[q] {
            continue;
        }
        let mut m = q * q;
        while m <= size {
            composite[m] = true;
            m += q;
        }
        let step = q - 1;
        let lq = (q as f64).log2();
        let mut l = step;
        while l < size {
            log_h[l] += lq;
            l += step;
        }
    }
    log_h
}

/// Result of the λ search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LambdaChoice {
    pub lambda: u64,
    pub m: BigUint,
    pub factors: Factorization,
}

/// Smallest `λ >= 2` (and `>= start`) whose smooth order reaches
/// `cfg.target_multiple * n`.
pub fn choose_lambda(ctx: &PrimeContext, n: u64, cfg: &SmoothConfig) -> Result<LambdaChoice> {
    choose_lambda_from(ctx, n, cfg, 2)
}

pub(crate) fn choose_lambda_from(
    ctx: &PrimeContext,
    n: u64,
    cfg: &SmoothConfig,
    start: u64,
) -> Result<LambdaChoice> {
    if n < 2 {
        return Err(invalid("target length must be at least 2"));
    }
    let target = BigUint::from(cfg.target_multiple.max(1)) * n;
    let log_target = (target.bits() as f64 - 1.0).max(0.0);
    let sieve = if cfg.accidental_factors {
        None
    } else {
        Some(log_h_sieve(cfg.lambda_max))
    };
    for lambda in start.max(2)..=cfg.lambda_max {
        // M <= H_λ without enrichment, so a small log H_λ rules λ out
        if let Some(s) = &sieve {
            if s[lambda as usize] + 1e-6 < log_target {
                continue;
            }
        }
        let (m, factors) = build_m(ctx, lambda, cfg)?;
        if m >= target {
            return Ok(LambdaChoice { lambda, m, factors });
        }
    }
    Err(Error::SearchExhausted(format!(
        "no λ <= {} gives a smooth order >= {target}",
        cfg.lambda_max
    )))
}

/// Packages prime factors of `M` into lengths `N_1..N_d`.
///
/// Units are the prime factors repeated by multiplicity, ascending. Takes the
/// shortest prefix whose product reaches `L`, then repeatedly merges the two
/// smallest entries (ties: smaller value, then earlier position) while any
/// entry is below `S`.
pub fn package_lengths(factors: &[(u64, u32)], l: u64, s: u64) -> Result<Vec<u64>> {
    let m = factorization_value(factors);
    if s < 1 || s >= l || BigUint::from(l) >= m {
        return Err(invalid(format!(
            "packaging needs 1 <= S < L < M, got S={s}, L={l}, M={m}"
        )));
    }
    let mut units: Vec<u64> = factors
        .iter()
        .flat_map(|&(q, e)| std::iter::repeat_n(q, e as usize))
        .collect();
    units.sort_unstable();
    let mut prefix = Vec::new();
    let mut prod: u128 = 1;
    for &u in &units {
        if prod >= l as u128 {
            break;
        }
        prefix.push(u);
        prod *= u as u128;
    }
    // (value, insertion order) kept sorted so the head is always the smallest
    let mut entries: Vec<(u64, usize)> = prefix.into_iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut next_id = entries.len();
    while entries.len() > 1 && entries[0].0 < s {
        let (a, _) = entries.remove(0);
        let (b, _) = entries.remove(0);
        let merged = (a * b, next_id);
        next_id += 1;
        let pos = entries.partition_point(|e| *e <= merged);
        entries.insert(pos, merged);
    }
    Ok(entries.into_iter().map(|(v, _)| v).collect())
}

/// Output of the parameter search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmoothParams {
    pub lambda: u64,
    pub m: BigUint,
    pub m_factors: Factorization,
    pub lengths: Vec<u64>,
    pub n_total: u64,
}

impl SmoothParams {
    pub fn smoothness_bound(&self) -> u64 {
        self.lambda + 1
    }

    /// Checks `M | p^λ - 1`, smoothness of `M`, and `N = Π N_i | M`.
    pub fn verify(&self, ctx: &PrimeContext) -> Result<()> {
        let order = BigUint::from(ctx.p()).pow(self.lambda as u32) - 1u32;
        if !(&order % &self.m).is_zero() {
            return Err(invalid(format!("M = {} does not divide p^λ - 1", self.m)));
        }
        if factorization_value(&self.m_factors) != self.m {
            return Err(invalid("factorization does not multiply to M"));
        }
        if self.m_factors.iter().any(|&(q, _)| q > self.lambda + 1) {
            return Err(invalid("M is not (λ+1)-smooth"));
        }
        let prod: u128 = self.lengths.iter().map(|&v| v as u128).product();
        if prod != self.n_total as u128 {
            return Err(invalid("N differs from the product of the lengths"));
        }
        if !(&self.m % BigUint::from(self.n_total)).is_zero() {
            return Err(invalid(format!("N = {} does not divide M", self.n_total)));
        }
        Ok(())
    }
}

/// Prime factorization of a word-size integer by trial division.
pub fn factor_u64(mut n: u64) -> Factorization {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if is_prime(n) {
            break;
        }
        let mut e = 0;
        while n.is_multiple_of(d) {
            n /= d;
            e += 1;
        }
        if e > 0 {
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use num_traits::ToPrimitive;

    fn ctx(p: u64) -> PrimeContext {
        PrimeContext::new(p).unwrap()
    }

    fn base(multiple: u64) -> SmoothConfig {
        SmoothConfig {
            target_multiple: multiple,
            ..SmoothConfig::default()
        }
    }

    #[test]
    fn h_values() {
        let (h, primes) = compute_h(36).unwrap();
        assert_eq!(h, BigUint::from(1_919_190u32));
        assert_eq!(primes, vec![2, 3, 5, 7, 13, 19, 37]);
        assert_eq!(compute_h(37).unwrap().0, BigUint::from(2u32));
        assert_eq!(compute_h(6).unwrap().0, BigUint::from(42u32));
        assert!(compute_h(0).is_err());
    }

    #[test]
    fn h_is_squarefree_and_smooth() {
        for lambda in 1..=2000u64 {
            let (h, primes) = compute_h(lambda).unwrap();
            assert!(primes.windows(2).all(|w| w[0] < w[1]));
            assert!(primes.iter().all(|&q| q <= lambda + 1));
            assert_eq!(primes.iter().fold(BigUint::one(), |a, &q| a * q), h);
        }
    }

    #[test]
    fn sieve_agrees_with_exact_h() {
        let s = log_h_sieve(500);
        for lambda in 1..=500u64 {
            let (h, _) = compute_h(lambda).unwrap();
            let exact = h.to_f64().unwrap().log2();
            assert!((s[lambda as usize] - exact).abs() < 1e-6, "λ={lambda}");
        }
    }

    #[test]
    fn build_m_examples() {
        let (m, f) = build_m(&ctx(19), 6, &base(1)).unwrap();
        assert_eq!(m, BigUint::from(42u32));
        assert_eq!(f, vec![(2, 1), (3, 1), (7, 1)]);
        let enriched = SmoothConfig {
            accidental_factors: true,
            ..base(1)
        };
        let (m, f) = build_m(&ctx(19), 6, &enriched).unwrap();
        assert_eq!(m, BigUint::from(370_440u32));
        assert_eq!(f, vec![(2, 3), (3, 3), (5, 1), (7, 3)]);
        assert_eq!(build_m(&ctx(7), 4, &base(1)).unwrap().0, BigUint::from(30u32));
        assert_eq!(build_m(&ctx(2), 4, &base(1)).unwrap().0, BigUint::from(15u32));
    }

    #[test]
    fn choose_lambda_examples() {
        let c = choose_lambda(&ctx(7), 25, &base(1)).unwrap();
        assert_eq!((c.lambda, c.m.clone()), (4, BigUint::from(30u32)));
        let c = choose_lambda(&ctx(2), 10, &base(1)).unwrap();
        assert_eq!((c.lambda, c.m.clone()), (4, BigUint::from(15u32)));
        let c = choose_lambda(&ctx(19), 40, &base(1)).unwrap();
        assert_eq!((c.lambda, c.m.clone()), (6, BigUint::from(42u32)));
        let tight = SmoothConfig {
            lambda_max: 3,
            ..base(1)
        };
        assert!(matches!(
            choose_lambda(&ctx(7), 25, &tight),
            Err(Error::SearchExhausted(_))
        ));
    }

    #[test]
    fn build_m_divides_order() {
        for p in [2u64, 3, 5, 7, 13, 101, 65_537] {
            for lambda in 2..=60u64 {
                for acc in [false, true] {
                    let cfg = SmoothConfig {
                        accidental_factors: acc,
                        ..base(1)
                    };
                    let (m, _) = build_m(&ctx(p), lambda, &cfg).unwrap();
                    let order = BigUint::from(p).pow(lambda as u32) - 1u32;
                    assert!((order % m).is_zero());
                }
            }
        }
    }

    #[test]
    fn packaging_examples() {
        let f = vec![(2, 1), (3, 1), (5, 1), (7, 1), (13, 1), (19, 1), (37, 1)];
        let mut got = package_lengths(&f, 1000, 10).unwrap();
        got.sort();
        assert_eq!(got, vec![30, 91]);
        assert_eq!(package_lengths(&[(2, 1), (3, 1), (5, 1)], 4, 2).unwrap(), vec![2, 3]);
        assert!(package_lengths(&[(2, 1), (3, 1), (5, 1)], 31, 2).is_err());
        assert!(package_lengths(&[(2, 1), (3, 1), (5, 1)], 4, 4).is_err());
    }

    /// Checks the three packaging postconditions against the largest unit.
    fn check_packing(factors: &[(u64, u32)], l: u64, s: u64, lengths: &[u64]) {
        let m = factorization_value(factors);
        let n: u128 = lengths.iter().map(|&v| v as u128).product();
        assert!((m % BigUint::from(n)).is_zero());
        let max_unit = factors.iter().map(|f| f.0).max().unwrap() as u128;
        assert!(l as u128 <= n && n <= max_unit * l as u128);
        for &v in lengths {
            assert!(s <= v && (v as u128) <= (s as u128).pow(3), "N_i={v}, S={s}");
        }
    }

    #[test]
    fn packaging_postconditions_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        while checked < 300 {
            let lambda = rng.random_range(2..200u64);
            let p = [2u64, 3, 5, 7, 11, 101][rng.random_range(0..6)];
            let cfg = SmoothConfig {
                accidental_factors: rng.random_bool(0.5),
                ..base(1)
            };
            let (m, factors) = build_m(&ctx(p), lambda, &cfg).unwrap();
            let m64 = m.to_u64().unwrap_or(u64::MAX);
            if m64 <= lambda + 3 {
                continue;
            }
            let s = rng.random_range(lambda + 1..(m64 - 1).min(lambda * lambda + 2));
            let l = rng.random_range(s + 1..m64.min(1 << 40));
            let out = package_lengths(&factors, l, s).unwrap();
            check_packing(&factors, l, s, &out);
            checked += 1;
        }
    }

    #[test]
    fn characteristic_two_lengths_are_odd() {
        for lambda in 2..=300u64 {
            let (m, factors) = build_m(&ctx(2), lambda, &base(1)).unwrap();
            assert!(m.is_odd());
            assert!(factors.iter().all(|&(q, _)| q % 2 == 1));
        }
    }

    #[test]
    fn factor_u64_roundtrip() {
        for n in [1u64, 2, 12, 97, 360, 1 << 40, 18_446_744_073_709_551_557] {
            let f = factor_u64(n);
            assert_eq!(factorization_value(&f), BigUint::from(n));
        }
    }
}
