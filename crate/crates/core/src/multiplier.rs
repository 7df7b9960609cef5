//! Top-level multiplication in `F_p[X]`.
//!
//! A [`MulPlan`] for cyclic length `n` is either a Kronecker base case or a
//! Crandall–Fagin reduction to a transform of smooth length `N | p^κ - 1`
//! over `F_{p^κ}`. Short transforms of length `N_i` reach Bluestein leaves,
//! whose convolutions of length `2 N_i κ` are planned recursively by the same
//! planner. Plans are immutable and cached per length.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use num_traits::Zero;
use rayon::prelude::*;

use crate::crandall_fagin::{cf_plan, find_theta, CfPlan};
use crate::dft::{DftOptions, DftPlan, PreparedOperand};
use crate::error::{invalid, Error, Result};
use crate::ext_field::find_root_of_order;
use crate::kronecker::{CyclicEngine, PackedOperand, PreparedCyclic, UnivariateMultiplier};
use crate::prime_field::{FpPoly, PrimeContext};
use crate::smooth::{
    build_m, choose_lambda, factor_u64, factorization_value, package_lengths, Factorization,
    LambdaChoice, SmoothConfig, SmoothParams,
};

/// Route requested for the top level. Inner lengths are always planned with
/// [`Strategy::Auto`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Strategy {
    #[default]
    Auto,
    Kronecker,
    CfFft,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Auto => "auto",
            Strategy::Kronecker => "kronecker",
            Strategy::CfFft => "cf-fft",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Strategy::Auto),
            "kronecker" | "kronecker-base" => Ok(Strategy::Kronecker),
            "cf-fft" => Ok(Strategy::CfFft),
            other => Err(invalid(format!(
                "unknown strategy {other:?} (expected auto, kronecker or cf-fft)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MulConfig {
    pub strategy: Strategy,
    /// Lengths up to this many coefficients use the Kronecker base case.
    pub base_threshold: usize,
    pub smooth: SmoothConfig,
    pub seed: u64,
    pub dft: DftOptions,
    /// Extension degree from which field products switch to Kronecker.
    /// Higher than the field default: schoolbook wins up to about 150 here.
    pub ext_kronecker_threshold: usize,
    /// How many λ past the first admissible one the planner may try.
    pub lambda_scan: u64,
    /// Restrict the search to packaged lengths with `S > λ`, so every plan
    /// carries the `L <= N <= (λ+1)L` and `S <= N_i <= S³` bounds. Off by
    /// default: divisors of `M` and small `S` usually give a smaller `Nκ`.
    pub theorem_packing: bool,
}

impl Default for MulConfig {
    fn default() -> Self {
        MulConfig {
            strategy: Strategy::Auto,
            base_threshold: 1 << 14,
            smooth: SmoothConfig::default(),
            seed: 0x5eed,
            dft: DftOptions::default(),
            ext_kronecker_threshold: 128,
            lambda_scan: 48,
            theorem_packing: false,
        }
    }
}

impl MulConfig {
    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }
}

/// Why a plan stayed in the base case.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseReason {
    /// `n <= p²`
    Region,
    /// `n <= base_threshold`
    Threshold,
    Forced,
    /// No parameters with strictly shorter inner lengths were found.
    NoReduction,
}

impl fmt::Display for BaseReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaseReason::Region => "n ≤ p²",
            BaseReason::Threshold => "n ≤ base threshold",
            BaseReason::Forced => "forced",
            BaseReason::NoReduction => "no size-reducing parameters",
        })
    }
}

/// Parameters and sub-plans of a Crandall–Fagin + FFT route.
pub struct CfFftPlan {
    params: SmoothParams,
    kappa: usize,
    /// `(L, S)` when the lengths came from the packaging procedure.
    targets: Option<(u64, u64)>,
    inner_lengths: Vec<usize>,
    cf: CfPlan,
    dft: DftPlan,
}

impl CfFftPlan {
    pub fn lambda(&self) -> u64 {
        self.params.lambda
    }

    pub fn m(&self) -> &BigUint {
        &self.params.m
    }

    pub fn m_factors(&self) -> &Factorization {
        &self.params.m_factors
    }

    pub fn lengths(&self) -> &[u64] {
        &self.params.lengths
    }

    pub fn big_n(&self) -> usize {
        self.params.n_total as usize
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn targets(&self) -> Option<(u64, u64)> {
        self.targets
    }

    /// `n_i = 2 N_i κ`.
    pub fn inner_lengths(&self) -> &[usize] {
        &self.inner_lengths
    }

    pub fn params(&self) -> &SmoothParams {
        &self.params
    }

    pub fn cf_plan(&self) -> &CfPlan {
        &self.cf
    }

    pub fn dft_plan(&self) -> &DftPlan {
        &self.dft
    }
}

pub enum PlanKind {
    KroneckerBase(BaseReason),
    CfFft(Box<CfFftPlan>),
}

pub struct MulPlan {
    ctx: PrimeContext,
    n: usize,
    strategy: Strategy,
    kind: PlanKind,
    depth: usize,
}

impl fmt::Debug for MulPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("MulPlan");
        d.field("p", &self.ctx.p()).field("n", &self.n);
        match &self.kind {
            PlanKind::KroneckerBase(r) => d.field("kronecker_base", r),
            PlanKind::CfFft(c) => d
                .field("lambda", &c.lambda())
                .field("lengths", &c.lengths())
                .field("kappa", &c.kappa),
        };
        d.field("depth", &self.depth).finish()
    }
}

impl MulPlan {
    pub fn ctx(&self) -> &PrimeContext {
        &self.ctx
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn kind(&self) -> &PlanKind {
        &self.kind
    }

    pub fn strategy_name(&self) -> &'static str {
        match self.kind {
            PlanKind::KroneckerBase(_) => "kronecker-base",
            PlanKind::CfFft(_) => "cf-fft",
        }
    }

    pub fn cf_fft(&self) -> Option<&CfFftPlan> {
        match &self.kind {
            PlanKind::CfFft(c) => Some(c),
            PlanKind::KroneckerBase(_) => None,
        }
    }

    /// 0 for the base case, otherwise one more than the deepest inner plan.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Re-checks every invariant the planner relies on.
    pub fn verify(&self) -> Result<()> {
        let Some(c) = self.cf_fft() else {
            return Ok(());
        };
        let (n, big_n, kappa) = (self.n, c.big_n(), c.kappa);
        let lambda = c.lambda() as usize;
        if big_n == 0 || big_n > n {
            return Err(invalid(format!("need 1 <= N <= n, got N={big_n}")));
        }
        if kappa % lambda != 0 || kappa < 2 * n.div_ceil(big_n) {
            return Err(invalid(format!("κ={kappa} violates λ | κ, κ >= 2⌈n/N⌉")));
        }
        let order = BigUint::from(self.ctx.p()).pow(kappa as u32) - 1u32;
        if !(order % BigUint::from(big_n)).is_zero() {
            return Err(invalid(format!("N={big_n} does not divide p^κ - 1")));
        }
        c.params.verify(&self.ctx)?;
        if let Some((l, s)) = c.targets {
            let lam = c.lambda() as u128;
            let nn = big_n as u128;
            if nn < l as u128 || nn > (lam + 1) * l as u128 {
                return Err(invalid(format!("N={big_n} outside [L, (λ+1)L] for L={l}")));
            }
            let s3 = (s as u128).saturating_pow(3);
            if c.lengths().iter().any(|&v| (v as u128) < s as u128 || v as u128 > s3) {
                return Err(invalid(format!("lengths {:?} outside [S, S³] for S={s}", c.lengths())));
            }
        }
        if self.strategy == Strategy::Auto && c.inner_lengths.iter().any(|&m| m >= n) {
            return Err(invalid("inner lengths must be shorter than n"));
        }
        Ok(())
    }

    /// Cyclic product `u · v mod (X^n - 1)` on raw residues.
    pub(crate) fn cyclic_raw(&self, u: &[u64], v: &[u64]) -> Result<Vec<u64>> {
        let op = self.prepare_raw(v)?;
        self.apply_raw(&op, u)
    }

    fn prepare_raw(&self, v: &[u64]) -> Result<Fixed> {
        if v.len() > self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(match &self.kind {
            PlanKind::KroneckerBase(_) => Fixed::Kron(PackedOperand::new(&self.ctx, v, self.n)),
            PlanKind::CfFft(c) => Fixed::Cf(c.dft.prepare_raw(c.cf.split_weight_raw(v))?),
        })
    }

    fn apply_raw(&self, op: &Fixed, u: &[u64]) -> Result<Vec<u64>> {
        if u.len() > self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: u.len(),
            });
        }
        match (op, &self.kind) {
            (Fixed::Kron(op), _) => Ok(op.cyclic_mul(&self.ctx, u, self.n)),
            (Fixed::Cf(spec), PlanKind::CfFft(c)) => {
                let mut data = c.cf.split_weight_raw(u);
                c.dft.convolve_prepared_raw(&mut data, spec)?;
                Ok(c.cf.recombine_raw(&data))
            }
            (Fixed::Cf(_), PlanKind::KroneckerBase(_)) => Err(Error::FieldMismatch),
        }
    }
}

/// Second operand with its transform (or packing) done once.
enum Fixed {
    Kron(PackedOperand),
    Cf(PreparedOperand),
}

type CacheKey = (u64, usize, Strategy);

/// Shared plan cache; also the engine that serves Bluestein convolutions.
#[derive(Clone)]
struct Planner {
    cfg: MulConfig,
    cache: Arc<Mutex<HashMap<CacheKey, Arc<MulPlan>>>>,
}

impl Planner {
    fn new(cfg: MulConfig) -> Self {
        Planner {
            cfg,
            cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    fn plan(&self, ctx: &PrimeContext, n: usize, strategy: Strategy) -> Result<Arc<MulPlan>> {
        let key = (ctx.p(), n, strategy);
        if let Some(p) = self.cache.lock().unwrap().get(&key) {
            return Ok(p.clone());
        }
        // built outside the lock: building recurses into this cache
        let plan = Arc::new(build_plan(ctx, n, strategy, &self.cfg, self)?);
        Ok(self.cache.lock().unwrap().entry(key).or_insert(plan).clone())
    }
}

struct PreparedPlan {
    plan: Arc<MulPlan>,
    op: Fixed,
}

impl PreparedCyclic for PreparedPlan {
    fn cyclic_len(&self) -> usize {
        self.plan.n
    }

    fn multiply(&self, u: &[u64]) -> Result<Vec<u64>> {
        self.plan.apply_raw(&self.op, u)
    }

    fn depth(&self) -> usize {
        self.plan.depth
    }
}

impl CyclicEngine for Planner {
    fn prepare(&self, ctx: &PrimeContext, v: &[u64], n: usize) -> Result<Box<dyn PreparedCyclic>> {
        let plan = self.plan(ctx, n, Strategy::Auto)?;
        let op = plan.prepare_raw(v)?;
        Ok(Box::new(PreparedPlan { plan, op }))
    }
}

/// Candidate `(λ, M, lengths, κ)` with a rough cost.
struct Candidate {
    lambda: u64,
    m: BigUint,
    factors: Factorization,
    lengths: Vec<u64>,
    kappa: usize,
    targets: Option<(u64, u64)>,
    cost: f64,
}

fn kappa_for(n: usize, big_n: usize, lambda: u64) -> usize {
    let lambda = lambda as usize;
    (2 * n.div_ceil(big_n)).div_ceil(lambda) * lambda
}

fn theta_exists(p: u64, kappa: usize, big_n: u64) -> bool {
    BigUint::from(p).pow(kappa as u32) > BigUint::from(big_n) * big_n
}

/// Rough nanoseconds per field product (fitted on schoolbook and
/// Kronecker timings).
fn ext_mul_cost(kappa: usize, threshold: usize) -> f64 {
    let k = kappa as f64;
    if kappa < threshold {
        0.4 * k * k + 10.0 * k
    } else {
        k * (30.0 + 8.0 * k.log2())
    }
}

/// Rough nanoseconds for a base-field cyclic product of length `len`
/// (big-integer products grow like `len^1.47` in this range).
fn conv_cost(len: usize) -> f64 {
    let l = len as f64;
    l * 95.0 * (l / 16384.0).powf(0.47)
}

/// Two forward transforms plus weighting, pointwise products and the θ
/// search (cubic in κ).
fn route_cost(p: u64, lengths: &[u64], kappa: usize, cfg: &MulConfig) -> f64 {
    let mc = ext_mul_cost(kappa, cfg.ext_kronecker_threshold);
    let big_n: f64 = lengths.iter().map(|&v| v as f64).product();
    let per_elem: f64 = lengths
        .iter()
        .map(|&m| {
            let m = m as usize;
            if m <= cfg.dft.direct_threshold {
                m as f64 * mc
            } else if m <= cfg.dft.bluestein_floor {
                (m + 2) as f64 * mc
            } else {
                let inner = 2 * m * kappa;
                // inner lengths past the base case recurse: measured ~30x slower
                let base = inner <= cfg.base_threshold || inner as u128 <= (p as u128) * (p as u128);
                let penalty = if base { 1.0 } else { 30.0 };
                2.0 * mc + penalty * conv_cost(inner) / m as f64
            }
        })
        .sum::<f64>()
        + (lengths.len().saturating_sub(1)) as f64 * mc;
    big_n * (2.0 * per_elem + 3.0 * mc) + 20.0 * (kappa as f64).powi(3)
}

fn ceil_pow(x: u64, num: u32, den: u32) -> u64 {
    (x as f64).powf(num as f64 / den as f64).ceil() as u64
}

/// Divisors of `Π q^e` not exceeding `bound`, at most `cap` of them.
fn divisors_up_to(factors: &[(u64, u32)], bound: u64, cap: usize) -> Vec<u64> {
    let mut out = vec![1u64];
    for &(q, e) in factors {
        let mut next = Vec::new();
        for &d in &out {
            let mut v = d;
            for _ in 0..e {
                match v.checked_mul(q) {
                    Some(w) if w <= bound => {
                        v = w;
                        next.push(w);
                    }
                    _ => break,
                }
            }
        }
        out.extend(next);
        if out.len() > cap {
            out.sort_unstable();
            out.truncate(cap);
        }
    }
    out
}

/// Lengths for a divisor `N`: its prime units, merged while below `s`.
fn split_divisor(big_n: u64, s: u64) -> Result<Vec<u64>> {
    let f = factor_u64(big_n);
    if big_n < 4 || s + 1 >= big_n || f.len() == 1 && f[0].1 == 1 {
        return Ok(vec![big_n]);
    }
    package_lengths(&f, big_n - 1, s)
}

struct Scorer<'a> {
    ctx: &'a PrimeContext,
    n: usize,
    auto: bool,
    cfg: &'a MulConfig,
    best: Option<Candidate>,
}

impl Scorer<'_> {
    fn offer(&mut self, lambda: u64, m: &BigUint, factors: &Factorization, lengths: Vec<u64>, targets: Option<(u64, u64)>) {
        let n = self.n;
        let big_n: u128 = lengths.iter().map(|&v| v as u128).product();
        if big_n > n as u128 {
            return;
        }
        let big_n = big_n as usize;
        let kappa = kappa_for(n, big_n, lambda);
        if self.auto && lengths.iter().any(|&v| 2 * v as usize * kappa >= n) {
            return;
        }
        let cost = route_cost(self.ctx.p(), &lengths, kappa, self.cfg);
        if self.best.as_ref().is_some_and(|b| b.cost <= cost) {
            return;
        }
        if !theta_exists(self.ctx.p(), kappa, big_n as u64) {
            return;
        }
        self.best = Some(Candidate {
            lambda,
            m: m.clone(),
            factors: factors.clone(),
            lengths,
            kappa,
            targets,
            cost,
        });
    }
}

/// Cheapest admissible candidate over λ in the scan window.
///
/// Two families are scored: the packaging procedure over a grid of `(L, S)`,
/// and divisors `N` of `M` split into prime units (merged up to `S`). The
/// latter avoid the up-to-`(λ+1)`-fold overshoot of `N` past `L`, which
/// otherwise inflates `Nκ` well beyond `2n`.
fn search(ctx: &PrimeContext, n: usize, auto: bool, cfg: &MulConfig, first: &LambdaChoice) -> Result<Option<Candidate>> {
    let target = BigUint::from(cfg.smooth.target_multiple.max(1)) * n as u64;
    let last = (first.lambda + cfg.lambda_scan).min(cfg.smooth.lambda_max);
    let nu = n as u64;
    let mut sc = Scorer {
        ctx,
        n,
        auto,
        cfg,
        best: None,
    };
    for lambda in first.lambda..=last {
        let (m, factors) = if lambda == first.lambda {
            (first.m.clone(), first.factors.clone())
        } else {
            build_m(ctx, lambda, &cfg.smooth)?
        };
        if m < target {
            continue;
        }
        // λ² is the nominal target; the smaller ones trade fewer, longer
        // lengths for more, shorter ones (S = 2 keeps every prime unit).
        let mut s_grid = vec![
            lambda.saturating_mul(lambda),
            ceil_pow(lambda, 3, 2),
            2 * lambda,
            lambda + 1,
            ceil_pow(lambda, 1, 2),
            2,
        ];
        if cfg.theorem_packing {
            s_grid.retain(|&s| s > lambda);
        }
        s_grid.sort_unstable();
        s_grid.dedup();
        for &s in &s_grid {
            let l3 = nu.div_ceil(lambda.saturating_pow(3).max(1));
            let mut l_grid = vec![
                (s + 1).max(l3),
                nu.div_ceil(lambda * lambda),
                nu.div_ceil(lambda),
                (2 * nu).div_ceil(lambda),
                nu,
            ];
            l_grid.sort_unstable();
            l_grid.dedup();
            for &l in &l_grid {
                if s >= l || BigUint::from(l) >= m {
                    continue;
                }
                let lengths = package_lengths(&factors, l, s)?;
                // the [S, S³] bound is only claimed when S covers every unit
                let s3 = (s as u128).saturating_pow(3);
                let bounded = lengths.iter().all(|&v| v >= s && (v as u128) <= s3);
                sc.offer(lambda, &m, &factors, lengths, bounded.then_some((l, s)));
            }
        }
        if cfg.theorem_packing {
            continue;
        }
        // N within a factor 4 below the size that makes κ = λ
        let ideal = (2 * nu).div_ceil(lambda);
        for d in divisors_up_to(&factors, nu, 1 << 13) {
            if d < 2 || d < ideal / 4 {
                continue;
            }
            for s in [2, ceil_pow(lambda, 1, 2), lambda + 1] {
                sc.offer(lambda, &m, &factors, split_divisor(d, s)?, None);
            }
        }
    }
    Ok(sc.best)
}

/// Longest prefix of the sorted prime units of `M` with product `<= n`, each
/// unit its own length.
fn prefix_fallback(n: usize, first: &LambdaChoice, p: u64) -> Candidate {
    let mut units: Vec<u64> = first
        .factors
        .iter()
        .flat_map(|&(q, e)| std::iter::repeat_n(q, e as usize))
        .collect();
    units.sort_unstable();
    let mut lengths = Vec::new();
    let mut prod = 1u128;
    for u in units {
        if prod * u as u128 > n as u128 {
            break;
        }
        prod *= u as u128;
        lengths.push(u);
    }
    let big_n = prod as usize;
    let mut kappa = kappa_for(n, big_n, first.lambda);
    while !theta_exists(p, kappa, big_n as u64) {
        kappa += first.lambda as usize;
    }
    Candidate {
        lambda: first.lambda,
        m: first.m.clone(),
        factors: first.factors.clone(),
        lengths,
        kappa,
        targets: None,
        cost: 0.0,
    }
}

fn base(ctx: &PrimeContext, n: usize, strategy: Strategy, reason: BaseReason) -> MulPlan {
    MulPlan {
        ctx: *ctx,
        n,
        strategy,
        kind: PlanKind::KroneckerBase(reason),
        depth: 0,
    }
}

fn build_plan(ctx: &PrimeContext, n: usize, strategy: Strategy, cfg: &MulConfig, planner: &Planner) -> Result<MulPlan> {
    if n == 0 {
        return Err(invalid("cyclic length must be positive"));
    }
    match strategy {
        Strategy::Kronecker => return Ok(base(ctx, n, strategy, BaseReason::Forced)),
        Strategy::Auto => {
            let p = ctx.p() as u128;
            if n as u128 <= p * p {
                return Ok(base(ctx, n, strategy, BaseReason::Region));
            }
            if n <= cfg.base_threshold {
                return Ok(base(ctx, n, strategy, BaseReason::Threshold));
            }
        }
        Strategy::CfFft => {}
    }
    let auto = strategy == Strategy::Auto;
    let first = choose_lambda(ctx, n.max(2) as u64, &cfg.smooth)?;
    let cand = match search(ctx, n, auto, cfg, &first)? {
        Some(c) => c,
        None if auto => return Ok(base(ctx, n, strategy, BaseReason::NoReduction)),
        None => prefix_fallback(n, &first, ctx.p()),
    };
    let big_n: usize = cand.lengths.iter().product::<u64>() as usize;
    let seed = cfg.seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let (field, theta) = find_theta(ctx, cand.kappa, big_n as u64, seed)?;
    let field = Arc::new(field.with_kronecker_threshold(cfg.ext_kronecker_threshold));
    let theta = field.element(theta.into_coeffs())?;
    let omega = find_root_of_order(&field, big_n as u64, &factor_u64(big_n as u64), seed ^ 0x0e6a)?;
    let factors: Vec<usize> = cand.lengths.iter().map(|&v| v as usize).collect();
    let dft = DftPlan::with_engine(field.clone(), big_n, &factors, omega, &cfg.dft, planner)?;
    let cf = cf_plan(n, big_n, field, theta)?;
    let depth = 1 + dft.depth();
    let params = SmoothParams {
        lambda: cand.lambda,
        m: factorization_value(&cand.factors),
        m_factors: cand.factors,
        lengths: cand.lengths,
        n_total: big_n as u64,
    };
    debug_assert_eq!(params.m, cand.m);
    let inner_lengths = params.lengths.iter().map(|&v| 2 * v as usize * cand.kappa).collect();
    let plan = MulPlan {
        ctx: *ctx,
        n,
        strategy,
        kind: PlanKind::CfFft(Box::new(CfFftPlan {
            params,
            kappa: cand.kappa,
            targets: cand.targets,
            inner_lengths,
            cf,
            dft,
        })),
        depth,
    };
    plan.verify()?;
    Ok(plan)
}

/// Plans cyclic length `n` with a fresh cache.
pub fn plan_parameters(ctx: &PrimeContext, n: usize, cfg: &MulConfig) -> Result<Arc<MulPlan>> {
    Planner::new(*cfg).plan(ctx, n, cfg.strategy)
}

/// Multiplier bound to one prime with a plan cache shared across calls.
#[derive(Clone)]
pub struct Multiplier {
    ctx: PrimeContext,
    planner: Planner,
}

impl fmt::Debug for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Multiplier")
            .field("p", &self.ctx.p())
            .field("config", &self.planner.cfg)
            .finish()
    }
}

impl Multiplier {
    pub fn new(ctx: PrimeContext, cfg: MulConfig) -> Self {
        Multiplier {
            ctx,
            planner: Planner::new(cfg),
        }
    }

    pub fn ctx(&self) -> &PrimeContext {
        &self.ctx
    }

    pub fn config(&self) -> &MulConfig {
        &self.planner.cfg
    }

    pub fn plan(&self, n: usize) -> Result<Arc<MulPlan>> {
        self.planner.plan(&self.ctx, n, self.planner.cfg.strategy)
    }

    fn operand<'a>(&self, a: &'a FpPoly) -> Result<&'a [u64]> {
        self.ctx.check_same(a.ctx())?;
        Ok(&a.coeffs()[..a.significant_len()])
    }

    /// Exact product, padded to cyclic length `deg a + deg b + 1`.
    pub fn multiply(&self, a: &FpPoly, b: &FpPoly) -> Result<FpPoly> {
        let (a, b) = (self.operand(a)?, self.operand(b)?);
        if a.is_empty() || b.is_empty() {
            return Ok(FpPoly::zero(self.ctx));
        }
        let n = a.len() + b.len() - 1;
        let out = self.plan(n)?.cyclic_raw(a, b)?;
        Ok(FpPoly::from_raw(self.ctx, out).trimmed())
    }

    /// `a · b mod (X^n - 1)`, exactly `n` coefficients.
    pub fn cyclic_multiply(&self, a: &FpPoly, b: &FpPoly, n: usize) -> Result<FpPoly> {
        let (a, b) = (self.operand(a)?, self.operand(b)?);
        for x in [a, b] {
            if x.len() > n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: x.len(),
                });
            }
        }
        let out = self.plan(n)?.cyclic_raw(a, b)?;
        Ok(FpPoly::from_raw(self.ctx, out))
    }

    /// `u_j · v mod (X^n - 1)` for every `u_j`, transforming `v` once.
    pub fn cyclic_multiply_batch(&self, us: &[FpPoly], v: &FpPoly, n: usize) -> Result<Vec<FpPoly>> {
        if us.is_empty() {
            return Ok(Vec::new());
        }
        let v = self.operand(v)?;
        let us: Vec<&[u64]> = us.iter().map(|u| self.operand(u)).collect::<Result<_>>()?;
        if let Some(bad) = us.iter().chain(std::iter::once(&v)).find(|x| x.len() > n) {
            return Err(Error::LengthMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        let plan = self.plan(n)?;
        let fixed = plan.prepare_raw(v)?;
        us.par_iter()
            .map(|u| plan.apply_raw(&fixed, u).map(|c| FpPoly::from_raw(self.ctx, c)))
            .collect()
    }
}

impl UnivariateMultiplier for Multiplier {
    fn multiply(&self, a: &FpPoly, b: &FpPoly) -> Result<FpPoly> {
        Multiplier::multiply(self, a, b)
    }

    fn cyclic_multiply(&self, a: &FpPoly, b: &FpPoly, n: usize) -> Result<FpPoly> {
        Multiplier::cyclic_multiply(self, a, b, n)
    }
}

/// Product with the default configuration.
pub fn multiply(a: &FpPoly, b: &FpPoly) -> Result<FpPoly> {
    multiply_with(a, b, &MulConfig::default())
}

pub fn multiply_with(a: &FpPoly, b: &FpPoly, cfg: &MulConfig) -> Result<FpPoly> {
    a.ctx().check_same(b.ctx())?;
    Multiplier::new(*a.ctx(), *cfg).multiply(a, b)
}

pub fn cyclic_multiply(a: &FpPoly, b: &FpPoly, n: usize) -> Result<FpPoly> {
    cyclic_multiply_with(a, b, n, &MulConfig::default())
}

pub fn cyclic_multiply_with(a: &FpPoly, b: &FpPoly, n: usize, cfg: &MulConfig) -> Result<FpPoly> {
    a.ctx().check_same(b.ctx())?;
    Multiplier::new(*a.ctx(), *cfg).cyclic_multiply(a, b, n)
}

pub fn cyclic_multiply_batch(us: &[FpPoly], v: &FpPoly, n: usize) -> Result<Vec<FpPoly>> {
    Multiplier::new(*v.ctx(), MulConfig::default()).cyclic_multiply_batch(us, v, n)
}

fn format_factors(f: &[(u64, u32)]) -> String {
    if f.is_empty() {
        return "1".into();
    }
    f.iter()
        .map(|&(q, e)| if e == 1 { q.to_string() } else { format!("{q}^{e}") })
        .collect::<Vec<_>>()
        .join(" · ")
}

/// Human-readable planner report for cyclic length `n`.
pub fn explain(ctx: &PrimeContext, n: usize, cfg: &MulConfig) -> Result<String> {
    use std::fmt::Write;
    let plan = plan_parameters(ctx, n, cfg)?;
    let mut s = String::new();
    let _ = writeln!(s, "p: {}", ctx.p());
    let _ = writeln!(s, "n: {n}");
    match choose_lambda(ctx, n.max(2) as u64, &cfg.smooth) {
        Ok(c) => {
            let _ = writeln!(s, "search: λ={}, M={} = {}", c.lambda, c.m, format_factors(&c.factors));
        }
        Err(e) => {
            let _ = writeln!(s, "search: unavailable ({e})");
        }
    }
    match plan.kind() {
        PlanKind::KroneckerBase(r) => {
            let _ = writeln!(s, "strategy: kronecker-base ({r})");
        }
        PlanKind::CfFft(c) => {
            let _ = writeln!(s, "strategy: cf-fft");
            let _ = writeln!(s, "λ={}", c.lambda());
            let _ = writeln!(s, "M={} = {}", c.m(), format_factors(c.m_factors()));
            if let Some((l, t)) = c.targets() {
                let _ = writeln!(s, "L={l}, S={t}");
            }
            let _ = writeln!(s, "N_i: {:?}", c.lengths());
            let _ = writeln!(s, "N={}", c.big_n());
            let _ = writeln!(s, "κ={}", c.kappa());
            let _ = writeln!(s, "n_i: {:?}", c.inner_lengths());
        }
    }
    let _ = writeln!(s, "depth: {}", plan.depth());
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prime_field::{poly_cyclic_naive, poly_mul_naive};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx(p: u64) -> PrimeContext {
        PrimeContext::new(p).unwrap()
    }

    fn random_poly(rng: &mut ChaCha8Rng, c: PrimeContext, len: usize) -> FpPoly {
        FpPoly::new(c, (0..len).map(|_| rng.random_range(0..c.p())).collect()).unwrap()
    }

    #[test]
    fn strategy_round_trips() {
        for s in [Strategy::Auto, Strategy::Kronecker, Strategy::CfFft] {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("fft".parse::<Strategy>().is_err());
    }

    #[test]
    fn region_rule_picks_base_case() {
        let plan = plan_parameters(&ctx(2_147_483_647), 100, &MulConfig::default()).unwrap();
        assert!(matches!(plan.kind(), PlanKind::KroneckerBase(BaseReason::Region)));
        let text = explain(&ctx(2_147_483_647), 100, &MulConfig::default()).unwrap();
        assert!(text.contains("strategy: kronecker-base (n ≤ p²)"), "{text}");
    }

    #[test]
    fn threshold_override_forces_base_case() {
        let cfg = MulConfig {
            base_threshold: 1_000_000_000,
            ..MulConfig::default()
        };
        let plan = plan_parameters(&ctx(2), 1_000_000, &cfg).unwrap();
        assert!(matches!(plan.kind(), PlanKind::KroneckerBase(BaseReason::Threshold)));
    }

    #[test]
    fn explain_reports_search_values() {
        let mut cfg = MulConfig::default().with_strategy(Strategy::CfFft);
        cfg.smooth.target_multiple = 1;
        let text = explain(&ctx(7), 25, &cfg).unwrap();
        assert!(text.contains("λ=4") && text.contains("M=30"), "{text}");
        assert!(text.contains("strategy: cf-fft"), "{text}");
        let text = explain(&ctx(19), 40, &cfg).unwrap();
        assert!(text.contains("λ=6") && text.contains("M=42"), "{text}");
    }

    #[test]
    fn identity_and_scalars() {
        let c = ctx(13);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_poly(&mut rng, c, 50);
        assert_eq!(multiply(&a, &FpPoly::one(c)).unwrap(), a.clone().trimmed());
        let x = FpPoly::new(c, vec![5]).unwrap();
        let y = FpPoly::new(c, vec![7]).unwrap();
        assert_eq!(multiply(&x, &y).unwrap().coeffs(), &[9]);
        assert!(multiply(&a, &FpPoly::zero(c)).unwrap().is_zero());
        let delta = FpPoly::one(c);
        assert_eq!(cyclic_multiply(&a, &delta, 64).unwrap(), a.resized(64));
    }

    #[test]
    fn context_mismatch_is_an_error() {
        let a = FpPoly::one(ctx(3));
        let b = FpPoly::one(ctx(5));
        assert!(matches!(multiply(&a, &b), Err(Error::ContextMismatch { .. })));
    }

    #[test]
    fn all_ones_cyclic_matches_oracle() {
        let c = ctx(7);
        let a = FpPoly::new(c, vec![1; 10]).unwrap();
        for s in [Strategy::Kronecker, Strategy::CfFft] {
            let cfg = MulConfig::default().with_strategy(s);
            let got = cyclic_multiply_with(&a, &a, 10, &cfg).unwrap();
            assert_eq!(got, poly_cyclic_naive(&a, &a, 10).unwrap(), "{s}");
        }
    }

    #[test]
    fn strategies_agree_with_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &p in &[2u64, 3, 5, 7, 13, 101] {
            let c = ctx(p);
            let mult: Vec<Multiplier> = [Strategy::Kronecker, Strategy::CfFft]
                .iter()
                .map(|&s| Multiplier::new(c, MulConfig::default().with_strategy(s)))
                .collect();
            for _ in 0..4 {
                let n = rng.random_range(1..600);
                let la = rng.random_range(0..=n);
                let lb = rng.random_range(0..=n);
                let a = random_poly(&mut rng, c, la);
                let b = random_poly(&mut rng, c, lb);
                let want = poly_cyclic_naive(&a, &b, n).unwrap();
                for m in &mult {
                    assert_eq!(m.cyclic_multiply(&a, &b, n).unwrap(), want, "p={p} n={n}");
                }
                let want = poly_mul_naive(&a, &b).unwrap();
                for m in &mult {
                    assert_eq!(m.multiply(&a, &b).unwrap(), want, "p={p}");
                }
            }
        }
    }

    #[test]
    fn forced_plans_verify() {
        for &(p, n) in &[(2u64, 1usize), (2, 2), (3, 5), (2, 300), (5, 1000), (101, 77)] {
            let cfg = MulConfig::default().with_strategy(Strategy::CfFft);
            let plan = plan_parameters(&ctx(p), n, &cfg).unwrap();
            assert!(plan.cf_fft().is_some());
            plan.verify().unwrap();
        }
    }

    #[test]
    fn recursion_reaches_depth_two() {
        let cfg = MulConfig {
            base_threshold: 200,
            dft: DftOptions {
                direct_threshold: 4,
                bluestein_floor: 4,
            },
            ..MulConfig::default()
        };
        let c = ctx(2);
        let m = Multiplier::new(c, cfg);
        let n = 1500;
        let plan = m.plan(n).unwrap();
        assert!(plan.depth() >= 2, "{plan:?}");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_poly(&mut rng, c, n);
        let b = random_poly(&mut rng, c, n);
        assert_eq!(m.cyclic_multiply(&a, &b, n).unwrap(), poly_cyclic_naive(&a, &b, n).unwrap());
    }

    #[test]
    fn million_length_plans_verify() {
        let c = ctx(2);
        let plan = plan_parameters(&c, 1_000_000, &MulConfig::default()).unwrap();
        plan.verify().unwrap();
        assert!(plan.depth() <= 3);
        let cfg = MulConfig {
            theorem_packing: true,
            ..MulConfig::default()
        };
        let plan = plan_parameters(&c, 1_000_000, &cfg).unwrap();
        let cf = plan.cf_fft().expect("cf-fft above the threshold");
        let (l, s) = cf.targets().expect("packaged lengths");
        let (lam, big_n) = (cf.lambda(), cf.big_n() as u64);
        assert_eq!(cf.kappa() as u64 % lam, 0);
        assert!(l <= big_n && big_n <= (lam + 1) * l);
        assert!(cf.lengths().iter().all(|&v| s <= v && v <= s.pow(3)));
        plan.verify().unwrap();
    }

    #[test]
    fn multiplier_is_shareable() {
        fn check<T: Send + Sync>() {}
        check::<Multiplier>();
        check::<MulPlan>();
    }

    #[test]
    fn batch_matches_single_products() {
        let c = ctx(5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 500;
        let v = random_poly(&mut rng, c, n);
        let us: Vec<FpPoly> = (0..3).map(|_| random_poly(&mut rng, c, n)).collect();
        let m = Multiplier::new(c, MulConfig::default().with_strategy(Strategy::CfFft));
        let batch = m.cyclic_multiply_batch(&us, &v, n).unwrap();
        for (u, got) in us.iter().zip(&batch) {
            assert_eq!(got, &m.cyclic_multiply(u, &v, n).unwrap());
        }
        assert!(m.cyclic_multiply_batch(&[], &v, n).unwrap().is_empty());
        let one = m.cyclic_multiply_batch(&us[..1], &v, n).unwrap();
        assert_eq!(one[0], m.cyclic_multiply(&us[0], &v, n).unwrap());
    }

    #[test]
    fn characteristic_two_lengths_are_odd() {
        let c = ctx(2);
        for n in [20_000usize, 50_000, 100_000] {
            let plan = plan_parameters(&c, n, &MulConfig::default()).unwrap();
            if let Some(cf) = plan.cf_fft() {
                assert!(cf.lengths().iter().all(|v| v % 2 == 1), "{plan:?}");
            }
        }
    }
}
