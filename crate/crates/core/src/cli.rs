//! Command-line front end: `mul`, `explain`, `verify` and `bench`.
//!
//! Exit statuses: 0 success, 1 verification or runtime failure, 2 malformed
//! input, 3 operands over different primes.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::crandall_fagin::{cf_plan, cf_recombine, cf_split_weight, find_theta};
use crate::dft::{bluestein, dft_direct, DftPlan};
use crate::error::Error;
use crate::ext_field::{ext_poly_multiply, find_irreducible, find_root_of_order, ExtElement, ExtField};
use crate::multiplier::{explain, multiply_with, MulConfig, Multiplier, Strategy};
use crate::prime_field::{poly_cyclic_naive, poly_mul_naive, FpPoly, PrimeContext};
use crate::smooth::factor_u64;

#[derive(Debug, Parser)]
#[command(name = "fpmul", version, about = "Fast polynomial multiplication over prime fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multiply two polynomial files and write the product.
    Mul(MulArgs),
    /// Print the planner's parameters for a prime and a cyclic length.
    Explain(ExplainArgs),
    /// Run randomized oracle checks of every component.
    Verify(VerifyArgs),
    /// Time multiplications over a doubling range of lengths, as CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct MulArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    pub out: PathBuf,
    #[arg(long, default_value = "auto")]
    pub strategy: Strategy,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub p: u64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "auto")]
    pub strategy: Strategy,
    /// λ is accepted once M reaches this multiple of n.
    #[arg(long, default_value_t = 2)]
    pub multiple: u64,
    /// Include every small prime factor of p^λ - 1 in M.
    #[arg(long)]
    pub accidental_factors: bool,
    #[arg(long)]
    pub base_threshold: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 512)]
    pub max_n: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,3,5,7,13,101,2147483647")]
    pub primes: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub cases: usize,
    /// Corrupt every product (exercises the failure path).
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 2)]
    pub p: u64,
    /// `START..END`, doubling from START; bounds accept `2^k`.
    #[arg(long, default_value = "2^10..2^16")]
    pub n_range: String,
    #[arg(long, value_delimiter = ',', default_value = "kronecker,cf-fft")]
    pub algorithms: Vec<Strategy>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// CSV destination; `-` for standard output.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Mismatch(String),
    Failed(String),
}

impl CliError {
    pub fn status(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Mismatch(_) => 3,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) | CliError::Mismatch(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Failed(format!("{}: {e}", path.display()))
}

/// Runs a parsed command, printing to stdout, and returns the exit status.
pub fn run(cli: Cli) -> i32 {
    let out = io::stdout();
    let mut out = out.lock();
    let res = match cli.command {
        Command::Mul(a) => cmd_mul(&a),
        Command::Explain(a) => cmd_explain(&a, &mut out),
        Command::Verify(a) => cmd_verify(&a, &mut out),
        Command::Bench(a) => cmd_bench(&a, &mut out),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            e.status()
        }
    }
}

/// Parses the three-line polynomial format.
pub fn parse_poly(text: &str) -> Result<FpPoly, CliError> {
    let mut lines = text.lines();
    let mut header = |key: &str| -> Result<u64, CliError> {
        let line = lines
            .next()
            .ok_or_else(|| CliError::Parse(format!("missing `{key}` line")))?;
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(k), Some(v), None) if k == key => v
                .parse()
                .map_err(|_| CliError::Parse(format!("bad `{key}` value {v:?}"))),
            _ => Err(CliError::Parse(format!("expected `{key} <decimal>`, got {line:?}"))),
        }
    };
    let p = header("p")?;
    let n = header("n")?;
    let ctx = PrimeContext::new(p).map_err(|e| CliError::Parse(e.to_string()))?;
    let coeffs: Vec<u64> = lines
        .flat_map(str::split_whitespace)
        .map(|t| {
            t.parse::<u64>()
                .map_err(|_| CliError::Parse(format!("bad coefficient {t:?}")))
        })
        .collect::<Result<_, _>>()?;
    if coeffs.len() as u64 != n {
        return Err(CliError::Parse(format!(
            "header declares {n} coefficients, found {}",
            coeffs.len()
        )));
    }
    FpPoly::new(ctx, coeffs).map_err(|e| CliError::Parse(e.to_string()))
}

/// Writes the polynomial with trailing zeros removed.
pub fn format_poly(f: &FpPoly) -> String {
    let c = &f.coeffs()[..f.significant_len()];
    let body: Vec<String> = c.iter().map(u64::to_string).collect();
    format!("p {}\nn {}\n{}\n", f.ctx().p(), c.len(), body.join(" "))
}

fn read_poly(path: &Path) -> Result<FpPoly, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_poly(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn cmd_mul(args: &MulArgs) -> Result<(), CliError> {
    let a = read_poly(&args.a)?;
    let b = read_poly(&args.b)?;
    if a.ctx().p() != b.ctx().p() {
        return Err(CliError::Mismatch(format!(
            "operands use different primes ({} and {})",
            a.ctx().p(),
            b.ctx().p()
        )));
    }
    let cfg = MulConfig::default().with_strategy(args.strategy);
    let c = multiply_with(&a, &b, &cfg)?;
    fs::write(&args.out, format_poly(&c)).map_err(|e| io_err(&args.out, e))
}

pub fn cmd_explain(args: &ExplainArgs, out: &mut impl Write) -> Result<(), CliError> {
    let ctx = PrimeContext::new(args.p).map_err(|e| CliError::Parse(e.to_string()))?;
    if args.n == 0 {
        return Err(CliError::Parse("n must be at least 1".into()));
    }
    let mut cfg = MulConfig::default().with_strategy(args.strategy);
    cfg.smooth.target_multiple = args.multiple;
    cfg.smooth.accidental_factors = args.accidental_factors;
    if let Some(t) = args.base_threshold {
        cfg.base_threshold = t;
    }
    let report = explain(&ctx, args.n, &cfg)?;
    out.write_all(report.as_bytes())
        .map_err(|e| CliError::Failed(e.to_string()))
}

/// The four oracle suites of `verify`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Multiply,
    Dft,
    Bluestein,
    CrandallFagin,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Multiply, Suite::Dft, Suite::Bluestein, Suite::CrandallFagin];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Multiply => "multiply",
            Suite::Dft => "dft",
            Suite::Bluestein => "bluestein",
            Suite::CrandallFagin => "crandall-fagin",
        }
    }
}

/// One reproducible case.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Case {
    pub suite: Suite,
    pub p: u64,
    pub n: usize,
    pub seed: u64,
}

fn divisors_of(n: u64, bound: u64) -> Vec<u64> {
    let mut out = vec![1u64];
    for (q, e) in factor_u64(n) {
        let mut next = Vec::new();
        for &d in &out {
            let mut v = d;
            for _ in 0..e {
                v *= q;
                if v > bound {
                    break;
                }
                next.push(v);
            }
        }
        out.extend(next);
    }
    out.sort_unstable();
    out
}

/// A random field of degree <= 4 with `p^κ <= 2^40`, a transform length
/// `N | p^κ - 1` accepted by `keep`, and a root of that order.
fn random_transform(
    ctx: &PrimeContext,
    rng: &mut ChaCha8Rng,
    bound: u64,
    keep: impl Fn(u64) -> bool,
) -> Result<Option<(Arc<ExtField>, ExtElement, usize)>, Error> {
    let p = ctx.p() as u128;
    let mut options = Vec::new();
    for kappa in 1..=4u32 {
        let size = p.pow(kappa);
        if size > 1 << 40 {
            break;
        }
        let ns: Vec<u64> = divisors_of(size as u64 - 1, bound)
            .into_iter()
            .filter(|&d| keep(d))
            .collect();
        if !ns.is_empty() {
            options.push((kappa as usize, ns));
        }
    }
    if options.is_empty() {
        return Ok(None);
    }
    let (kappa, ns) = &options[rng.random_range(0..options.len())];
    let big_n = ns[rng.random_range(0..ns.len())];
    let field = find_irreducible(ctx, *kappa, rng.random())?;
    let omega = find_root_of_order(&field, big_n, &factor_u64(big_n), rng.random())?;
    Ok(Some((Arc::new(field), omega, big_n as usize)))
}

/// Prime units of `n` in random order, randomly merged into factors.
fn random_factors(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut units: Vec<usize> = factor_u64(n as u64)
        .into_iter()
        .flat_map(|(q, e)| std::iter::repeat_n(q as usize, e as usize))
        .collect();
    units.shuffle(rng);
    let mut out: Vec<usize> = Vec::new();
    for u in units {
        match out.last_mut() {
            Some(last) if rng.random_bool(0.3) => *last *= u,
            _ => out.push(u),
        }
    }
    if out.is_empty() {
        out.push(1);
    }
    out
}

fn random_poly(ctx: PrimeContext, rng: &mut ChaCha8Rng, len: usize) -> FpPoly {
    FpPoly::from_unreduced(ctx, (0..len).map(|_| rng.random_range(0..ctx.p())))
}

fn corrupt(f: &mut FpPoly) {
    let ctx = *f.ctx();
    let mut c = f.coeffs().to_vec();
    if c.is_empty() {
        c.push(0);
    }
    c[0] = ctx.add(c[0], 1);
    *f = FpPoly::from_unreduced(ctx, c);
}

/// Runs one case; `Ok(false)` is an oracle mismatch.
pub fn run_case(case: Case, fault: bool) -> Result<bool, Error> {
    let ctx = PrimeContext::new(case.p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let n = case.n.max(1);
    match case.suite {
        Suite::Multiply => {
            let la = rng.random_range(0..=n);
            let lb = rng.random_range(0..=n);
            let a = random_poly(ctx, &mut rng, la);
            let b = random_poly(ctx, &mut rng, lb);
            let strategy = [Strategy::Auto, Strategy::Kronecker, Strategy::CfFft][rng.random_range(0..3)];
            let mut got = multiply_with(&a, &b, &MulConfig::default().with_strategy(strategy))?;
            if fault {
                corrupt(&mut got);
            }
            Ok(got.trimmed() == poly_mul_naive(&a, &b)?.trimmed())
        }
        Suite::Dft => {
            let bound = n.clamp(8, 256) as u64;
            let Some((field, omega, big_n)) = random_transform(&ctx, &mut rng, bound, |_| true)? else {
                return Ok(true);
            };
            let factors = random_factors(big_n, &mut rng);
            let plan = DftPlan::new(field.clone(), big_n, &factors, omega.clone())?;
            let a: Vec<ExtElement> = (0..big_n).map(|_| field.random(&mut rng)).collect();
            let spec = plan.dft(&a)?;
            Ok(spec == dft_direct(&field, &a, &omega)? && plan.idft(&spec)? == a)
        }
        Suite::Bluestein => {
            let bound = n.clamp(8, 128) as u64;
            let odd_only = ctx.p() == 2;
            let Some((field, omega, big_n)) =
                random_transform(&ctx, &mut rng, bound, |d| d >= 2 && (!odd_only || d % 2 == 1))?
            else {
                return Ok(true);
            };
            let a: Vec<ExtElement> = (0..big_n).map(|_| field.random(&mut rng)).collect();
            Ok(bluestein(&field, &omega, big_n, &a)? == dft_direct(&field, &a, &omega)?)
        }
        Suite::CrandallFagin => {
            let n = n.min(2048);
            let lo = n.div_ceil(16).max(1);
            let big_n = rng.random_range(lo..=n);
            let mut kappa = 2 * n.div_ceil(big_n) + rng.random_range(0..=2);
            let size = |k: usize| (ctx.p() as f64).log2() * k as f64;
            while size(kappa) <= 2.0 * (big_n as f64).log2() {
                kappa += 1;
            }
            let (field, theta) = find_theta(&ctx, kappa, big_n as u64, rng.random())?;
            let plan = cf_plan(n, big_n, Arc::new(field), theta)?;
            let u = random_poly(ctx, &mut rng, n);
            let v = random_poly(ctx, &mut rng, n);
            let f = plan.field();
            let (wu, wv) = (cf_split_weight(&u, &plan)?, cf_split_weight(&v, &plan)?);
            let full = ext_poly_multiply(f, &wu, &wv)?;
            let mut conv = vec![f.zero(); big_n];
            for (i, x) in full.iter().enumerate() {
                conv[i % big_n] = f.add(&conv[i % big_n], x);
            }
            Ok(cf_recombine(&conv, &plan)? == poly_cyclic_naive(&u, &v, n)?)
        }
    }
}

/// Smallest `n` (same suite, prime and seed) that still fails.
pub fn minimize(case: Case, fault: bool) -> Case {
    let mut best = case;
    let mut lo = 1;
    while lo < best.n {
        let mid = lo + (best.n - lo) / 2;
        let trial = Case { n: mid, ..best };
        if matches!(run_case(trial, fault), Ok(false) | Err(_)) {
            best = trial;
        } else {
            lo = mid + 1;
        }
    }
    best
}

/// The deterministic case list for a verify run.
pub fn verify_cases(args: &VerifyArgs) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    (0..args.cases)
        .map(|i| Case {
            suite: Suite::ALL[i % Suite::ALL.len()],
            p: args.primes[rng.random_range(0..args.primes.len())],
            n: rng.random_range(1..=args.max_n.max(1)),
            seed: rng.random(),
        })
        .collect()
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut impl Write) -> Result<(), CliError> {
    if args.primes.is_empty() {
        return Err(CliError::Parse("no primes given".into()));
    }
    for &p in &args.primes {
        PrimeContext::new(p).map_err(|e| CliError::Parse(e.to_string()))?;
    }
    let cases = verify_cases(args);
    let results: Vec<Result<bool, Error>> = cases.par_iter().map(|&c| run_case(c, args.inject_fault)).collect();
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(|e| CliError::Failed(e.to_string()));
    let mut failed = None;
    for suite in Suite::ALL {
        let (mut pass, mut fail) = (0, 0);
        for (c, r) in cases.iter().zip(&results) {
            if c.suite != suite {
                continue;
            }
            if matches!(r, Ok(true)) {
                pass += 1;
            } else {
                fail += 1;
                failed.get_or_insert((*c, r.clone()));
            }
        }
        w(out, format!("{:<15} passed {pass:>5}  failed {fail:>5}", suite.name()))?;
    }
    let total_fail = results.iter().filter(|r| !matches!(r, Ok(true))).count();
    w(out, format!("total           passed {:>5}  failed {total_fail:>5}", cases.len() - total_fail))?;
    match failed {
        None => Ok(()),
        Some((case, r)) => {
            let m = minimize(case, args.inject_fault);
            let why = match r {
                Err(e) => format!(" ({e})"),
                _ => String::new(),
            };
            Err(CliError::Failed(format!(
                "{} mismatch{why}; reproducer: suite={} p={} n={} seed={}",
                case.suite.name(),
                m.suite.name(),
                m.p,
                m.n,
                m.seed
            )))
        }
    }
}

/// 64-bit FNV-1a fold over the coefficient words.
pub fn checksum(f: &FpPoly) -> u64 {
    f.coeffs()[..f.significant_len()]
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, &c| {
            c.to_le_bytes()
                .iter()
                .fold(h, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
        })
}

fn parse_len(s: &str) -> Result<usize, CliError> {
    let s = s.trim();
    let bad = || CliError::Parse(format!("bad length {s:?}"));
    match s.split_once('^') {
        Some((b, e)) => {
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            let e: u32 = e.trim().parse().map_err(|_| bad())?;
            b.checked_pow(e).ok_or_else(bad)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

/// `START..END` (or a single length) as the doubling sequence it denotes.
pub fn parse_range(s: &str) -> Result<Vec<usize>, CliError> {
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (parse_len(a)?, parse_len(b)?),
        None => {
            let v = parse_len(s)?;
            (v, v)
        }
    };
    if lo == 0 {
        return Err(CliError::Parse("lengths must be positive".into()));
    }
    let mut out = Vec::new();
    let mut n = lo;
    while n <= hi {
        out.push(n);
        n = match n.checked_mul(2) {
            Some(v) => v,
            None => break,
        };
    }
    Ok(out)
}

/// One benchmark row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchRecord {
    pub algorithm: Strategy,
    pub p: u64,
    pub n: usize,
    pub seed: u64,
    pub wall_nanos: u128,
    pub checksum: u64,
}

pub const BENCH_HEADER: [&str; 6] = ["algorithm", "p", "n", "seed", "wall_nanos", "result_checksum"];

/// Times `multiply` on two operands of `n/2` coefficients (product length
/// `n - 1`) for every algorithm; plans are built before the clock starts.
pub fn bench_point(ctx: PrimeContext, n: usize, seed: u64, algorithms: &[Strategy]) -> Result<Vec<BenchRecord>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
    let half = (n / 2).max(1);
    let a = random_poly(ctx, &mut rng, half);
    let b = random_poly(ctx, &mut rng, half);
    algorithms
        .iter()
        .map(|&alg| {
            let m = Multiplier::new(ctx, MulConfig::default().with_strategy(alg));
            m.plan(2 * half - 1)?;
            let t = Instant::now();
            let c = m.multiply(&a, &b)?;
            let wall_nanos = t.elapsed().as_nanos();
            Ok(BenchRecord {
                algorithm: alg,
                p: ctx.p(),
                n,
                seed,
                wall_nanos,
                checksum: checksum(&c),
            })
        })
        .collect()
}

pub fn cmd_bench(args: &BenchArgs, out: &mut impl Write) -> Result<(), CliError> {
    let ctx = PrimeContext::new(args.p).map_err(|e| CliError::Parse(e.to_string()))?;
    let ns = parse_range(&args.n_range)?;
    let mut sink: Box<dyn Write + '_> = if args.out.as_os_str() == "-" {
        Box::new(out)
    } else {
        Box::new(fs::File::create(&args.out).map_err(|e| io_err(&args.out, e))?)
    };
    let mut w = csv::Writer::from_writer(&mut sink);
    let csv_err = |e: csv::Error| CliError::Failed(e.to_string());
    w.write_record(BENCH_HEADER).map_err(csv_err)?;
    let mut mismatch = None;
    for n in ns {
        let rows = bench_point(ctx, n, args.seed, &args.algorithms)?;
        for r in &rows {
            w.write_record([
                r.algorithm.name().to_string(),
                r.p.to_string(),
                r.n.to_string(),
                r.seed.to_string(),
                r.wall_nanos.to_string(),
                format!("{:016x}", r.checksum),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::Failed(e.to_string()))?;
        if rows.windows(2).any(|x| x[0].checksum != x[1].checksum) {
            mismatch.get_or_insert(n);
        }
    }
    match mismatch {
        None => Ok(()),
        Some(n) => Err(CliError::Failed(format!("checksums disagree across algorithms at n={n}"))),
    }
}
