//! `hkv` — command-line front end for the hyper-Kloosterman / Voronoi
//! verification library.
//!
//! Every subcommand evaluates or verifies one library object and emits a
//! versioned JSON document (complex numbers as `{re, im}`) or, with
//! `--emit csv`, a per-term table. Exit codes: 0 = all checks passed,
//! 1 = a check failed, 2 = usage or configuration error.
//!
//! The parsed command is fully serializable: `--save-config FILE` writes it
//! out, and `hkv run --config FILE` replays it. Reports carry no wall-clock
//! fields, so replays of the same configuration are byte-identical.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use hkv_core::characters::{list_characters, CharacterFilter, DirichletCharacter};
use hkv_core::gamma::GammaData;
use hkv_core::identities::{
    verify_gauss_twist, verify_hk2, verify_hksum, verify_lcac, verify_qo, verify_sogs,
    IdentityReport,
};
use hkv_core::kernels::{CutoffFunction, TestFunctionK};
use hkv_core::kloosterman::{
    calibrate_salie_lift, kl_scale, kloosterman, kloosterman_pm, kloosterman_table,
    KloostermanQuery, Method,
};
use hkv_core::ldata::{dirichlet_l, LData};
use hkv_core::report::VerificationReport;
use hkv_core::residue::{build_unit_group, PrimePowerModulus, UnitGroup};
use hkv_core::series::{verify_d_a, verify_gln_identity, SeriesIdentity};
use hkv_core::voronoi::{
    moment_direct, moment_recursion, moment_routes, voronoi_check, MomentQuery, VoronoiParams,
    VoronoiTheorem, VoronoiWeight,
};

// ---------------------------------------------------------------------------
// Command-line surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "hkv",
    version,
    about = "Hyper-Kloosterman sums, prime-power Dirichlet data, and Voronoi-style verification",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Emit::Json)]
    emit: Emit,
    /// Write the document to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Save the parsed run configuration to this file (for `hkv run --config`).
    #[arg(long, global = true)]
    save_config: Option<PathBuf>,
    /// Cache directory for expensive checks (env HKV_CACHE_DIR overrides).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum Emit {
    Json,
    Csv,
}

#[derive(Subcommand, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Cmd {
    /// Evaluate a single hyper-Kloosterman sum Kl_n(c, p^β).
    Kl(KlArgs),
    /// Run an exhaustive algebraic-identity suite.
    Verify(VerifyArgs),
    /// Evaluate an analytic kernel (V₁, V₂, Φ_u, Φ̃_u) at one point.
    Kernel(KernelArgs),
    /// Build and serialize an isobaric character datum.
    Ldata(LdataArgs),
    /// Two-sided series-identity checks (additive/Kloosterman/progression).
    #[command(subcommand)]
    Series(SeriesCmd),
    /// First-moment average of twisted L-values: direct, decomposed, recursion.
    #[command(subcommand)]
    Average(AverageCmd),
    /// Summation-formula (Voronoi-style) checks.
    #[command(subcommand)]
    Voronoi(VoronoiCmd),
    /// Timing comparisons.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Replay a saved run configuration.
    Run(RunArgs),
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct KlArgs {
    #[arg(long)]
    p: u64,
    #[arg(long)]
    beta: u32,
    #[arg(long)]
    n: u32,
    #[arg(long)]
    c: u64,
    #[arg(long, value_enum, default_value_t = MethodArg::Dp)]
    method: MethodArg,
    /// Evaluate the symmetrized sum Kl_n(c) + Kl_n(−c).
    #[arg(long, default_value_t = false)]
    pm: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum MethodArg {
    Naive,
    Dp,
    FftDp,
    Salie,
}

impl MethodArg {
    fn to_method(self) -> Method {
        match self {
            Self::Naive => Method::Naive,
            Self::Dp => Method::Dp,
            Self::FftDp => Method::FftDp,
            Self::Salie => Method::Salie,
        }
    }
    fn name(self) -> &'static str {
        match self {
            Self::Naive => "naive",
            Self::Dp => "dp",
            Self::FftDp => "fft_dp",
            Self::Salie => "salie",
        }
    }
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    suite: SuiteArg,
    #[arg(long, default_value_t = 5)]
    p: u64,
    #[arg(long, default_value_t = 3)]
    beta: u32,
    /// Kloosterman rank for the rank-dependent suites (sogs, hk2, hksum).
    #[arg(long, default_value_t = 2)]
    n: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum SuiteArg {
    Qo,
    Sogs,
    Lcac,
    Gausstwist,
    Hk2,
    Hksum,
    All,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct KernelArgs {
    #[arg(long, value_enum)]
    kind: KernelKind,
    /// Argument y of the kernel.
    #[arg(long)]
    y: f64,
    /// Spectral parameter δ as "re,im".
    #[arg(long, default_value = "0.6,0.3")]
    delta: String,
    /// Level parameter u (for Φ_u / Φ̃_u).
    #[arg(long, default_value_t = 1.5)]
    u: f64,
    /// Prime p (for Φ_u / Φ̃_u).
    #[arg(long, default_value_t = 5)]
    p: u64,
    /// Test function: gaussian surrogate or compactly supported bump.
    #[arg(long, value_enum, default_value_t = TestFnArg::Gaussian)]
    test_fn: TestFnArg,
    /// Force k to vanish at these points, as "re:im" pairs, comma separated.
    #[arg(long)]
    mu: Option<String>,
    /// Contour abscissa override.
    #[arg(long)]
    sigma: Option<f64>,
    /// Degree for the V₂ gamma data (trivial Satake parameters).
    #[arg(long, default_value_t = 2)]
    degree: u32,
    /// Component characters "q:index,…" fixing the Euler factor of Φ̃_u.
    #[arg(long, default_value = "7:0,13:0")]
    components: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum KernelKind {
    V1,
    V2,
    PhiU,
    PhiTildeU,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum TestFnArg {
    Gaussian,
    Bump,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct LdataArgs {
    /// Components "q:index,…": conductor and 0-based index into the primitive
    /// even character list mod q.
    #[arg(long, default_value = "7:0,13:0")]
    components: String,
    /// Emit the first M Dirichlet coefficients.
    #[arg(long, default_value_t = 8)]
    coeffs: u64,
    /// Evaluate L(s, π) (component product) at s = "re,im".
    #[arg(long)]
    l: Option<String>,
}

#[derive(Subcommand, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SeriesCmd {
    /// Evaluate both sides and report the two-sided residual.
    Verify(SeriesArgs),
    /// Evaluate one side only (runs the same two-sided machinery).
    Eval(SeriesEvalArgs),
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct SeriesArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, default_value_t = 5)]
    p: u64,
    #[arg(long, default_value_t = 2)]
    beta: u32,
    /// Twist class h (unit mod p^β).
    #[arg(long, default_value_t = 1)]
    h: u64,
    /// Kloosterman rank; defaults to the datum degree (2 for d_a).
    #[arg(long)]
    n_kl: Option<u32>,
    /// Evaluation point s as "re,im".
    #[arg(long, default_value = "-0.7,0.4")]
    s: String,
    /// GL_n components "q:index,…" (afi / afihk_prop / dafi_a).
    #[arg(long, default_value = "7:0")]
    components: String,
    /// GL₁ character "q:index" (d_a).
    #[arg(long, default_value = "7:0")]
    xi: String,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct SeriesEvalArgs {
    #[command(flatten)]
    base: SeriesArgs,
    #[arg(long, value_enum)]
    side: SideArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum SideArg {
    Left,
    Right,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum FamilyArg {
    Afi,
    AfihkProp,
    DafiA,
    DA,
}

#[derive(Subcommand, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AverageCmd {
    /// X_β as a direct average of twisted central values.
    Direct(MomentArgs),
    /// All evaluation routes side by side, with the twisted-sum blocks.
    Decompose(MomentArgs),
    /// Full recursion check (all routes must close).
    Recursion(MomentArgs),
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct MomentArgs {
    #[arg(long, default_value_t = 5)]
    p: u64,
    #[arg(long, default_value_t = 4)]
    beta: u32,
    #[arg(long, default_value_t = 1.5)]
    u: f64,
    /// Central point δ as "re,im".
    #[arg(long, default_value = "0.6,0.3")]
    delta: String,
    /// Datum components "q:index,…".
    #[arg(long, default_value = "7:0,13:0")]
    components: String,
}

#[derive(Subcommand, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum VoronoiCmd {
    /// Two-sided check of one summation formula.
    Check(VoronoiArgs),
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct VoronoiArgs {
    /// Theorem name: vsf_i, vsf_ii, vsf2_i, vsf2_ii, dafi_b_i, dafi_b_ii,
    /// d_b_i, d_b_ii, vsfk.
    #[arg(long)]
    theorem: String,
    #[arg(long, default_value_t = 5)]
    p: u64,
    #[arg(long, default_value_t = 2)]
    beta: u32,
    #[arg(long, default_value_t = 1)]
    h: u64,
    /// Kloosterman rank (GL₁ arms).
    #[arg(long, default_value_t = 2)]
    n_kl: u32,
    /// GL_n datum components "q:index,…".
    #[arg(long, default_value = "7:0,13:0")]
    components: String,
    /// GL₁ character "q:index" (d_b arms).
    #[arg(long, default_value = "7:0")]
    xi: String,
    #[arg(long, value_enum, default_value_t = WeightArg::GaussLog)]
    weight: WeightArg,
    /// Center of the Gaussian-in-log weight.
    #[arg(long, default_value_t = 50.0)]
    y0: f64,
    /// δ for the moment weight, as "re,im".
    #[arg(long, default_value = "0.6,0.3")]
    delta: String,
    /// Level parameter u for the moment weight.
    #[arg(long, default_value_t = 0.5)]
    u: f64,
    /// Dual truncation in units of the natural scale.
    #[arg(long, default_value_t = 4096.0)]
    x_cap: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum WeightArg {
    GaussLog,
    PhiInfinity,
}

#[derive(Subcommand, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BenchCmd {
    /// Per-method Kloosterman table timings across a β sweep.
    Kl(BenchKlArgs),
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct BenchKlArgs {
    #[arg(long, default_value_t = 11)]
    p: u64,
    /// Largest β in the sweep (β runs from 1 to this value).
    #[arg(long, default_value_t = 4)]
    beta: u32,
    #[arg(long, default_value_t = 3)]
    n: u32,
    /// Classes sampled for the per-class naive estimate.
    #[arg(long, default_value_t = 16)]
    sample: usize,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct RunArgs {
    /// Saved run configuration (JSON produced by --save-config).
    #[arg(long)]
    config: PathBuf,
}

/// Serialized form of one run: format choice plus the full command.
#[derive(Serialize, Deserialize)]
struct RunConfig {
    schema: u32,
    emit: Emit,
    command: Cmd,
}

// ---------------------------------------------------------------------------
// Entry point and dispatch
// ---------------------------------------------------------------------------

struct Outcome {
    doc: Value,
    csv: String,
    pass: bool,
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    let (emit, command) = match &cli.cmd {
        Cmd::Run(args) => match load_config(&args.config) {
            Ok(cfg) => (cfg.emit, cfg.command),
            Err(e) => {
                eprintln!("error: {e:#}");
                return 2;
            }
        },
        other => (cli.emit, other.clone()),
    };
    if matches!(command, Cmd::Run(_)) {
        eprintln!("error: a run configuration cannot itself contain a `run` command");
        return 2;
    }
    if let Some(path) = &cli.save_config {
        let cfg = RunConfig {
            schema: 1,
            emit,
            command: command.clone(),
        };
        let body = serde_json::to_string_pretty(&cfg).expect("config serialization");
        if let Err(e) = std::fs::write(path, body + "\n") {
            eprintln!("error: cannot write config {}: {e}", path.display());
            return 2;
        }
    }
    let outcome = match execute(&command, cache_dir(&cli.cache_dir)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 2;
        }
    };
    let body = match emit {
        Emit::Json => serde_json::to_string_pretty(&outcome.doc).expect("json serialization") + "\n",
        Emit::Csv => outcome.csv.clone(),
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, body) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return 2;
            }
        }
        None => print!("{body}"),
    }
    if outcome.pass {
        0
    } else {
        1
    }
}

fn load_config(path: &PathBuf) -> Result<RunConfig> {
    let body = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let cfg: RunConfig =
        serde_json::from_str(&body).with_context(|| "config file is not a valid run config")?;
    if cfg.schema != 1 {
        bail!("unsupported config schema {}", cfg.schema);
    }
    Ok(cfg)
}

fn execute(cmd: &Cmd, cache: Option<PathBuf>) -> Result<Outcome> {
    match cmd {
        Cmd::Kl(a) => cmd_kl(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Kernel(a) => cmd_kernel(a),
        Cmd::Ldata(a) => cmd_ldata(a),
        Cmd::Series(SeriesCmd::Verify(a)) => cmd_series(a, None),
        Cmd::Series(SeriesCmd::Eval(a)) => cmd_series(&a.base, Some(a.side)),
        Cmd::Average(a) => cmd_average(a),
        Cmd::Voronoi(VoronoiCmd::Check(a)) => with_cache(cmd, cache, || cmd_voronoi(a)),
        Cmd::Bench(BenchCmd::Kl(a)) => cmd_bench_kl(a),
        Cmd::Run(_) => unreachable!("run is resolved before dispatch"),
    }
}

// ---------------------------------------------------------------------------
// Caching
// ---------------------------------------------------------------------------

fn cache_dir(flag: &Option<PathBuf>) -> Option<PathBuf> {
    std::env::var_os("HKV_CACHE_DIR")
        .map(PathBuf::from)
        .or_else(|| flag.clone())
}

/// FNV-1a, enough to key a cache of our own serialized configs.
fn fnv64(s: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn with_cache(cmd: &Cmd, cache: Option<PathBuf>, f: impl FnOnce() -> Result<Outcome>) -> Result<Outcome> {
    let Some(dir) = cache else {
        return f();
    };
    let key = fnv64(&serde_json::to_string(cmd).expect("command serialization"));
    let path = dir.join(format!("hkv-{key:016x}.json"));
    if let Ok(body) = std::fs::read_to_string(&path) {
        if let Ok(v) = serde_json::from_str::<Value>(&body) {
            if let (Some(doc), Some(csv), Some(pass)) = (
                v.get("doc").cloned(),
                v.get("csv").and_then(|c| c.as_str()),
                v.get("pass").and_then(|p| p.as_bool()),
            ) {
                return Ok(Outcome {
                    doc,
                    csv: csv.to_string(),
                    pass,
                });
            }
        }
    }
    let out = f()?;
    let _ = std::fs::create_dir_all(&dir);
    let wrapped = json!({"doc": out.doc, "csv": out.csv, "pass": out.pass});
    let _ = std::fs::write(&path, serde_json::to_string(&wrapped).expect("cache serialization"));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

fn parse_complex(s: &str) -> Result<Complex64> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [re] => Ok(Complex64::new(re.trim().parse()?, 0.0)),
        [re, im] => Ok(Complex64::new(re.trim().parse()?, im.trim().parse()?)),
        _ => bail!("expected a complex number as \"re,im\", got {s:?}"),
    }
}

fn factor_prime_power(q: u64) -> Result<(u64, u32)> {
    if q < 2 {
        bail!("{q} is not a prime power");
    }
    let mut p = 2;
    while p * p <= q {
        if q % p == 0 {
            break;
        }
        p += 1;
    }
    if q % p != 0 {
        p = q;
    }
    let mut beta = 0;
    let mut m = q;
    while m % p == 0 {
        m /= p;
        beta += 1;
    }
    if m != 1 {
        bail!("{q} is not a prime power");
    }
    Ok((p, beta))
}

fn group(p: u64, beta: u32) -> Result<Arc<UnitGroup>> {
    let md = PrimePowerModulus::new(p, beta).map_err(|e| anyhow!("{e}"))?;
    Ok(Arc::new(build_unit_group(md).map_err(|e| anyhow!("{e}"))?))
}

/// "q:index" — index is 0-based into the primitive even character list mod q.
fn parse_character(spec: &str) -> Result<DirichletCharacter> {
    let (qs, is) = spec
        .split_once(':')
        .ok_or_else(|| anyhow!("expected \"q:index\", got {spec:?}"))?;
    let q: u64 = qs.trim().parse()?;
    let idx: usize = is.trim().parse()?;
    let (p, beta) = factor_prime_power(q)?;
    let g = group(p, beta)?;
    let chars = list_characters(&g, CharacterFilter::PrimitiveEven);
    chars
        .into_iter()
        .nth(idx)
        .ok_or_else(|| anyhow!("character index {idx} out of range for conductor {q}"))
}

fn parse_datum(components: &str) -> Result<LData> {
    let comps: Result<Vec<_>> = components.split(',').map(parse_character).collect();
    LData::isobaric(comps?).map_err(|e| anyhow!("{e}"))
}

fn parse_mu_list(s: &str) -> Result<Vec<Complex64>> {
    s.split(',')
        .map(|item| {
            let (re, im) = item.split_once(':').unwrap_or((item, "0"));
            Ok(Complex64::new(re.trim().parse()?, im.trim().parse()?))
        })
        .collect()
}

fn cj(z: Complex64) -> Value {
    json!({"re": z.re, "im": z.im})
}

fn sig15(x: f64) -> String {
    format!("{x:.14e}")
}

fn csv_table(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn report_csv(r: &VerificationReport) -> String {
    let mut rows = vec![
        vec!["lhs".into(), sig15(r.lhs.re), sig15(r.lhs.im)],
        vec!["rhs".into(), sig15(r.rhs.re), sig15(r.rhs.im)],
        vec!["residual".into(), sig15(r.residual), sig15(0.0)],
        vec!["scale".into(), sig15(r.scale), sig15(0.0)],
        vec!["bar".into(), sig15(r.bar), sig15(0.0)],
    ];
    for (label, v) in &r.diagnostics {
        rows.push(vec![label.clone(), sig15(v.re), sig15(v.im)]);
    }
    csv_table("label,re,im", &rows)
}

fn report_outcome(r: VerificationReport) -> Result<Outcome> {
    let csv = report_csv(&r);
    let pass = r.pass;
    Ok(Outcome {
        doc: serde_json::to_value(&r)?,
        csv,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Subcommand handlers
// ---------------------------------------------------------------------------

fn cmd_kl(a: &KlArgs) -> Result<Outcome> {
    let md = PrimePowerModulus::new(a.p, a.beta).map_err(|e| anyhow!("{e}"))?;
    let g = build_unit_group(md).map_err(|e| anyhow!("{e}"))?;
    let query = KloostermanQuery {
        n: a.n,
        c: a.c,
        modulus: md,
        method: a.method.to_method(),
    };
    let convention = if a.method == MethodArg::Salie {
        let (conv, _) = calibrate_salie_lift(&g, a.n, Method::FftDp).map_err(|e| anyhow!("{e}"))?;
        Some(conv)
    } else {
        None
    };
    let t0 = Instant::now();
    let value = if a.pm {
        kloosterman_pm(&g, &query, convention)
    } else {
        kloosterman(&g, &query, convention)
    }
    .map_err(|e| anyhow!("{e}"))?;
    let runtime_ns = t0.elapsed().as_nanos() as u64;
    let doc = json!({
        "schema": 1,
        "p": a.p,
        "beta": a.beta,
        "n": a.n,
        "c": a.c,
        "method": a.method.name(),
        "pm": a.pm,
        "value_re": value.re,
        "value_im": value.im,
        "scale": kl_scale(&md, a.n),
        "runtime_ns": runtime_ns,
    });
    let csv = csv_table(
        "label,re,im",
        &[vec!["kl".into(), sig15(value.re), sig15(value.im)]],
    );
    Ok(Outcome {
        doc,
        csv,
        pass: true,
    })
}

fn cmd_verify(a: &VerifyArgs) -> Result<Outcome> {
    if a.n == 0 || a.n % (a.p as u32) == 0 {
        bail!("rank n must be positive and coprime to p");
    }
    let g = group(a.p, a.beta)?;
    let suites: Vec<SuiteArg> = match a.suite {
        SuiteArg::All => vec![
            SuiteArg::Qo,
            SuiteArg::Sogs,
            SuiteArg::Lcac,
            SuiteArg::Gausstwist,
            SuiteArg::Hk2,
            SuiteArg::Hksum,
        ],
        s => vec![s],
    };
    let reports: Vec<IdentityReport> = suites
        .iter()
        .map(|s| match s {
            SuiteArg::Qo => verify_qo(&g),
            SuiteArg::Sogs => verify_sogs(&g, a.n),
            SuiteArg::Lcac => verify_lcac(&g),
            SuiteArg::Gausstwist => verify_gauss_twist(&g),
            SuiteArg::Hk2 => verify_hk2(&g, a.n),
            SuiteArg::Hksum => verify_hksum(&g, a.n),
            SuiteArg::All => unreachable!(),
        })
        .collect();
    let pass = reports.iter().all(|r| r.pass);
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                format!("{:?}", r.identity_id),
                sig15(r.max_abs_residual),
                r.cases_checked.to_string(),
                r.exhaustive.to_string(),
                r.pass.to_string(),
            ]
        })
        .collect();
    Ok(Outcome {
        doc: json!({
            "schema": 1,
            "p": a.p,
            "beta": a.beta,
            "n": a.n,
            "pass": pass,
            "reports": serde_json::to_value(&reports)?,
        }),
        csv: csv_table("identity,max_abs_residual,cases_checked,exhaustive,pass", &rows),
        pass,
    })
}

fn cmd_kernel(a: &KernelArgs) -> Result<Outcome> {
    let delta = parse_complex(&a.delta)?;
    let k = match &a.mu {
        Some(mu) => TestFunctionK::vanishing_at_mu(parse_mu_list(mu)?),
        None => match a.test_fn {
            TestFnArg::Gaussian => TestFunctionK::gaussian(),
            TestFnArg::Bump => TestFunctionK::compact_bump(),
        },
    };
    let f = match a.kind {
        KernelKind::V1 => CutoffFunction::v1(&k, a.sigma),
        KernelKind::V2 => CutoffFunction::v2(&k, &GammaData::trivial(a.degree), delta, a.sigma),
        KernelKind::PhiU => CutoffFunction::phi_u(&k, delta, a.p, a.u, a.sigma),
        KernelKind::PhiTildeU => {
            let d = parse_datum(&a.components)?;
            let euler = d.dual().satake_at(a.p);
            CutoffFunction::phi_tilde_u(&k, delta, a.p, a.u, euler, a.sigma)
        }
    };
    let value = f.eval(a.y);
    let tail = f.tail(a.y);
    let kind = match a.kind {
        KernelKind::V1 => "v1",
        KernelKind::V2 => "v2",
        KernelKind::PhiU => "phi_u",
        KernelKind::PhiTildeU => "phi_tilde_u",
    };
    Ok(Outcome {
        doc: json!({
            "schema": 1,
            "kind": kind,
            "y": a.y,
            "delta": cj(delta),
            "u": a.u,
            "p": a.p,
            "value_re": value.re,
            "value_im": value.im,
            "tail_bound": tail,
        }),
        csv: csv_table(
            "label,re,im",
            &[
                vec![kind.into(), sig15(value.re), sig15(value.im)],
                vec!["tail_bound".into(), sig15(tail), sig15(0.0)],
            ],
        ),
        pass: true,
    })
}

fn cmd_ldata(a: &LdataArgs) -> Result<Outcome> {
    let d = parse_datum(&a.components)?;
    let comps: Vec<Value> = d
        .components
        .iter()
        .map(|xi| {
            json!({
                "conductor": xi.modulus(),
                "index": xi.index,
                "even": xi.even,
                "primitive": xi.primitive,
            })
        })
        .collect();
    let coeffs = d.coeff_range(a.coeffs.max(1));
    let coeff_rows: Vec<Value> = (1..=a.coeffs)
        .map(|m| {
            let c = coeffs[m as usize - 1];
            json!({"m": m, "re": c.re, "im": c.im})
        })
        .collect();
    let l_value = match &a.l {
        Some(spec) => {
            let s = parse_complex(spec)?;
            let mut prod = Complex64::new(1.0, 0.0);
            for xi in &d.components {
                prod *= dirichlet_l(xi, s).map_err(|e| anyhow!("{e}"))?;
            }
            Some(prod)
        }
        None => None,
    };
    let mut doc = json!({
        "schema": 1,
        "n": d.n,
        "N": d.conductor,
        "components": comps,
        "W_re": d.w.re,
        "W_im": d.w.im,
        "coeffs": coeff_rows,
    });
    if let Some(l) = l_value {
        doc["l"] = cj(l);
    }
    let rows: Vec<Vec<String>> = (1..=a.coeffs)
        .map(|m| {
            let c = coeffs[m as usize - 1];
            vec![m.to_string(), sig15(c.re), sig15(c.im)]
        })
        .collect();
    Ok(Outcome {
        doc,
        csv: csv_table("m,re,im", &rows),
        pass: true,
    })
}

fn cmd_series(a: &SeriesArgs, side: Option<SideArg>) -> Result<Outcome> {
    let s = parse_complex(&a.s)?;
    let g = group(a.p, a.beta)?;
    let g_lower = if a.beta >= 2 {
        Some(group(a.p, a.beta - 1)?)
    } else {
        None
    };
    let report = match a.family {
        FamilyArg::DA => {
            let xi = parse_character(&a.xi)?;
            let n_kl = a.n_kl.unwrap_or(2);
            verify_d_a(&xi, &g, g_lower.as_ref(), a.h, n_kl, s, a.tol)
        }
        family => {
            let d = parse_datum(&a.components)?;
            let n_kl = a.n_kl.unwrap_or(d.n as u32);
            let id = match family {
                FamilyArg::Afi => SeriesIdentity::Afi,
                FamilyArg::AfihkProp => SeriesIdentity::AfihkProp,
                FamilyArg::DafiA => SeriesIdentity::DafiA,
                FamilyArg::DA => unreachable!(),
            };
            verify_gln_identity(id, &d, &g, g_lower.as_ref(), a.h, n_kl, s, a.tol)
        }
    };
    match side {
        None => report_outcome(report),
        Some(side) => {
            let v: Complex64 = match side {
                SideArg::Left => report.lhs.into(),
                SideArg::Right => report.rhs.into(),
            };
            let label = match side {
                SideArg::Left => "left",
                SideArg::Right => "right",
            };
            Ok(Outcome {
                doc: json!({
                    "schema": 1,
                    "check": report.check,
                    "side": label,
                    "value": cj(v),
                }),
                csv: csv_table(
                    "label,re,im",
                    &[vec![label.into(), sig15(v.re), sig15(v.im)]],
                ),
                pass: true,
            })
        }
    }
}

fn build_moment_query(a: &MomentArgs) -> Result<MomentQuery> {
    let delta = parse_complex(&a.delta)?;
    let d = parse_datum(&a.components)?;
    let g = group(a.p, a.beta)?;
    MomentQuery::new(d, g, delta, a.u).map_err(|e| anyhow!("{e}"))
}

fn cmd_average(cmd: &AverageCmd) -> Result<Outcome> {
    match cmd {
        AverageCmd::Direct(a) => {
            let q = build_moment_query(a)?;
            let v = moment_direct(&q).map_err(|e| anyhow!("{e}"))?;
            Ok(Outcome {
                doc: json!({
                    "schema": 1,
                    "check": "moment_direct",
                    "p": a.p, "beta": a.beta, "u": a.u,
                    "value": cj(v),
                }),
                csv: csv_table(
                    "label,re,im",
                    &[vec!["direct".into(), sig15(v.re), sig15(v.im)]],
                ),
                pass: true,
            })
        }
        AverageCmd::Decompose(a) => {
            let q = build_moment_query(a)?;
            let r = moment_routes(&q).map_err(|e| anyhow!("{e}"))?;
            let mut rows = vec![
                ("direct".to_string(), r.direct),
                ("x1".to_string(), r.x1),
                ("x1_phi".to_string(), r.x1_phi),
                ("x2".to_string(), r.x2),
                ("route_b".to_string(), r.route_b),
                ("route_d".to_string(), r.route_d),
            ];
            if let Some(c) = r.route_c {
                rows.push(("route_c".to_string(), c));
            }
            if let Some(dec) = &r.decomposition {
                rows.push(("residue_level0".to_string(), dec.residue_level0));
                rows.push(("s1_block".to_string(), dec.s1_block));
                for (j, b) in dec.s2_blocks.iter().enumerate() {
                    rows.push((format!("s2_block_{}", j + 1), *b));
                }
                rows.push(("s2_boundary".to_string(), dec.s2_boundary));
                rows.push(("total".to_string(), dec.total));
                rows.push(("g0".to_string(), dec.g0));
            }
            let doc_rows: Vec<Value> = rows
                .iter()
                .map(|(l, v)| json!({"label": l, "re": v.re, "im": v.im}))
                .collect();
            let csv_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|(l, v)| vec![l.clone(), sig15(v.re), sig15(v.im)])
                .collect();
            Ok(Outcome {
                doc: json!({
                    "schema": 1,
                    "check": "moment_decomposition",
                    "p": a.p, "beta": a.beta, "u": a.u,
                    "contour_bar": r.contour_bar,
                    "terms": doc_rows,
                }),
                csv: csv_table("label,re,im", &csv_rows),
                pass: true,
            })
        }
        AverageCmd::Recursion(a) => {
            let q = build_moment_query(a)?;
            let r = moment_recursion(&q).map_err(|e| anyhow!("{e}"))?;
            report_outcome(r)
        }
    }
}

fn cmd_voronoi(a: &VoronoiArgs) -> Result<Outcome> {
    let theorem: VoronoiTheorem = a
        .theorem
        .parse()
        .map_err(|_| anyhow!("unknown theorem {:?}", a.theorem))?;
    let g = group(a.p, a.beta)?;
    let gl1 = matches!(theorem, VoronoiTheorem::DBI | VoronoiTheorem::DBII);
    let (datum, xi) = if gl1 {
        (None, Some(parse_character(&a.xi)?))
    } else {
        (Some(parse_datum(&a.components)?), None)
    };
    let weight = match a.weight {
        WeightArg::GaussLog => VoronoiWeight::GaussLog { y0: a.y0 },
        WeightArg::PhiInfinity => VoronoiWeight::PhiInfinity {
            delta: parse_complex(&a.delta)?,
            u: a.u,
        },
    };
    let params = VoronoiParams {
        datum,
        xi,
        group: g,
        h: a.h,
        n_kl: a.n_kl,
        weight,
        x_cap: a.x_cap,
        tolerance: a.tol,
    };
    let report = voronoi_check(theorem, &params).map_err(|e| anyhow!("{e}"))?;
    report_outcome(report)
}

fn cmd_bench_kl(a: &BenchKlArgs) -> Result<Outcome> {
    if a.n == 0 || a.n % (a.p as u32) == 0 {
        bail!("rank n must be positive and coprime to p");
    }
    let mut rows: Vec<Value> = Vec::new();
    let mut csv_rows: Vec<Vec<String>> = Vec::new();
    for beta in 1..=a.beta {
        let md = PrimePowerModulus::new(a.p, beta).map_err(|e| anyhow!("{e}"))?;
        let g = build_unit_group(md).map_err(|e| anyhow!("{e}"))?;
        let phi = g.order;

        // naive: per-class estimate from a sample, extrapolated to a full table
        let sample = (a.sample as u64).min(phi).max(1);
        let t0 = Instant::now();
        for c in g.units().take(sample as usize) {
            let q = KloostermanQuery {
                n: a.n,
                c,
                modulus: md,
                method: Method::Naive,
            };
            let _ = kloosterman(&g, &q, None).map_err(|e| anyhow!("{e}"))?;
        }
        let naive_total = t0.elapsed().as_nanos() as u64;
        let naive_per_class = naive_total as f64 / sample as f64;
        rows.push(json!({
            "beta": beta,
            "method": "naive",
            "classes": sample,
            "total_ns": naive_total,
            "per_class_ns": naive_per_class,
            "est_full_table_ns": naive_per_class * phi as f64,
        }));
        csv_rows.push(vec![
            beta.to_string(),
            "naive".into(),
            sample.to_string(),
            naive_total.to_string(),
            sig15(naive_per_class),
            sig15(naive_per_class * phi as f64),
        ]);

        for (name, method) in [("dp", Method::Dp), ("fft_dp", Method::FftDp)] {
            let t0 = Instant::now();
            let table = kloosterman_table(&g, a.n, method);
            let total = t0.elapsed().as_nanos() as u64;
            assert_eq!(table.len() as u64, phi);
            rows.push(json!({
                "beta": beta,
                "method": name,
                "classes": phi,
                "total_ns": total,
                "per_class_ns": total as f64 / phi as f64,
                "est_full_table_ns": total as f64,
            }));
            csv_rows.push(vec![
                beta.to_string(),
                name.into(),
                phi.to_string(),
                total.to_string(),
                sig15(total as f64 / phi as f64),
                sig15(total as f64),
            ]);
        }

        if beta >= 4 && beta % 2 == 0 {
            if let Ok((conv, _)) = calibrate_salie_lift(&g, a.n, Method::FftDp) {
                let t0 = Instant::now();
                for c in g.units() {
                    let q = KloostermanQuery {
                        n: a.n,
                        c,
                        modulus: md,
                        method: Method::Salie,
                    };
                    let _ = kloosterman(&g, &q, Some(conv)).map_err(|e| anyhow!("{e}"))?;
                }
                let total = t0.elapsed().as_nanos() as u64;
                rows.push(json!({
                    "beta": beta,
                    "method": "salie",
                    "classes": phi,
                    "total_ns": total,
                    "per_class_ns": total as f64 / phi as f64,
                    "est_full_table_ns": total as f64,
                }));
                csv_rows.push(vec![
                    beta.to_string(),
                    "salie".into(),
                    phi.to_string(),
                    total.to_string(),
                    sig15(total as f64 / phi as f64),
                    sig15(total as f64),
                ]);
            }
        }
    }
    Ok(Outcome {
        doc: json!({
            "schema": 1,
            "p": a.p,
            "n": a.n,
            "rows": rows,
        }),
        csv: csv_table(
            "beta,method,classes,total_ns,per_class_ns,est_full_table_ns",
            &csv_rows,
        ),
        pass: true,
    })
}
