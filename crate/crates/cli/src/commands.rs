use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde_json::{json, Value};

use magicrect_core::coloring::PairSchedule;
use magicrect_core::games::{classical_value as game_value, GameSpec};
use magicrect_core::ledger::{exact_epsilons, ledger_verify, BoundReport, CrossCheck, VerifyOptions};
use magicrect_core::protocol::estimate::DEFAULT_ALPHA;
use magicrect_core::protocol::{estimate_epsilons, run_protocol, EpsilonReport, JointSampler, RoundMix};
use magicrect_core::strategies::RoundType;
use magicrect_core::wire::{
    self, connect_with_retry, device_kind_name, prover_loop, referee_serve, Endpoint, RefereeConfig, Role,
    ServiceResponder,
};

use crate::config::{check_n, check_simulation_cap, pick, require, DeviceSpec, RunConfig};
use crate::output::{header, record, resolve, round_sig, write_records};
use crate::{DeviceArgs, VerificationFailed};

/// `println!` that exits quietly when stdout has been closed.
macro_rules! say {
    ($($t:tt)*) => {{
        if let Err(e) = writeln!(std::io::stdout(), $($t)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
        }
    }};
}

pub struct Ctx {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
}

fn device_spec(args: DeviceArgs, cfg: &RunConfig) -> DeviceSpec {
    DeviceSpec { kind: args.device, file: args.device_file, theta: args.theta, angles: args.angles }.merged(cfg)
}

fn mix_for(flag: Option<String>, cfg: &RunConfig, n: usize) -> Result<RoundMix> {
    Ok(match flag.or_else(|| cfg.mix.clone()) {
        Some(text) => RoundMix::parse(&text, n)?,
        None => RoundMix::uniform(n),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{:.6}", x)).unwrap_or_else(|| "-".into())
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rounds: Option<u64>,
    /// Round-type weights `w0,w1,w2`.
    #[arg(long)]
    mix: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Confidence parameter of the Hoeffding intervals.
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    device: DeviceArgs,
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn simulate(ctx: &Ctx, a: SimulateArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let n = require(a.n, cfg.n, "n")?;
    check_n(n)?;
    check_simulation_cap(n)?;
    let rounds = pick(a.rounds, cfg.rounds, 10_000);
    let seed = pick(a.seed, cfg.seed, 0);
    let alpha = pick(a.alpha, cfg.alpha, DEFAULT_ALPHA);
    let mix = mix_for(a.mix, cfg, n)?;
    let device = device_spec(a.device, cfg).build(n)?;
    if rounds == 0 {
        bail!("--rounds must be positive");
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!("--alpha must lie in (0, 1)");
    }

    let t = run_protocol(&device, rounds, &mix, seed)?;
    let rep = estimate_epsilons(&t, alpha)?;
    let exact = if device.is_pauli_bell() { Some(exact_epsilons(&device)?.0) } else { None };

    let kind = device_kind_name(device.kind());
    let tpath = resolve(&ctx.out_dir, a.transcript, format!("transcript-n{n}-seed{seed}.jsonl"));
    let rpath = resolve(&ctx.out_dir, a.report, format!("report-n{n}-seed{seed}.jsonl"));
    if let Some(dir) = tpath.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(&tpath).with_context(|| format!("creating {}", tpath.display()))?);
    t.write_jsonl(&mut w)?;
    w.flush()?;

    let rates: Value = RoundType::ALL
        .iter()
        .map(|&c| (format!("{c:?}"), json!(t.accept_rate(Some(c)))))
        .chain([("all".to_string(), json!(t.accept_rate(None)))])
        .collect::<serde_json::Map<_, _>>()
        .into();
    let mut lines = vec![
        header("simulate", Some(seed), json!({ "n": n, "rounds": rounds, "device": kind, "alpha": alpha, "mix": mix.weights })),
        json!({ "accept-rates": rates }),
        record("epsilon-report", &rep)?,
    ];
    if let Some(e) = exact {
        lines.push(json!({ "exact-eps": e }));
    }
    write_records(&rpath, &lines, false)?;

    say!("n = {n}, device = {kind}, rounds = {rounds}, seed = {seed}");
    say!("{:<12} {:>8} {:>10} {:>10} {:>10} {:>10}", "family", "rounds", "accept", "eps_hat", "eps_upper", "exact");
    for c in RoundType::ALL {
        let f = rep.family(c);
        say!(
            "{:<12} {:>8} {:>10} {:>10} {:>10} {:>10}",
            format!("{c:?}"),
            f.rounds,
            fmt_opt(t.accept_rate(Some(c))),
            fmt_opt(f.eps_hat),
            fmt_opt(f.eps_upper),
            fmt_opt(exact.map(|e| e[c.code() as usize]).filter(|_| f.rounds > 0)),
        );
    }
    say!("transcript: {}", tpath.display());
    say!("report: {}", rpath.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    eps0: Option<f64>,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    /// Use the upper confidence ends from a `simulate` report.
    #[arg(long, conflicts_with_all = ["eps0", "eps1", "eps2"])]
    from_report: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Reads the header seed and ε report from a `simulate` report file.
fn load_report(path: &Path) -> Result<(Option<u64>, EpsilonReport)> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut seed = None;
    for line in BufReader::new(f).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(s) = v.pointer("/header/seed").and_then(Value::as_u64) {
            seed = Some(s);
        }
        if let Some(r) = v.get("epsilon-report") {
            return Ok((seed, serde_json::from_value(r.clone())?));
        }
    }
    Err(anyhow!("{} holds no epsilon-report record", path.display()))
}

pub fn bounds(ctx: &Ctx, a: BoundsArgs) -> Result<()> {
    let (n, eps, seed, source) = match &a.from_report {
        Some(p) => {
            let (seed, rep) = load_report(p)?;
            if let Some(n) = a.n.filter(|&n| n != rep.n) {
                bail!("--n {n} disagrees with the report's n = {}", rep.n);
            }
            (rep.n, rep.upper_ends(), seed, json!(p.display().to_string()))
        }
        None => {
            let n = require(a.n, ctx.cfg.n, "n")?;
            (n, [a.eps0.unwrap_or(0.0), a.eps1.unwrap_or(0.0), a.eps2.unwrap_or(0.0)], None, json!("flags"))
        }
    };
    check_n(n)?;
    let rep = BoundReport::from_catalog(n, eps)?;
    let path = resolve(&ctx.out_dir, a.out, format!("bounds-n{n}.jsonl"));
    write_records(&path, &[header("bounds", seed, json!({ "n": n, "source": source })), record("bound-report", &rep)?], false)?;

    say!("n = {n}, eps = ({}, {}, {})", round_sig(eps[0]), round_sig(eps[1]), round_sig(eps[2]));
    for e in &rep.entries {
        say!("{:<24} {:>16} {}", e.name, format!("{:.10}", e.rhs), if e.summary { "summary" } else { "" });
    }
    say!("delta = {:.10}", rep.delta);
    say!("note: {}", rep.scaling_note);
    say!("report: {}", path.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Rotation angles to scan, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    thetas: Option<Vec<f64>>,
    /// Run a single named device instead of the rotation scan.
    #[arg(long)]
    device: Option<String>,
    /// none, worst, all or auto.
    #[arg(long, default_value = "auto")]
    cross_check: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Corrupts the correlation entries so the check must fail.
    #[arg(long, hide = true)]
    inject_bug: bool,
}

pub fn verify_norms(ctx: &Ctx, a: VerifyArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let n = require(a.n, cfg.n, "n")?;
    check_n(n)?;
    let cross_check = match a.cross_check.as_str() {
        "none" => CrossCheck::None,
        "worst" => CrossCheck::Worst,
        "all" => CrossCheck::All,
        "auto" => CrossCheck::Auto,
        other => bail!("unknown --cross-check `{other}`"),
    };
    let opts = VerifyOptions { cross_check, inject_bug: a.inject_bug };
    let runs: Vec<(String, DeviceSpec)> = match a.device.or_else(|| cfg.device.clone()) {
        Some(kind) if kind != "noisy" && kind != "honest" => {
            vec![(kind.clone(), DeviceSpec { kind: Some(kind), ..Default::default() })]
        }
        _ => pick(a.thetas, cfg.thetas.clone(), vec![0.0, 0.05, 0.1, 0.2, 0.5])
            .into_iter()
            .map(|t| (format!("theta={t}"), DeviceSpec { kind: Some("noisy".into()), theta: Some(t), ..Default::default() }))
            .collect(),
    };

    let mut lines = vec![header("verify-norms", None, json!({ "n": n, "cross-check": a.cross_check }))];
    let mut failures = Vec::new();
    for (label, spec) in runs {
        let dev = spec.build(n)?;
        let rep = ledger_verify(&dev, opts)?;
        let failed: Vec<&str> = rep.entries.iter().filter(|e| e.pass == Some(false)).map(|e| e.name.as_str()).collect();
        say!(
            "{label:<16} eps = ({:.6}, {:.6}, {:.6})  min margin {:>12}  {}",
            rep.eps[0],
            rep.eps[1],
            rep.eps[2],
            rep.min_margin().map(|m| format!("{m:.4e}")).unwrap_or_else(|| "-".into()),
            if failed.is_empty() { "PASS".to_string() } else { format!("FAIL {}", failed.join(",")) }
        );
        if !failed.is_empty() {
            failures.push(format!("{label}: {}", failed.join(",")));
        }
        let mut line = record("ledger", &rep)?;
        line["run"] = json!(label);
        lines.push(line);
    }
    let path = resolve(&ctx.out_dir, a.out, format!("ledger-n{n}.jsonl"));
    write_records(&path, &lines, false)?;
    say!("ledger: {}", path.display());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(VerificationFailed(failures.join("; ")).into())
    }
}

#[derive(Debug, Args)]
pub struct ClassicalArgs {
    /// Spec file: `m n`, then row signs, then column signs.
    #[arg(required_unless_present = "rectangle")]
    spec: Option<PathBuf>,
    /// Use the built-in 3×n rectangle instead of a file.
    #[arg(long, conflicts_with = "spec")]
    rectangle: Option<usize>,
}

pub fn classical_value(_ctx: &Ctx, a: ClassicalArgs) -> Result<()> {
    let spec = match (a.spec, a.rectangle) {
        (_, Some(n)) => GameSpec::magic_rectangle(n),
        (Some(p), None) => std::fs::read_to_string(&p)
            .with_context(|| format!("reading {}", p.display()))?
            .parse::<GameSpec>()?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    say!("{}", game_value(&spec)?);
    Ok(())
}

#[derive(Debug, Args)]
pub struct ColoringArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Print the classes as JSON.
    #[arg(long)]
    json: bool,
}

pub fn coloring(ctx: &Ctx, a: ColoringArgs) -> Result<()> {
    let n = require(a.n, ctx.cfg.n, "n")?;
    let sched = PairSchedule::new(n)?;
    if let Err(defect) = sched.verify() {
        return Err(VerificationFailed(defect).into());
    }
    if a.json {
        let classes: Vec<&[(usize, usize)]> = (1..=n).map(|v| sched.class(v)).collect();
        say!("{}", json!({ "n": n, "classes": classes }));
    } else {
        say!("{}", sched.render().trim_end());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct RefereeArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long)]
    mix: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "127.0.0.1:7300")]
    listen: String,
    /// Per-round answer deadline in milliseconds.
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    transcript: Option<PathBuf>,
}

fn bind(addr: &str) -> Result<TcpListener> {
    let l = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
    say!("listening on {}", l.local_addr()?);
    std::io::stdout().flush()?;
    Ok(l)
}

fn accept_two(l: &TcpListener) -> Result<(Endpoint, Endpoint)> {
    let a = Endpoint::tcp(l.accept()?.0)?;
    let b = Endpoint::tcp(l.accept()?.0)?;
    Ok((a, b))
}

pub fn serve_referee(ctx: &Ctx, a: RefereeArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let n = require(a.n, cfg.n, "n")?;
    check_n(n)?;
    let rounds = pick(a.rounds, cfg.rounds, 1000);
    let seed = pick(a.seed, cfg.seed, 0);
    let mix = mix_for(a.mix, cfg, n)?;
    let timeout = Duration::from_millis(pick(a.timeout_ms, cfg.timeout_ms, 5000));
    let listener = bind(&a.listen)?;
    let (e1, e2) = accept_two(&listener)?;
    let out = referee_serve(&RefereeConfig { n, rounds, mix, seed, timeout }, e1, e2)?;

    let path = resolve(&ctx.out_dir, a.transcript, format!("wire-transcript-n{n}-seed{seed}.jsonl"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(&path)?);
    out.transcript.write_jsonl(&mut w)?;
    w.flush()?;
    say!(
        "rounds {} recorded, {} voided, accept rate {}",
        out.transcript.records.len(),
        out.voided.len(),
        fmt_opt(out.transcript.accept_rate(None))
    );
    say!("transcript: {}", path.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct ProverArgs {
    /// A (Alice) or B (Bob).
    #[arg(long)]
    role: Role,
    #[arg(long)]
    n: Option<usize>,
    /// Referee address.
    #[arg(long)]
    connect: String,
    /// State service address.
    #[arg(long)]
    service: String,
    /// Device kind the service is expected to hold.
    #[arg(long)]
    device: Option<String>,
    /// Connection attempts after the first.
    #[arg(long)]
    retries: Option<u32>,
    #[arg(long)]
    timeout_ms: Option<u64>,
}

fn canonical_kind(kind: &str) -> String {
    match kind {
        "noisy" => "noisy-honest",
        "padded" => "padded-adversary",
        "standard-square" => "standard-square-baseline",
        k => k,
    }
    .to_string()
}

pub fn prover(ctx: &Ctx, a: ProverArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let n = require(a.n, cfg.n, "n")?;
    check_n(n)?;
    let retries = pick(a.retries, cfg.retries, 5);
    let timeout = Duration::from_millis(pick(a.timeout_ms, cfg.timeout_ms, 5000));
    let device = a.device.or_else(|| cfg.device.clone()).map(|k| canonical_kind(&k));
    let link = connect_with_retry(a.service.as_str(), retries)?;
    let mut responder = ServiceResponder::connect(link, a.role, n, device, timeout)?;
    let mut ep = connect_with_retry(a.connect.as_str(), retries)?;
    let stats = prover_loop(&mut responder, a.role, n, &mut ep)?;
    say!(
        "prover {}: answered {}, accepted {}, rejected {}",
        a.role, stats.answered, stats.accepted, stats.rejected
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct ServiceArgs {
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    device: DeviceArgs,
    /// Must equal the referee's seed for in-process equivalence.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "127.0.0.1:7301")]
    listen: String,
}

pub fn state_service(ctx: &Ctx, a: ServiceArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let n = require(a.n, cfg.n, "n")?;
    check_n(n)?;
    check_simulation_cap(n)?;
    let seed = pick(a.seed, cfg.seed, 0);
    let device = device_spec(a.device, cfg).build(n)?;
    let sampler = JointSampler::new(device)?;
    let listener = bind(&a.listen)?;
    let (e1, e2) = accept_two(&listener)?;
    let stats = wire::state_service(&sampler, seed, e1, e2)?;
    say!("state service: {} rounds, {} invalid, {} stale", stats.rounds, stats.invalid, stats.stale);
    Ok(())
}
