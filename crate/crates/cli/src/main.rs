use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use ffsum_core::charsum::{
    bilinear_kloosterman, kloosterman_complete, kloosterman_incomplete, moebius_kloosterman, SumValue,
};
use ffsum_core::energy::{energy, inversion_distribution};
use ffsum_core::experiments::{
    ap_lambda_discrepancy, bilinear_average_scan, bilinear_ratio_scan, bombieri_vinogradov_sum,
    bv_ratio_scan, csv_string, jsonl_string, main_term_check, moebius_ratio_scan, with_workers, Claim,
    ModuliSpec,
};
use ffsum_core::poly::monic_deg_eq;
use ffsum_core::vaughan::{split_bound_report, vaughan_decompose};
use ffsum_core::{Error, Modulus, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

mod params;
mod selftest;

use params::Params;

#[derive(Parser)]
#[command(name = "ffsum", version, about = "Exact exponential sums over F_q[T]")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Describe a finite field context.
    FieldInfo(Params),
    /// Evaluate one character sum (--kind).
    Sum(Params),
    /// Inversion energy for --F, or for every monic F of degree --r.
    Energy(Params),
    /// Vaughan split of a Möbius–Kloosterman sum.
    Vaughan(Params),
    /// Ratio table for a bound (--theorem).
    RatioScan(Params),
    /// Λ in progressions mod --F.
    ApDist(Params),
    /// Σ over deg F < R of the worst progression discrepancy.
    Bv(Params),
    /// Partial sums of k·q^{-k}·Σ μ against −q^r/φ(F).
    MainTerm(Params),
    /// Run the exact-identity suite.
    Selftest(Params),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::FieldInfo(_) => "field-info",
            Command::Sum(_) => "sum",
            Command::Energy(_) => "energy",
            Command::Vaughan(_) => "vaughan",
            Command::RatioScan(_) => "ratio-scan",
            Command::ApDist(_) => "ap-dist",
            Command::Bv(_) => "bv",
            Command::MainTerm(_) => "main-term",
            Command::Selftest(_) => "selftest",
        }
    }

    fn params(&self) -> &Params {
        match self {
            Command::FieldInfo(p)
            | Command::Sum(p)
            | Command::Energy(p)
            | Command::Vaughan(p)
            | Command::RatioScan(p)
            | Command::ApDist(p)
            | Command::Bv(p)
            | Command::MainTerm(p)
            | Command::Selftest(p) => p,
        }
    }
}

/// A named result table in CSV and JSON-lines form.
struct Table {
    name: String,
    csv: Option<String>,
    jsonl: String,
}

impl Table {
    fn new<T: Serialize>(name: &str, rows: &[T]) -> Result<Table> {
        Ok(Table {
            name: name.into(),
            csv: Some(csv_string(rows)?),
            jsonl: jsonl_string(rows)?,
        })
    }

    fn json_only<T: Serialize>(name: &str, rows: &[T]) -> Result<Table> {
        Ok(Table {
            name: name.into(),
            csv: None,
            jsonl: jsonl_string(rows)?,
        })
    }
}

struct Outcome {
    tables: Vec<Table>,
    /// An exact invariant failed; reported after the tables are written.
    violation: Option<String>,
}

impl From<Vec<Table>> for Outcome {
    fn from(tables: Vec<Table>) -> Self {
        Outcome {
            tables,
            violation: None,
        }
    }
}

#[derive(Serialize)]
struct SumRecord {
    sum_kind: String,
    field: String,
    #[serde(rename = "F")]
    f: String,
    params: Value,
    histogram: Option<Vec<i64>>,
    re: f64,
    im: f64,
    abs: f64,
    abs_err: f64,
    trivial_bound: f64,
    ratio: f64,
}

fn sum(p: &Params) -> Result<Outcome> {
    let ctx = p.ctx()?;
    let budget = p.budget()?;
    let f = p.modulus(&ctx)?;
    let a = p.poly(&ctx, &p.a, "1")?;
    let b = p.poly(&ctx, &p.b, "1")?;
    let kind = p.kind.as_deref().unwrap_or("moebius-kloosterman");
    let coprime_count = |n: usize| -> Result<f64> { Ok(inversion_distribution(&f, n, &budget)?.mass() as f64) };
    let (value, trivial, params) = match kind {
        "moebius-kloosterman" => {
            let n = p.need_n()?;
            let h = moebius_kloosterman(&f, &a, n, &budget)?;
            let trivial = (ctx.q() as f64).powi(n as i32);
            (SumValue::Exact(h), trivial, json!({"a": a.to_string(), "n": n}))
        }
        "kloosterman" => {
            let h = kloosterman_complete(&f, &a, &b, &budget)?;
            (SumValue::Exact(h), f.phi() as f64, json!({"a": a.to_string(), "b": b.to_string()}))
        }
        "incomplete-kloosterman" => {
            let n = p.need_n()?;
            let h = kloosterman_incomplete(&f, &b, n, &budget)?;
            (SumValue::Exact(h), coprime_count(n)?, json!({"b": b.to_string(), "n": n}))
        }
        "bilinear" => {
            let (m, n) = (p.m.ok_or_else(|| Error::InvalidArgument("--m is required".into()))?, p.need_n()?);
            let source = p.weight_source(&ctx, m.max(n))?;
            let (alpha, beta) = source.pair(&ctx, m, n)?;
            let v = bilinear_kloosterman(&f, &a, m, n, &alpha, &beta, &budget)?;
            let trivial = alpha.max_abs() * beta.max_abs() * coprime_count(m)? * coprime_count(n)?;
            (v, trivial, json!({"a": a.to_string(), "m": m, "n": n, "weights": source.label()}))
        }
        other => return Err(Error::InvalidArgument(format!("unknown sum kind {other:?}"))),
    };
    let (abs, abs_err) = value.abs();
    let z = value.to_complex();
    let rec = SumRecord {
        sum_kind: kind.into(),
        field: ctx.spec_string(),
        f: f.to_string(),
        params,
        histogram: value.histogram().map(|h| h.counts().to_vec()),
        re: z.re,
        im: z.im,
        abs,
        abs_err,
        trivial_bound: trivial,
        ratio: if trivial > 0.0 { abs / trivial } else { 0.0 },
    };
    Ok(vec![Table::json_only("sum", &[rec])?].into())
}

#[derive(Serialize)]
struct EnergyRow {
    field: String,
    q: u32,
    r: usize,
    #[serde(rename = "F")]
    f: String,
    k: u32,
    n: usize,
    #[serde(rename = "E")]
    energy: String,
    method: String,
    seconds: f64,
}

fn energy_cmd(p: &Params) -> Result<Outcome> {
    let ctx = p.ctx()?;
    let budget = p.budget()?;
    let k = p.k.unwrap_or(2);
    let moduli = match p.moduli(&ctx)? {
        ModuliSpec::Explicit(v) => v,
        ModuliSpec::AllMonic(r) => monic_deg_eq(&ctx, r)?.map(|f| Modulus::new(&f)).collect::<Result<_>>()?,
    };
    let rows = moduli
        .par_iter()
        .map(|f| {
            let n = p.n.unwrap_or(f.degree());
            let start = Instant::now();
            let rec = energy(f, k, n, None, &budget)?;
            Ok(EnergyRow {
                field: rec.field,
                q: rec.q,
                r: rec.r,
                f: rec.f,
                k,
                n,
                energy: rec.energy.to_string(),
                method: rec.method.to_string(),
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![Table::new("energy", &rows)?].into())
}

#[derive(Serialize)]
struct VaughanRow {
    #[serde(rename = "F")]
    f: String,
    a: String,
    n: usize,
    #[serde(rename = "U")]
    cutoff: usize,
    direct_abs: f64,
    #[serde(rename = "S1_abs")]
    s1_abs: f64,
    #[serde(rename = "S2_abs")]
    s2_abs: f64,
    constant: f64,
    exact: bool,
}

fn vaughan_cmd(p: &Params) -> Result<Outcome> {
    let ctx = p.ctx()?;
    let budget = p.budget()?;
    let f = p.modulus(&ctx)?;
    let a = p.poly(&ctx, &p.a, "1")?;
    let n = p.need_n()?;
    let cutoffs: Vec<usize> = match p.cutoff {
        Some(u) => vec![u],
        None => (1..).take_while(|u| 2 * u < n).collect(),
    };
    let reports = cutoffs
        .iter()
        .map(|&u| split_bound_report(&vaughan_decompose(&f, &a, n, u, &budget)?, &f, &a, &budget))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<VaughanRow> = reports
        .iter()
        .map(|r| VaughanRow {
            f: r.f.clone(),
            a: r.a.clone(),
            n: r.n,
            cutoff: r.cutoff,
            direct_abs: r.direct_abs,
            s1_abs: r.s1_abs,
            s2_abs: r.s2_abs,
            constant: r.constant,
            exact: r.exact,
        })
        .collect();
    let violation = reports
        .iter()
        .find(|r| !r.exact)
        .map(|r| format!("recombination differs from the direct sum at U={}", r.cutoff));
    Ok(Outcome {
        tables: vec![Table {
            name: "vaughan".into(),
            csv: Some(csv_string(&rows)?),
            jsonl: jsonl_string(&reports)?,
        }],
        violation,
    })
}

fn claim_of(id: &str) -> Result<Claim> {
    match id.trim() {
        "2.1" => Ok(Claim::Bilinear),
        "2.2" => Ok(Claim::MoebiusLong),
        "2.3" => Ok(Claim::MoebiusUniform),
        "2.4" => Ok(Claim::MoebiusAverage),
        "2.6" => Ok(Claim::BombieriVinogradov),
        other => Err(Error::InvalidArgument(format!(
            "unknown --theorem {other:?}; expected 2.1, 2.2, 2.3, 2.4 or 2.6"
        ))),
    }
}

fn ratio_scan(p: &Params) -> Result<Outcome> {
    let ctx = p.ctx()?;
    let budget = p.budget()?;
    let claim = claim_of(p.theorem.as_deref().ok_or_else(|| Error::InvalidArgument("--theorem is required".into()))?)?;
    let ns = p.n_values()?;
    let rows = match claim {
        Claim::Bilinear => {
            let ms = match p.m_values() {
                Ok(ms) => ms,
                Err(_) => ns.clone(),
            };
            let ranges: Vec<(usize, usize)> = ms.iter().flat_map(|&m| ns.iter().map(move |&n| (m, n))).collect();
            let bound = ranges.iter().map(|&(m, n)| m.max(n)).max().unwrap_or(0);
            let weights = p.weight_source(&ctx, bound)?;
            let spec = p.moduli(&ctx)?;
            let mut rows = bilinear_ratio_scan(&spec.moduli(&ctx)?, &ranges, &p.a_policy(&ctx)?, &weights, &budget)?;
            if let ModuliSpec::AllMonic(r) = spec {
                rows.extend(bilinear_average_scan(&ctx, r, &ranges, &weights, &budget)?);
            }
            rows
        }
        Claim::MoebiusLong | Claim::MoebiusUniform => {
            moebius_ratio_scan(claim, &ctx, &p.moduli(&ctx)?, &ns, &p.a_policy(&ctx)?, &budget)?
        }
        Claim::MoebiusAverage => moebius_ratio_scan(
            claim,
            &ctx,
            &ModuliSpec::AllMonic(p.need_r()?),
            &ns,
            &ffsum_core::experiments::APolicy::WorstOverAll,
            &budget,
        )?,
        _ => {
            let big_r = p.big_r.or(p.r).ok_or_else(|| Error::InvalidArgument("--R is required".into()))?;
            bv_ratio_scan(&ctx, big_r, &ns, &budget)?
        }
    };
    let violation = rows
        .iter()
        .find(|r| r.chain_holds == Some(false))
        .map(|r| format!("energy inequality fails for F={} m={:?} n={}", r.f, r.m, r.n));
    Ok(Outcome {
        tables: vec![Table::new("ratio", &rows)?],
        violation,
    })
}

fn ap_dist(p: &Params) -> Result<Outcome> {
    let ctx = p.ctx()?;
    let budget = p.budget()?;
    let f = p.modulus(&ctx)?;
    let mut rows = Vec::new();
    for n in p.n_values()? {
        rows.extend(ap_lambda_discrepancy(&f, n, &budget)?);
    }
    Ok(vec![Table::new("ap", &rows)?].into())
}

fn bv(p: &Params) -> Result<Outcome> {
    let ctx = p.ctx()?;
    let budget = p.budget()?;
    let big_r = p.big_r.ok_or_else(|| Error::InvalidArgument("--R is required".into()))?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for n in p.n_values()? {
        let rep = bombieri_vinogradov_sum(&ctx, big_r, n, &budget)?;
        rows.extend(rep.rows.iter().cloned());
        summary.push(rep);
    }
    Ok(vec![Table::new("bv", &rows)?, Table::new("bv_summary", &summary)?].into())
}

fn main_term(p: &Params) -> Result<Outcome> {
    let ctx = p.ctx()?;
    let budget = p.budget()?;
    let f = p.modulus(&ctx)?;
    let d = p.d.ok_or_else(|| Error::InvalidArgument("--d is required".into()))?;
    let rep = main_term_check(&f, d, &budget)?;
    let violation = rep
        .rows
        .iter()
        .find(|r| !r.bounded)
        .map(|r| format!("error exceeds the tail bound at d={}", r.d));
    Ok(Outcome {
        tables: vec![Table::new("main_term", &rep.rows)?],
        violation,
    })
}

fn field_info(p: &Params) -> Result<Outcome> {
    let ctx = p.ctx()?;
    let info = json!({
        "field": ctx.spec_string(),
        "p": ctx.p(),
        "ell": ctx.ell(),
        "q": ctx.q(),
        "defining_poly": ctx.defining_poly(),
    });
    Ok(vec![Table::json_only("field", &[info])?].into())
}

fn dispatch(cmd: &Command, p: &Params) -> Result<Outcome> {
    match cmd {
        Command::FieldInfo(_) => field_info(p),
        Command::Sum(_) => sum(p),
        Command::Energy(_) => energy_cmd(p),
        Command::Vaughan(_) => vaughan_cmd(p),
        Command::RatioScan(_) => ratio_scan(p),
        Command::ApDist(_) => ap_dist(p),
        Command::Bv(_) => bv(p),
        Command::MainTerm(_) => main_term(p),
        Command::Selftest(_) => {
            let ok = selftest::run(&p.budget()?);
            Ok(Outcome {
                tables: Vec::new(),
                violation: (!ok).then(|| "selftest failed".into()),
            })
        }
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool_version: &'static str,
    field: Option<String>,
    command: &'a str,
    config: &'a Params,
    seed: Option<u64>,
    wall_time_seconds: f64,
    workers: usize,
    outputs: Vec<PathBuf>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(cmd: &Command, p: &Params, outcome: &Outcome, seconds: f64) -> Result<()> {
    let Some(dir) = &p.out else {
        for t in &outcome.tables {
            match &t.csv {
                Some(csv) => print!("{csv}"),
                None => print!("{}", t.jsonl),
            }
        }
        return Ok(());
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut outputs = Vec::new();
    for t in &outcome.tables {
        if let Some(csv) = &t.csv {
            let path = dir.join(format!("{}.csv", t.name));
            write(&path, csv)?;
            outputs.push(path);
        }
        let path = dir.join(format!("{}.jsonl", t.name));
        write(&path, &t.jsonl)?;
        outputs.push(path);
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        field: p.ctx().ok().map(|c| c.spec_string()),
        command: cmd.name(),
        config: p,
        seed: p.seed,
        wall_time_seconds: seconds,
        workers: p.workers(),
        outputs,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    write(&dir.join("manifest.json"), &text)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ResourceLimit(_) => 3,
        Error::InvariantViolation(_) => 4,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn run(cmd: &Command) -> Result<()> {
    let p = cmd.params().clone().resolve()?;
    let start = Instant::now();
    let outcome = with_workers(p.workers(), || dispatch(cmd, &p))??;
    emit(cmd, &p, &outcome, start.elapsed().as_secs_f64())?;
    match outcome.violation {
        Some(v) => Err(Error::InvariantViolation(v)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ffsum {}: {e}", cli.command.name());
            ExitCode::from(exit_code(&e))
        }
    }
}
