//! Command-line front end. [`run`] takes the full argument vector and returns
//! the process exit code; every output is deterministic.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::certify::{
    dense_combination_certify, freeness_check, isometry_check, lp_report, not_lq_report, nowhere_report, sp_report,
    Report, Target,
};
use crate::constructions::{
    algebra_generator_eval, build_basic_family, build_dense_generators, build_gb, build_simple, DensePair, FamilyMode,
    Freeness, PolynomialExpr,
};
use crate::error::{Error, Result};
use crate::exactnum::rational::{self, Rational};
use crate::exactnum::{parse_goal, PRECISION_ENV};
use crate::export::{export_rows, write_csv};
use crate::io::{load_witness_file, read_json, sha256_hex, to_canonical_string, witness_file, SCHEMA_VERSION};
use crate::series::{RSequence, Witness};
use crate::spaces::{SetExpr, SpaceModel};
use crate::transport::{apply_map, tensor_embed, MapTag};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DENIED: i32 = 2;
pub const EXIT_UNCLASSIFIABLE: i32 = 3;
pub const EXIT_SCHEMA: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "pathology-forge", version, about = "Build and certify p-integrable, nowhere q-integrable functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    /// Norm-one basic family in S_p (count members)
    SpBasic,
    /// Members in S'_p on the half line (count members)
    SpPrime,
    /// A single h_A-type witness
    Ha,
    /// g_B: in L^p, in no L^q for q < p
    Gb,
    /// Dense-lineability generators (needs --pairs)
    Dense,
    /// Algebra element P(g_θ1, ..) (needs --gens and --poly)
    Algebra,
    /// Simple function (needs --terms)
    Simple,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Claim {
    NowhereLq,
    NowhereLinf,
    InLp,
    NotLq,
    InSp,
    Isometry,
    Freeness,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build witnesses and write their seeds
    Build {
        /// unit-interval, half-line, cantor, counting or product(<left>,<right>)
        #[arg(long)]
        space: String,
        /// Integrability exponent, a positive rational such as 1 or 3/2
        #[arg(long)]
        p: String,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 1)]
        count: u64,
        /// Number of explicitly built base elements
        #[arg(long, default_value_t = 30)]
        horizon: u64,
        /// Comma-separated prefix of the exponent sequence
        #[arg(long)]
        rseq_prefix: Option<String>,
        /// JSON array of {"set": .., "n": .., "seed": ".."} (inline or a file path)
        #[arg(long)]
        pairs: Option<String>,
        /// Comma-separated prime generators
        #[arg(long)]
        gens: Option<String>,
        /// Polynomial in x0, x1, .. without constant term, e.g. "2*x0^2*x1 - x2"
        #[arg(long)]
        poly: Option<String>,
        /// JSON array of {"c": "..", "set": ..} (inline or a file path)
        #[arg(long)]
        terms: Option<String>,
        /// Output file (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify a claim about the witnesses of a file
    Certify {
        /// Witness file (not needed for freeness)
        file: Option<PathBuf>,
        #[arg(long, value_enum)]
        claim: Claim,
        /// Exponent(s), comma-separated
        #[arg(long)]
        q: Option<String>,
        /// Base elements U_0..U_depth get explicit verdicts
        #[arg(long, default_value_t = 12)]
        depth: u64,
        /// Only this member of the file
        #[arg(long)]
        member: Option<usize>,
        /// Comma-separated coefficients (isometry, dense combinations)
        #[arg(long)]
        coeffs: Option<String>,
        /// Relative isometry tolerance
        #[arg(long, default_value = "2^-16")]
        tol: String,
        /// Comma-separated prime generators (freeness)
        #[arg(long)]
        gens: Option<String>,
        /// Polynomial (freeness)
        #[arg(long)]
        poly: Option<String>,
        /// Output file (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a truncation as piecewise-constant rows
    Export {
        /// Witness file
        file: PathBuf,
        /// Groups, strands and pieces up to this index
        #[arg(long)]
        depth: u64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Member of the file to export
        #[arg(long, default_value_t = 0)]
        member: usize,
        /// Output file (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rewrite witnesses along a measure-preserving map, or tensor with a Rademacher sum (phi)
    Transport {
        /// Witness file
        file: PathBuf,
        /// F, L, G, Ginv, T, Tinv or phi
        #[arg(long)]
        map: String,
        /// Rademacher coefficients for phi
        #[arg(long)]
        coeffs: Option<String>,
        /// Output file (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every acceptance criterion and print a pass/fail table
    Suite {
        /// Run only this criterion (1–8); criterion 8 replays what the others collected
        #[arg(long)]
        only: Option<u32>,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnclassifiableFamily(_) => EXIT_UNCLASSIFIABLE,
        Error::Schema(_) | Error::Json(_) => EXIT_SCHEMA,
        Error::MissingResident(_) => EXIT_DENIED,
        _ => EXIT_USAGE,
    }
}

/// Runs one command; `argv[0]` is the program name.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Ok(s) = std::env::var(PRECISION_ENV) {
        if let Err(e) = parse_goal(&s) {
            let _ = writeln!(stderr, "{PRECISION_ENV}: {e}");
            return EXIT_USAGE;
        }
    }
    match dispatch(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn list(s: &str) -> Result<Vec<Rational>> {
    s.split(',').map(|x| rational::parse(x.trim())).collect()
}

fn inline_or_file(s: &str) -> Result<Value> {
    let t = s.trim_start();
    if t.starts_with('[') || t.starts_with('{') {
        Ok(serde_json::from_str(t)?)
    } else {
        read_json(Path::new(s))
    }
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn need<'a>(v: &'a Option<String>, flag: &str) -> Result<&'a str> {
    v.as_deref().ok_or_else(|| Error::Parse(format!("--{flag} is required here")))
}

fn gens_of(s: &str) -> Result<Vec<u64>> {
    s.split(',').map(|g| g.trim().parse::<u64>().map_err(|e| Error::Parse(format!("generator {g:?}: {e}")))).collect()
}

fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Build { space, p, kind, count, horizon, rseq_prefix, pairs, gens, poly, terms, out } => {
            let space: SpaceModel = space.parse()?;
            let p = rational::parse(&p)?;
            let rseq = |up: bool| -> Result<Option<RSequence>> {
                rseq_prefix.as_deref().map(|s| RSequence::with_prefix(p.clone(), up, list(s)?)).transpose()
            };
            let ws: Vec<Witness> = match kind {
                Kind::SpBasic => build_basic_family(space, p.clone(), count, FamilyMode::Sp, rseq(true)?, horizon)?,
                Kind::SpPrime => build_basic_family(space, p.clone(), count, FamilyMode::SpPrime, rseq(true)?, horizon)?,
                Kind::Ha => build_basic_family(space, p.clone(), 1, FamilyMode::Sp, rseq(true)?, horizon)?,
                Kind::Gb => vec![build_gb(space, p.clone(), rseq(false)?)?],
                Kind::Dense => {
                    let v = inline_or_file(need(&pairs, "pairs")?)?;
                    let pairs = v
                        .as_array()
                        .ok_or_else(|| Error::Parse("--pairs must be a JSON array".into()))?
                        .iter()
                        .map(|e| {
                            Ok(DensePair {
                                set: SetExpr::from_json(&e["set"])?,
                                n: e["n"].as_u64().ok_or_else(|| Error::Parse("pair n must be a positive integer".into()))?,
                                seed: e["seed"].as_str().ok_or_else(|| Error::Parse("pair seed must be a bit string".into()))?.parse()?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    build_dense_generators(space, p.clone(), &pairs, horizon)?
                }
                Kind::Algebra => {
                    let poly: PolynomialExpr = need(&poly, "poly")?.parse()?;
                    vec![algebra_generator_eval(space, p.clone(), &gens_of(need(&gens, "gens")?)?, &poly, horizon)?]
                }
                Kind::Simple => {
                    let v = inline_or_file(need(&terms, "terms")?)?;
                    let terms = v
                        .as_array()
                        .ok_or_else(|| Error::Parse("--terms must be a JSON array".into()))?
                        .iter()
                        .map(|t| {
                            let c = t["c"].as_str().ok_or_else(|| Error::Parse("term c must be a string".into()))?;
                            Ok((rational::parse(c)?, SetExpr::from_json(&t["set"])?))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    vec![build_simple(space, p.clone(), terms)?]
                }
            };
            let mut extra = json!({});
            if ws.len() > 1 {
                let disjoint = ws.iter().enumerate().all(|(i, a)| {
                    ws[..i].iter().all(|b| a.groups.iter().all(|x| b.groups.iter().all(|y| x.disjoint(y) == Some(true))))
                });
                extra = json!({ "disjoint": disjoint });
            }
            emit(&out, &to_canonical_string(&witness_file(&ws, extra)), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Certify { file, claim, q, depth, member, coeffs, tol, gens, poly, out } => {
            if let Claim::Freeness = claim {
                let poly: PolynomialExpr = need(&poly, "poly")?.parse()?;
                let gens = gens_of(need(&gens, "gens")?)?;
                let result = match freeness_check(&gens, &poly)? {
                    Freeness::ZeroPolynomial => json!({"result": "zero-polynomial"}),
                    Freeness::NonzeroWitness { values, j0 } => json!({
                        "result": "nonzero-witness",
                        "j0": j0,
                        "beta1": rational::render(&values.terms[0].0),
                        "theta1": rational::render(&values.terms[0].1),
                    }),
                };
                let body = json!({"version": SCHEMA_VERSION, "claim": "Freeness", "gens": gens, "poly": poly.to_string(), "freeness": result});
                emit(&out, &to_canonical_string(&with_hash(body)), stdout)?;
                return Ok(EXIT_OK);
            }
            let file = file.ok_or_else(|| Error::Parse("a witness file is required".into()))?;
            let mut ws = load_witness_file(&read_json(&file)?)?;
            if let Some(i) = member {
                if i >= ws.len() {
                    return Err(Error::Parse(format!("member {i} out of range ({} witnesses)", ws.len())));
                }
                ws = vec![ws.swap_remove(i)];
            }
            let qs = q.as_deref().map(list).transpose()?;
            if let Claim::Isometry = claim {
                let c = list(need(&coeffs, "coeffs")?)?;
                let p = ws.first().ok_or_else(|| Error::Parse("empty witness file".into()))?.p.clone();
                let r = isometry_check(&ws, &c, &p, &parse_goal(&tol)?)?;
                let body = json!({"version": SCHEMA_VERSION, "claim": "Isometry", "coeffs": c.iter().map(rational::render).collect::<Vec<_>>(), "check": r});
                emit(&out, &to_canonical_string(&with_hash(body)), stdout)?;
                return Ok(if r.ok { EXIT_OK } else { EXIT_DENIED });
            }
            let first_q = || -> Result<Rational> {
                match qs.as_deref() {
                    Some([q]) => Ok(q.clone()),
                    _ => Err(Error::Parse("give exactly one --q for this claim".into())),
                }
            };
            let reports: Vec<Report> = match (claim, &coeffs) {
                (Claim::InSp, Some(c)) => {
                    let c = list(c)?;
                    if c.len() != ws.len() {
                        return Err(Error::Parse(format!("{} coefficients for {} generators", c.len(), ws.len())));
                    }
                    let combo: Vec<(Rational, Witness)> = c.into_iter().zip(ws).collect();
                    let qs = qs.ok_or_else(|| Error::Parse("--q is required for in-sp".into()))?;
                    vec![dense_combination_certify(&combo, depth, &qs)?]
                }
                _ => {
                    let mut out = vec![];
                    for w in &ws {
                        out.push(match claim {
                            Claim::NowhereLq => nowhere_report(w, &Target::Lq(first_q()?), depth)?,
                            Claim::NowhereLinf => nowhere_report(w, &Target::Linf, depth)?,
                            Claim::InLp => lp_report(w)?,
                            Claim::NotLq => not_lq_report(w, &first_q()?)?,
                            Claim::InSp => {
                                let qs = qs.as_ref().ok_or_else(|| Error::Parse("--q is required for in-sp".into()))?;
                                sp_report(w, qs, depth)?
                            }
                            Claim::Isometry | Claim::Freeness => unreachable!("handled above"),
                        });
                    }
                    out
                }
            };
            for r in &reports {
                let _ = writeln!(stderr, "{} {}: {} in {:.3}s", r.claim, &r.witness_hash[..12], if r.granted { "granted" } else { "denied" }, r.elapsed.as_secs_f64());
            }
            let granted = !reports.is_empty() && reports.iter().all(|r| r.granted);
            let body = json!({
                "version": SCHEMA_VERSION,
                "claim": reports.first().map(|r| r.claim.clone()),
                "depth": depth,
                "granted": granted,
                "reports": reports,
            });
            emit(&out, &to_canonical_string(&with_hash(body)), stdout)?;
            Ok(if granted { EXIT_OK } else { EXIT_DENIED })
        }
        Command::Export { file, depth, format: Format::Csv, member, out } => {
            let ws = load_witness_file(&read_json(&file)?)?;
            let w = ws.get(member).ok_or_else(|| Error::Parse(format!("member {member} out of range")))?;
            let e = export_rows(w, depth)?;
            if e.capped {
                let _ = writeln!(stderr, "note: nested hosts beyond the drawn stage; rows may overlap");
            }
            let mut buf = vec![];
            write_csv(&e.rows, &mut buf)?;
            emit(&out, &String::from_utf8(buf).expect("csv output is utf-8"), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Transport { file, map, coeffs, out } => {
            let ws = load_witness_file(&read_json(&file)?)?;
            let mapped = if map.eq_ignore_ascii_case("phi") {
                let a = list(need(&coeffs, "coeffs")?)?;
                ws.iter().map(|w| tensor_embed(w, &a)).collect::<Result<Vec<_>>>()?
            } else {
                let tag: MapTag = map.parse()?;
                ws.iter().map(|w| apply_map(tag, w)).collect::<Result<Vec<_>>>()?
            };
            emit(&out, &to_canonical_string(&witness_file(&mapped, json!({}))), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Suite { only } => {
            let results = match only {
                Some(id) => crate::suite::run_only(id)?,
                None => crate::suite::run_all(),
            };
            let _ = writeln!(stdout, "{}", crate::suite::table(&results));
            Ok(if results.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_DENIED })
        }
    }
}

/// Adds a `hash` over the canonical serialization of `body`.
fn with_hash(body: Value) -> Value {
    let body = crate::io::canonical(&body);
    let h = sha256_hex(body.to_string().as_bytes());
    let mut v = body;
    v["hash"] = json!(h);
    v
}

