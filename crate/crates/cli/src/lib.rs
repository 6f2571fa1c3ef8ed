//! Command-line front end: argument parsing, file formats and the fixture
//! runner. [`run`] executes one parsed invocation and reports the exit code.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use convexjet::bodies::{interpolate_body, BodyOptions, NormalData};
use convexjet::c1::{default_box, default_eps, extend_c1, C1Options};
use convexjet::c1omega::{extend_c1omega, OmegaOptions};
use convexjet::conditions::{
    best_eta, check_c, check_cw1_default, check_cw1omega, holder_seminorm, m_star,
};
use convexjet::envelope::conv_envelope_grid;
use convexjet::field::ExtensionField;
use convexjet::grid::{GridSpec, ScalarGrid};
use convexjet::jet::Jet1;
use convexjet::minimal::{build_m, factorize};
use convexjet::modulus::{Modulus, ModulusSpec};
use convexjet::whitney::{decompose, ClosedSetApprox, DEFAULT_MAX_GENERATION};
use convexjet::{Error, Result, SCHEMA_VERSION};

mod fixtures;

/// Smallest resolution accepted per axis.
pub const MIN_RES: usize = 9;

#[derive(Debug, Parser)]
#[command(
    name = "convexjet",
    version,
    about = "Convex C^1 and C^{1,omega} extension of 1-jets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Class {
    C1,
    C1omega,
    C11,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the extension conditions on a jet.
    Check,
    /// Build the max-of-tangent-planes extension and its factorization.
    Minimal,
    /// Whitney cubes of a box minus a closed set given as JSON (`--input`).
    Whitney,
    /// Build a convex extension of a jet on a grid.
    Extend,
    /// Convex envelope of a CSV grid (`--input`).
    Envelope,
    /// Convex body through a point cloud with normals (`--input`).
    Body,
    /// Run the bundled examples and write a summary table.
    Fixtures,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Jet JSON: {"dim","points","values","grads"}.
    #[arg(long, global = true)]
    pub jet: Option<PathBuf>,
    /// Input file of the whitney, envelope and body subcommands.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Modulus: a JSON path, `linear`, or `holder:ALPHA`.
    #[arg(long, global = true, default_value = "linear")]
    pub omega: String,
    #[arg(long, global = true, default_value_t = 0.5)]
    pub eta: f64,
    #[arg(long, global = true, value_enum, default_value = "c1")]
    pub class: Class,
    /// Box as `LO:HI` (all axes) or `LO0,LO1,..:HI0,HI1,..`.
    #[arg(long = "box", global = true)]
    pub bbox: Option<String>,
    /// Nodes per axis, one value or a comma list.
    #[arg(long, global = true)]
    pub res: Option<String>,
    /// Smoothing parameter of the C^1 construction.
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs, prints errors to stderr and
/// returns the exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Caps the global pool at `CONVEXJET_THREADS` when set.
pub fn configure_threads() {
    if let Some(n) = std::env::var("CONVEXJET_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let c = &cli.common;
    fs::create_dir_all(&c.out)?;
    match cli.command {
        Command::Check => cmd_check(c),
        Command::Minimal => cmd_minimal(c),
        Command::Whitney => cmd_whitney(c),
        Command::Extend => cmd_extend(c),
        Command::Envelope => cmd_envelope(c),
        Command::Body => cmd_body(c),
        Command::Fixtures => fixtures::run(c),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path)
        .map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(f))
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::invalid(format!("missing --{flag}")))
}

pub fn load_jet(path: &Path) -> Result<Jet1<f64>> {
    let jet: Jet1<f64> = read_json(path)?;
    let issues = jet.validate();
    if !issues.is_empty() {
        return Err(Error::invalid(issues.join("; ")));
    }
    Ok(jet)
}

pub fn parse_omega(spec: &str) -> Result<Modulus<f64>> {
    if let Some(m) = Modulus::parse_short(spec) {
        return m;
    }
    let ms: ModulusSpec = read_json(Path::new(spec))?;
    Modulus::try_from(ms)
}

fn parse_list(s: &str, dim: usize, what: &str) -> Result<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> =
        s.split(',').map(|v| v.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|e| Error::invalid(format!("bad {what} {s:?}: {e}")))?;
    match vals.len() {
        1 => Ok(vec![vals[0]; dim]),
        n if n == dim => Ok(vals),
        n => Err(Error::invalid(format!(
            "{what} has {n} entries for dimension {dim}"
        ))),
    }
}

pub fn parse_box(s: &str, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| Error::invalid(format!("box {s:?} must read LO:HI")))?;
    Ok((parse_list(lo, dim, "box")?, parse_list(hi, dim, "box")?))
}

pub fn parse_res(s: Option<&str>, dim: usize, default: usize) -> Result<Vec<usize>> {
    let res: Vec<usize> = match s {
        None => vec![default; dim],
        Some(s) => parse_list(s, dim, "resolution")?
            .into_iter()
            .map(|v| {
                if v.fract() == 0.0 && v >= 0.0 {
                    Ok(v as usize)
                } else {
                    Err(Error::invalid(format!(
                        "resolution {v} is not a whole number"
                    )))
                }
            })
            .collect::<Result<_>>()?,
    };
    if let Some(r) = res.iter().find(|&&r| r < MIN_RES) {
        return Err(Error::invalid(format!(
            "resolution {r} below the minimum {MIN_RES}"
        )));
    }
    Ok(res)
}

fn grid_for(
    c: &Common,
    dim: usize,
    fallback: (Vec<f64>, Vec<f64>),
    default_res: usize,
) -> Result<GridSpec<f64>> {
    let (lo, hi) = match &c.bbox {
        Some(b) => parse_box(b, dim)?,
        None => fallback,
    };
    GridSpec::new(lo, hi, parse_res(c.res.as_deref(), dim, default_res)?)
}

fn jet_grid(c: &Common, jet: &Jet1<f64>) -> Result<GridSpec<f64>> {
    let eps = c.eps.unwrap_or_else(|| default_eps(jet));
    let spec = grid_for(c, jet.dim, default_box(jet, eps), 41)?;
    let tol = 1e-12 * (1.0 + spec.max_step());
    if jet.points.iter().any(|p| !spec.contains(p, tol)) {
        return Err(Error::invalid("grid box must contain every carrier point"));
    }
    Ok(spec)
}

fn effective_omega(c: &Common) -> Result<Modulus<f64>> {
    match c.class {
        Class::C11 => Ok(Modulus::linear()),
        _ => parse_omega(&c.omega),
    }
}

/// Prints the refusal and returns exit code 3.
fn refuse(
    report: &impl Serialize,
    condition: &str,
    pair: Option<(usize, usize)>,
    margin: f64,
) -> i32 {
    let err = Error::ConditionFailed {
        condition: condition.to_string(),
        worst_pair: pair,
        margin,
    };
    eprintln!("refused: {err}");
    println!(
        "{}",
        serde_json::to_string_pretty(report).unwrap_or_default()
    );
    3
}

fn cmd_check(c: &Common) -> Result<i32> {
    let jet = load_jet(require(&c.jet, "jet")?)?;
    let rc = check_c(&jet);
    let mut failing = (!rc.holds).then(|| (rc.condition.clone(), rc.worst_pair, rc.margin));
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "class": format!("{:?}", c.class).to_lowercase(),
        "points": jet.len(),
        "c": rc,
    });
    match c.class {
        Class::C1 => {
            let r = check_cw1_default(&jet);
            if failing.is_none() && !r.holds {
                failing = Some((r.condition.clone(), r.worst_pair, r.margin));
            }
            report["cw1"] = serde_json::to_value(&r)?;
        }
        Class::C1omega | Class::C11 => {
            let omega = effective_omega(c)?;
            let r = check_cw1omega(&jet, &omega, c.eta)?;
            if failing.is_none() && !r.holds {
                failing = Some((r.condition.clone(), r.worst_pair, r.margin));
            }
            report["omega"] = serde_json::to_value(ModulusSpec::from(&omega))?;
            report["eta"] = json!(c.eta);
            report["quantitative"] = serde_json::to_value(&r)?;
            report["seminorm"] = serde_json::to_value(holder_seminorm(&jet, &omega))?;
            report["best_eta"] = serde_json::to_value(best_eta(&jet, &omega))?;
            report["m_star"] = serde_json::to_value(m_star(&jet, &omega))?;
        }
    }
    report["holds"] = json!(failing.is_none());
    write_json(&c.out.join("check.json"), &report)?;
    match failing {
        Some((name, pair, margin)) => Ok(refuse(&report, &name, pair, margin)),
        None => {
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(0)
        }
    }
}

fn cmd_minimal(c: &Common) -> Result<i32> {
    let jet = load_jet(require(&c.jet, "jet")?)?;
    let m = build_m(&jet);
    let fac = factorize(&m);
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "pieces": m,
        "rank": fac.k,
        "linear_part": fac.linear,
        "basis": fac.basis,
        "coercive": fac.is_coercive(256, c.seed),
    });
    write_json(&c.out.join("minimal.json"), &report)?;
    if c.res.is_some() || c.bbox.is_some() {
        let spec = jet_grid(c, &jet)?;
        let nodes = spec.nodes();
        let grid = ScalarGrid::new(spec, nodes.iter().map(|x| m.value(x)).collect())?
            .with_grads(nodes.iter().map(|x| m.eval(x).subgradient).collect());
        grid.write_csv(BufWriter::new(File::create(c.out.join("minimal.csv"))?))?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}

fn cmd_whitney(c: &Common) -> Result<i32> {
    let set: ClosedSetApprox<f64> = read_json(require(&c.input, "input")?)?;
    let set = match set {
        ClosedSetApprox::Points { points, .. } => ClosedSetApprox::points(points)?,
        ClosedSetApprox::Boxes { boxes, .. } => ClosedSetApprox::boxes(boxes)?,
    };
    let dim = set.dim();
    let (lo, hi) = match &c.bbox {
        Some(b) => parse_box(b, dim)?,
        None => {
            let pts: Vec<Vec<f64>> = match &set {
                ClosedSetApprox::Points { points, .. } => points.clone(),
                ClosedSetApprox::Boxes { boxes, .. } => boxes
                    .iter()
                    .flat_map(|(a, b)| [a.clone(), b.clone()])
                    .collect(),
            };
            let lo: Vec<f64> = (0..dim)
                .map(|k| pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min) - 1.0)
                .collect();
            let hi: Vec<f64> = (0..dim)
                .map(|k| pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max) + 1.0)
                .collect();
            (lo, hi)
        }
    };
    let max_generation = match &c.res {
        Some(r) => r
            .trim()
            .parse::<u32>()
            .map_err(|e| Error::invalid(format!("bad generation cap {r:?}: {e}")))?,
        None => DEFAULT_MAX_GENERATION.min(10),
    };
    let d = decompose(&set, &lo, &hi, max_generation)?;
    let inv = d.check_invariants();
    let mut w = BufWriter::new(File::create(c.out.join("cubes.csv"))?);
    let mut header: Vec<String> = (0..dim).map(|k| format!("c{k}")).collect();
    header.extend(["side".into(), "generation".into()]);
    writeln!(w, "{}", header.join(","))?;
    for q in &d.cubes {
        let mut row: Vec<String> = q.center.iter().map(|v| format!("{v}")).collect();
        row.push(format!("{}", q.side));
        row.push(q.generation.to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "cubes": d.cubes.len(),
        "truncated": d.truncated.len(),
        "max_generation": max_generation,
        "overlap_n": d.overlap_n,
        "a1": d.a1,
        "a2": d.a2,
        "a": d.a_const,
        "invariants": inv,
        "invariants_hold": inv.all_hold(),
        "warnings": d.warnings,
    });
    write_json(&c.out.join("whitney.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if inv.all_hold() { 0 } else { 5 })
}

fn write_field(path: &Path, field: &ExtensionField<f64>, spec: &GridSpec<f64>) -> Result<()> {
    let nodes = spec.nodes();
    let grid = ScalarGrid::new(spec.clone(), nodes.iter().map(|x| field.value(x)).collect())?
        .with_grads(nodes.iter().map(|x| field.gradient(x)).collect());
    grid.write_csv(BufWriter::new(File::create(path)?))
}

fn cmd_extend(c: &Common) -> Result<i32> {
    let jet = load_jet(require(&c.jet, "jet")?)?;
    let spec = jet_grid(c, &jet)?;
    let (field, report): (ExtensionField<f64>, Value) = match c.class {
        Class::C1 => {
            let opts = C1Options {
                eps: c.eps,
                seed: c.seed,
                ..C1Options::default()
            };
            let ext = extend_c1(&jet, &spec, &opts)?;
            (ext.field, serde_json::to_value(&ext.report)?)
        }
        Class::C1omega | Class::C11 => {
            let omega = effective_omega(c)?;
            let opts = OmegaOptions {
                seed: c.seed,
                ..OmegaOptions::default()
            };
            let ext = extend_c1omega(&jet, &omega, c.eta, &spec, &opts)?;
            (ext.field, serde_json::to_value(&ext.report)?)
        }
    };
    write_field(&c.out.join("extension.csv"), &field, &spec)?;
    write_json(&c.out.join("extension.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}

fn cmd_envelope(c: &Common) -> Result<i32> {
    let path = require(&c.input, "input")?;
    let f = File::open(path)
        .map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))?;
    let grid = ScalarGrid::<f64>::read_csv(BufReader::new(f))?;
    let env = conv_envelope_grid(&grid, &[])?;
    let spec = &env.grid.spec;
    let d = spec.dim();
    let grads = env.grid.fd_gradients();
    let mut w = BufWriter::new(File::create(c.out.join("envelope.csv"))?);
    let mut header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
    header.push("value".into());
    header.extend((0..d).map(|k| format!("g{k}")));
    header.push("contact".into());
    writeln!(w, "{}", header.join(","))?;
    for (i, grad) in grads.iter().enumerate() {
        let mut row: Vec<String> = spec.node(i).iter().map(|v| format!("{v}")).collect();
        row.push(format!("{}", env.grid.values[i]));
        row.extend(grad.iter().map(|v| format!("{v}")));
        row.push(u8::from(env.contact[i]).to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "nodes": spec.len(),
        "method": env.method,
        "contact_nodes": env.contact.iter().filter(|&&b| b).count(),
        "max_gap": env.max_gap,
    });
    write_json(&c.out.join("envelope.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}

fn cmd_body(c: &Common) -> Result<i32> {
    let data: NormalData<f64> = read_json(require(&c.input, "input")?)?;
    data.ensure_valid()?;
    let dim = data.dim();
    let reach = data
        .points
        .iter()
        .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let fallback = (vec![-2.0 * reach; dim], vec![2.0 * reach; dim]);
    let spec = grid_for(c, dim, fallback, if dim == 2 { 201 } else { 41 })?;
    let opts = BodyOptions {
        c1: C1Options {
            eps: c.eps,
            seed: c.seed,
            ..C1Options::default()
        },
        omega: OmegaOptions {
            seed: c.seed,
            ..OmegaOptions::default()
        },
        ..BodyOptions::default()
    };
    let body = interpolate_body(&data, &spec, &opts)?;
    body.contour
        .write_csv(BufWriter::new(File::create(c.out.join("contour.csv"))?))?;
    write_json(&c.out.join("body.json"), &body.diagnostics)?;
    println!("{}", serde_json::to_string_pretty(&body.diagnostics)?);
    Ok(0)
}
