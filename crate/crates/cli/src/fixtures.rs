//! Bundled example runs with their expected verdicts.

use std::fs::File;
use std::io::{BufWriter, Write};

use serde::Serialize;

use convexjet::bodies::{interpolate_body, BodyClass, BodyOptions, NormalData};
use convexjet::c1::{extend_c1, C1Options};
use convexjet::conditions::{check_c, check_cw1_default};
use convexjet::grid::GridSpec;
use convexjet::jet::Jet1;
use convexjet::minimal::build_m;
use convexjet::{Result, SCHEMA_VERSION};

use crate::{parse_res, write_json, Common};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Refuse,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Refuse => "refuse",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureRow {
    pub name: &'static str,
    pub expected: Verdict,
    pub observed: Verdict,
    pub exit_code: i32,
    pub matches: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    schema_version: u32,
    seed: u64,
    all_match: bool,
    fixtures: &'a [FixtureRow],
}

/// |x| on {-2,..,2} with slopes ±1 away from the kink and 0 at the kink.
pub fn five_point_abs() -> Jet1<f64> {
    let pts: Vec<Vec<f64>> = (-2..=2).map(|i| vec![f64::from(i)]).collect();
    let grads = vec![vec![-1.0], vec![-1.0], vec![0.0], vec![1.0], vec![1.0]];
    let values = pts.iter().map(|p| p[0].abs()).collect();
    Jet1::new(pts, values, grads).expect("valid fixture")
}

/// Samples of max{x+y-1, -x+y-1, y/3}, each point in the interior of one piece.
pub fn max_of_three() -> Jet1<f64> {
    let pts = vec![
        vec![1.5, -0.5],
        vec![1.9, -1.0],
        vec![-1.5, -0.5],
        vec![-1.9, -1.0],
        vec![0.0, -0.5],
        vec![0.3, -1.0],
        vec![-0.3, -1.0],
        vec![0.0, 0.0],
    ];
    Jet1::sample(pts, |p: &[f64]| {
        let pieces = [
            (p[0] + p[1] - 1.0, [1.0, 1.0]),
            (-p[0] + p[1] - 1.0, [-1.0, 1.0]),
            (p[1] / 3.0, [0.0, 1.0 / 3.0]),
        ];
        let (v, g) = pieces
            .iter()
            .copied()
            .fold(
                (f64::NEG_INFINITY, [0.0; 2]),
                |a, b| if b.0 > a.0 { b } else { a },
            );
        (v, g.to_vec())
    })
    .expect("valid fixture")
}

/// Zero values on a vertical segment with horizontal gradients growing along it.
pub fn tilted_segment() -> Jet1<f64> {
    let pts: Vec<Vec<f64>> = (0..=4).map(|k| vec![0.0, f64::from(k) / 4.0]).collect();
    Jet1::sample(pts, |p: &[f64]| (0.0, vec![p[1], 0.0])).expect("valid fixture")
}

fn jet_fixture(
    name: &'static str,
    jet: &Jet1<f64>,
    spec: &GridSpec<f64>,
    seed: u64,
    expected: Verdict,
) -> FixtureRow {
    let c = check_c(jet);
    let cw1 = check_cw1_default(jet);
    let opts = C1Options {
        seed,
        ..C1Options::default()
    };
    let (observed, exit_code, mut detail) = match extend_c1(jet, spec, &opts) {
        Ok(_) => (Verdict::Pass, 0, String::from("extension built")),
        Err(e) => (Verdict::Refuse, e.exit_code(), e.to_string()),
    };
    detail = format!(
        "C margin {:e} pair {:?}; CW1 holds {} pair {:?}; {detail}",
        c.margin, c.worst_pair, cw1.holds, cw1.worst_pair
    );
    FixtureRow {
        name,
        expected,
        observed,
        exit_code,
        matches: observed == expected && (exit_code == 0 || exit_code == 3),
        detail,
    }
}

fn max_of_three_row(spec: &GridSpec<f64>, seed: u64) -> FixtureRow {
    let jet = max_of_three();
    let mut row = jet_fixture("max_of_three", &jet, spec, seed, Verdict::Pass);
    // The tangent-plane maximum keeps the kink of the sampled function above the data.
    let m = build_m(&jet);
    let probe = m.eval(&[0.0, 3.0]);
    let mut slopes: Vec<&Vec<f64>> = probe.active.iter().map(|&j| &m.slopes[j]).collect();
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    slopes.dedup();
    let kink = slopes.len() == 2 && (probe.value - 2.0).abs() <= 1e-12;
    row.detail = format!(
        "{}; minimal value at (0,3) {} with {} distinct active slopes",
        row.detail,
        probe.value,
        slopes.len()
    );
    row.matches &= kink;
    row
}

fn circle_row(res: usize, seed: u64) -> Result<FixtureRow> {
    let data = NormalData::circle(64, BodyClass::C1)?;
    let spec = GridSpec::cube(2, -2.0, 2.0, res)?;
    let mut opts = BodyOptions::default();
    opts.c1.seed = seed;
    Ok(match interpolate_body(&data, &spec, &opts) {
        Ok(body) => {
            let d = &body.diagnostics;
            let ok = d.min_alignment >= 0.99
                && d.contour_distance <= 3.0 * spec.max_step()
                && d.origin_error <= 1e-9;
            FixtureRow {
                name: "circle_body",
                expected: Verdict::Pass,
                observed: Verdict::Pass,
                exit_code: 0,
                matches: ok,
                detail: format!(
                    "alpha {}, alignment {:.6}, contour distance {:.2e}, {} vertices",
                    body.alpha, d.min_alignment, d.contour_distance, d.contour_vertices
                ),
            }
        }
        Err(e) => FixtureRow {
            name: "circle_body",
            expected: Verdict::Pass,
            observed: Verdict::Refuse,
            exit_code: e.exit_code(),
            matches: false,
            detail: e.to_string(),
        },
    })
}

/// Runs every fixture and returns the rows in a fixed order.
pub fn run_all(res: usize, seed: u64) -> Result<Vec<FixtureRow>> {
    let line = GridSpec::cube(1, -3.0, 3.0, 61)?;
    let plane = GridSpec::new(vec![-3.0, -2.0], vec![3.0, 4.0], vec![res, res])?;
    let square = GridSpec::cube(2, -1.0, 2.0, 31)?;
    Ok(vec![
        jet_fixture(
            "five_point_abs",
            &five_point_abs(),
            &line,
            seed,
            Verdict::Refuse,
        ),
        max_of_three_row(&plane, seed),
        jet_fixture(
            "tilted_segment",
            &tilted_segment(),
            &square,
            seed,
            Verdict::Refuse,
        ),
        circle_row(res.max(101), seed)?,
    ])
}

pub fn run(c: &Common) -> Result<i32> {
    let res = parse_res(c.res.as_deref(), 1, 41)?[0];
    let rows = run_all(res, c.seed)?;
    let all_match = rows.iter().all(|r| r.matches);

    let mut w = BufWriter::new(File::create(c.out.join("fixtures.csv"))?);
    writeln!(w, "name,expected,observed,exit_code,matches")?;
    for r in &rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.name,
            r.expected.label(),
            r.observed.label(),
            r.exit_code,
            r.matches
        )?;
    }
    w.flush()?;
    write_json(
        &c.out.join("fixtures.json"),
        &Summary {
            schema_version: SCHEMA_VERSION,
            seed: c.seed,
            all_match,
            fixtures: &rows,
        },
    )?;

    println!(
        "{:<16} {:<8} {:<8} {:<5} ok",
        "fixture", "expected", "observed", "exit"
    );
    for r in &rows {
        println!(
            "{:<16} {:<8} {:<8} {:<5} {}",
            r.name,
            r.expected.label(),
            r.observed.label(),
            r.exit_code,
            if r.matches { "yes" } else { "NO" }
        );
        println!("    {}", r.detail);
    }
    Ok(if all_match { 0 } else { 5 })
}
