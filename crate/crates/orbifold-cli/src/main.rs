//! Command-line front end: validate atlas presentations, compute structure
//! groups, compare atlases, and run the lifting analyses on the named
//! fixture maps.
//!
//! Exit status: 0 = ok/true, 1 = violations/false (including domain errors
//! reported in the output), 2 = usage or parse errors.

use clap::{Args, Parser, Subcommand};
use orbifold::atlas::{
    atlases_equivalent, render_element, structure_group_at, validate_defining_family, Mode,
    OrbifoldPresentation, ValidationOptions, ValidationReport,
};
use orbifold::error::Error;
use orbifold::expr::MapExpr;
use orbifold::fixtures;
use orbifold::group::FiniteMatrixGroup;
use orbifold::lifting::{
    monodromy, radial_lift_extension, ExtensionOptions, LiftReport, LiftStatus, Obstruction,
    QuotientMap,
};
use orbifold::report::{fmt_float, Report};
use orbifold::schema;
use orbifold::Result;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "orbifold",
    version,
    about = "Validate orbifold atlas presentations and analyze lifting obstructions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Also write the report to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Sample count for randomized checks.
    #[arg(long, global = true, default_value_t = 200)]
    samples: usize,

    /// Seed for all randomized sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Numeric tolerance for approximate comparisons.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tolerance: f64,

    /// Word-length bound for injection searches.
    #[arg(long = "word-bound", global = true, default_value_t = 4)]
    word_bound: usize,

    /// Grid resolution for region rasterization.
    #[arg(long, global = true, default_value_t = 64)]
    grid: usize,

    /// Override the presentation's compatibility mode.
    #[arg(long, global = true, value_parser = ["satake", "haefliger", "diffeological"])]
    mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the chart and injection conditions of a presentation.
    Validate {
        /// Fixture name (e.g. "teardrop(3)", "bad-union-F-union-Fprime") or
        /// atlas file path.
        input: String,
    },

    /// Compute the structure group at a point of a chart.
    #[command(name = "structure-group")]
    StructureGroup {
        /// Fixture name or atlas file path.
        input: String,
        /// Chart id to look in.
        #[arg(long)]
        chart: String,
        /// Comma-separated chart coordinates, e.g. "0,0".
        #[arg(long)]
        point: String,
    },

    /// Decide equivalence of two presentations joined by identifications.
    Compare {
        /// First fixture name or atlas file path.
        a: String,
        /// Second fixture name or atlas file path.
        b: String,
        /// Cross identifications "chartOfA:chartOfB" (repeatable,
        /// comma-separable). Defaults to pairing equal chart ids.
        #[arg(long)]
        cross: Vec<String>,
    },

    /// Grow a radial lift of a named quotient map and report the patches.
    Lift {
        /// Map fixture: "halfangle" or "example2".
        map: String,
        /// Domain ball radius for maps that take one.
        #[arg(long, default_value_t = 0.25)]
        radius: f64,
        /// Starting radius for the ring construction.
        #[arg(long, default_value_t = 0.05)]
        rho: f64,
        /// Ring growth factor; defaults to the map's standard setting.
        #[arg(long)]
        growth: Option<f64>,
    },

    /// Monodromy of a named quotient map around a centered circle.
    Monodromy {
        /// Map fixture: "halfangle" or "example2".
        map: String,
        /// Loop radius.
        #[arg(long, default_value_t = 0.75)]
        radius: f64,
        /// Domain ball radius for maps that take one.
        #[arg(long, default_value_t = 0.95)]
        domain_radius: f64,
    },

    /// Run the counterexample demos ("all", "halfangle", "example1",
    /// "example2", "bad-union").
    Demo {
        /// Demo name; omit to run the full suite.
        #[arg(default_value = "all")]
        name: String,
        /// Domain ball radius for the example2 analysis.
        #[arg(long, default_value_t = 0.25)]
        radius: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    let (report, code) = match run(&cli) {
        Ok(pair) => pair,
        Err(e @ (Error::Parse { .. } | Error::UnknownFixture(_))) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
        Err(other) => {
            let mut r = Report::new();
            r.record("error", &other);
            r.summary("status", "error");
            (r, 1)
        }
    };
    let text = report.render();
    print!("{text}");
    if let Some(path) = &cli.common.out {
        if let Err(e) = std::fs::write(path, &text) {
            eprintln!("error: cannot write {}: {e}", path.display());
            std::process::exit(2);
        }
    }
    std::process::exit(code);
}

fn run(cli: &Cli) -> Result<(Report, i32)> {
    let opts = validation_options(&cli.common);
    match &cli.command {
        Command::Validate { input } => cmd_validate(input, &cli.common, &opts),
        Command::StructureGroup {
            input,
            chart,
            point,
        } => cmd_structure_group(input, chart, point, &cli.common),
        Command::Compare { a, b, cross } => cmd_compare(a, b, cross, &cli.common, &opts),
        Command::Lift {
            map,
            radius,
            rho,
            growth,
        } => cmd_lift(map, *radius, *rho, *growth, &cli.common),
        Command::Monodromy {
            map,
            radius,
            domain_radius,
        } => cmd_monodromy(map, *radius, *domain_radius, &cli.common),
        Command::Demo { name, radius } => cmd_demo(name, *radius, &cli.common, &opts),
    }
}

fn validation_options(common: &Common) -> ValidationOptions {
    ValidationOptions {
        samples: common.samples,
        seed: common.seed,
        tol: common.tolerance,
        grid: common.grid,
        word_bound: common.word_bound,
    }
}

/// Resolve an input as a fixture name first, then as an atlas file path.
fn load_presentation(input: &str, common: &Common) -> Result<OrbifoldPresentation> {
    let mut p = match fixtures::presentation_fixture(input) {
        Ok(p) => p,
        Err(Error::UnknownFixture(_)) if Path::new(input).is_file() => {
            schema::parse_atlas(Path::new(input))?
        }
        Err(e) => return Err(e),
    };
    if let Some(label) = &common.mode {
        p.mode = Mode::parse(label).ok_or_else(|| Error::Parse {
            path: "--mode".into(),
            detail: format!("unknown mode \"{label}\""),
        })?;
    }
    Ok(p)
}

fn push_violations(report: &mut Report, prefix: &str, v: &ValidationReport) {
    for (k, violation) in v.violations.iter().enumerate() {
        let base = format!("{prefix}violation.{}", k + 1);
        report.record(format!("{base}.condition"), &violation.condition);
        report.record(format!("{base}.charts"), violation.charts.join(","));
        report.record(format!("{base}.witness"), &violation.witness);
        report.record(format!("{base}.detail"), &violation.detail);
    }
}

fn cmd_validate(
    input: &str,
    common: &Common,
    opts: &ValidationOptions,
) -> Result<(Report, i32)> {
    let p = load_presentation(input, common)?;
    let mut report = Report::new();
    report.record("check", "validate");
    report.record("input", input);
    report.record("mode", p.mode.label());
    report.record("charts", p.charts.len());
    report.record("transitions", p.transitions.len());
    let mut outcome = validate_defining_family(&p, opts);
    outcome.sort();
    push_violations(&mut report, "", &outcome);
    let code = if outcome.ok() { 0 } else { 1 };
    report.summary("status", if outcome.ok() { "ok" } else { "violations" });
    report.summary("violations", outcome.violations.len());
    Ok((report, code))
}

fn parse_point(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|part| {
            part.trim().parse::<f64>().map_err(|_| Error::Parse {
                path: "--point".into(),
                detail: format!("not a number: \"{part}\""),
            })
        })
        .collect()
}

fn describe_group(g: &FiniteMatrixGroup) -> String {
    let n = g.order();
    if n == 1 {
        return "trivial group".into();
    }
    if (0..n).any(|i| g.element_order(i) == n) {
        return format!("cyclic group of order {n}");
    }
    format!("group of order {n}")
}

fn cmd_structure_group(
    input: &str,
    chart: &str,
    point: &str,
    common: &Common,
) -> Result<(Report, i32)> {
    let p = load_presentation(input, common)?;
    let u = parse_point(point)?;
    let group = structure_group_at(&p, chart, &u)?;
    let mut report = Report::new();
    report.record("check", "structure-group");
    report.record("input", input);
    report.record("chart", chart);
    report.record("point", point);
    report.record("order", group.order());
    for i in 0..group.order() {
        report.record(format!("element.{}", i + 1), render_element(group.element(i)));
    }
    report.record("structure", describe_group(&group));
    report.summary("status", "ok");
    Ok((report, 0))
}

fn parse_cross(specs: &[String]) -> Result<Vec<(String, String)>> {
    let mut cross = Vec::new();
    for spec in specs {
        for part in spec.split(',') {
            let Some((a, b)) = part.split_once(':') else {
                return Err(Error::Parse {
                    path: "--cross".into(),
                    detail: format!("expected \"chartOfA:chartOfB\", got \"{part}\""),
                });
            };
            cross.push((a.trim().to_string(), b.trim().to_string()));
        }
    }
    Ok(cross)
}

fn cmd_compare(
    a: &str,
    b: &str,
    cross_specs: &[String],
    common: &Common,
    opts: &ValidationOptions,
) -> Result<(Report, i32)> {
    let pa = load_presentation(a, common)?;
    let pb = load_presentation(b, common)?;
    let mut cross = parse_cross(cross_specs)?;
    if cross.is_empty() {
        for chart in &pa.charts {
            if pb.charts.iter().any(|c| c.id == chart.id) {
                cross.push((chart.id.clone(), chart.id.clone()));
            }
        }
    }
    let mut report = Report::new();
    report.record("check", "compare");
    report.record("a", a);
    report.record("b", b);
    for (k, (ca, cb)) in cross.iter().enumerate() {
        report.record(format!("cross.{}", k + 1), format!("{ca}:{cb}"));
    }
    let equivalent = atlases_equivalent(&pa, &pb, &cross, opts)?;
    report.summary("equivalent", equivalent);
    report.summary("status", if equivalent { "ok" } else { "inequivalent" });
    Ok((report, if equivalent { 0 } else { 1 }))
}

fn zero_map(dim: usize) -> MapExpr {
    MapExpr::affine(&vec![vec![0.0; dim]; dim], &vec![0.0; dim])
}

/// Named quotient-map fixtures with their standard ring growth.
fn quotient_map_fixture(name: &str, radius: f64) -> Result<(QuotientMap, f64)> {
    match name {
        "halfangle" => Ok((
            fixtures::halfangle_map(&fixtures::half_angle_default_profile()),
            1.2,
        )),
        "example2" => Ok((fixtures::example2_quotient_map(radius), 1.02)),
        other => Err(Error::UnknownFixture(other.to_string())),
    }
}

fn hom_label(map: &[usize]) -> String {
    if map.iter().all(|&v| v == 0) {
        "trivial".into()
    } else if map.iter().enumerate().all(|(i, &v)| v == i) {
        "identity".into()
    } else {
        format!(
            "[{}]",
            map.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        )
    }
}

/// Index n of the annulus (1/(n+1), 1/n] containing a radius.
fn annulus_index(r: f64) -> u64 {
    (1.0 / r).floor() as u64
}

fn describe_obstruction(f: &QuotientMap, obstruction: &Obstruction) -> String {
    match obstruction {
        Obstruction::Monodromy { radius, element } => format!(
            "NonLiftable: monodromy {} at radius {}",
            render_element(f.target.quotient.group().element(*element)),
            fmt_float(*radius)
        ),
        Obstruction::ConflictingHomomorphisms {
            patch_a,
            patch_b,
            map_a,
            map_b,
        } => {
            let mut pair = [
                (annulus_index(patch_a.0), hom_label(map_a)),
                (annulus_index(patch_b.0), hom_label(map_b)),
            ];
            pair.sort();
            format!(
                "NonLiftable: annuli n={} ({}), n={} ({})",
                pair[0].0, pair[0].1, pair[1].0, pair[1].1
            )
        }
    }
}

fn push_lift_report(report: &mut Report, prefix: &str, f: &QuotientMap, lift: &LiftReport) {
    for (k, patch) in lift.patches.iter().enumerate() {
        let base = format!("{prefix}patch.{}", k + 1);
        report.record(format!("{base}.r_in"), fmt_float(patch.r_in));
        report.record(format!("{base}.r_out"), fmt_float(patch.r_out));
        let hom = match &patch.homomorphism {
            Some(map) => hom_label(map),
            None => "undetermined".into(),
        };
        report.record(format!("{base}.hom"), hom);
        if let Some(r) = patch.hom_radius {
            report.record(format!("{base}.annulus"), annulus_index(r));
        }
    }
    let status = match lift.status {
        LiftStatus::Lifted => "Lifted",
        LiftStatus::NonLiftable => "NonLiftable",
        LiftStatus::Inconclusive => "Inconclusive",
    };
    report.record(format!("{prefix}lift.status"), status);
    if let Some(obstruction) = &lift.obstruction {
        report.record(format!("{prefix}finding"), describe_obstruction(f, obstruction));
    }
}

fn cmd_lift(
    map: &str,
    radius: f64,
    rho: f64,
    growth: Option<f64>,
    common: &Common,
) -> Result<(Report, i32)> {
    let (f, default_growth) = quotient_map_fixture(map, radius)?;
    let opts = ExtensionOptions {
        growth: growth.unwrap_or(default_growth),
        tol: common.tolerance,
        ..ExtensionOptions::default()
    };
    let mut report = Report::new();
    report.record("check", "lift");
    report.record("map", map);
    report.record("radius", fmt_float(radius));
    report.record("rho", fmt_float(rho));
    report.record("growth", fmt_float(opts.growth));
    let dim = f.source.quotient.dim();
    let lift = radial_lift_extension(&f, rho, &zero_map(dim), &opts)?;
    push_lift_report(&mut report, "", &f, &lift);
    let (status, code) = match lift.status {
        LiftStatus::Lifted => ("ok", 0),
        LiftStatus::NonLiftable => ("nonliftable", 1),
        LiftStatus::Inconclusive => ("inconclusive", 1),
    };
    report.summary("status", status);
    Ok((report, code))
}

fn circle(radius: f64, steps: usize) -> Vec<Vec<f64>> {
    (0..=steps)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
            vec![radius * t.cos(), radius * t.sin()]
        })
        .collect()
}

fn cmd_monodromy(
    map: &str,
    radius: f64,
    domain_radius: f64,
    common: &Common,
) -> Result<(Report, i32)> {
    let (f, _) = quotient_map_fixture(map, domain_radius)?;
    let steps = common.samples.max(16);
    let path = circle(radius, steps);
    let seed = f.eval_rep(&path[0])?;
    let element = monodromy(&f, &path, &seed, common.tolerance)?;
    let mut report = Report::new();
    report.record("check", "monodromy");
    report.record("map", map);
    report.record("radius", fmt_float(radius));
    report.record("steps", steps);
    report.record(
        "element",
        render_element(f.target.quotient.group().element(element)),
    );
    report.summary("status", "ok");
    Ok((report, 0))
}

fn seq_string(s: &fixtures::SignSequence) -> String {
    (1..=s.len())
        .map(|n| if s.sign(n) > 0.0 { '+' } else { '-' })
        .collect()
}

fn demo_halfangle(report: &mut Report, common: &Common) -> Result<usize> {
    report.record("demo", "halfangle");
    let f = fixtures::halfangle_map(&fixtures::half_angle_default_profile());
    let path = circle(0.75, 96);
    let seed = f.eval_rep(&path[0])?;
    let element = monodromy(&f, &path, &seed, common.tolerance)?;
    report.record("monodromy.radius", fmt_float(0.75));
    report.record(
        "monodromy.element",
        render_element(f.target.quotient.group().element(element)),
    );
    let lift = radial_lift_extension(&f, 0.05, &zero_map(2), &ExtensionOptions::default())?;
    push_lift_report(report, "", &f, &lift);
    Ok(usize::from(lift.status != LiftStatus::Lifted))
}

fn demo_example1(report: &mut Report) -> Result<usize> {
    report.record("demo", "example1");
    let pairs: [(&[i8], &[i8]); 5] = [
        (&[1, 1, 1, 1, 1], &[1, 1, 1, 1, -1]),
        (&[1, -1, 1, -1, 1, -1], &[1, -1, 1, -1, 1, 1]),
        (&[-1, -1, -1, -1, -1], &[-1, -1, -1, -1, 1]),
        (&[1, 1, 1, 1, -1, -1, 1], &[1, 1, 1, 1, 1, 1, 1]),
        (&[1, -1, 1, -1, -1, 1, -1], &[-1, 1, -1, 1, 1, 1, -1]),
    ];
    let mut inequivalent = 0usize;
    for (k, (sa, sb)) in pairs.iter().enumerate() {
        let a = fixtures::SignSequence::new(sa)?;
        let b = fixtures::SignSequence::new(sb)?;
        let fa = fixtures::example1_map(&a);
        let fb = fixtures::example1_map(&b);
        let n_hi = (a.len().max(b.len()) + 2) as u32;
        let matched = fixtures::constant_sign_match(&fa, &fb, 5, n_hi)?;
        let base = format!("pair.{}", k + 1);
        report.record(format!("{base}.a"), seq_string(&a));
        report.record(format!("{base}.b"), seq_string(&b));
        let label = match matched {
            Some(s) => format!("{s:+}"),
            None => "none".into(),
        };
        report.record(format!("{base}.constant_sign"), label);
        if matched.is_none() {
            inequivalent += 1;
        }
    }
    report.record(
        "finding",
        format!("no constant-sign equivalence on (0,1/5] for {inequivalent} of 5 pairs"),
    );
    Ok(inequivalent)
}

fn demo_example2(report: &mut Report, radius: f64, common: &Common) -> Result<usize> {
    report.record("demo", "example2");
    report.record("radius", fmt_float(radius));
    let f = fixtures::example2_quotient_map(radius);
    let opts = ExtensionOptions {
        growth: 1.02,
        tol: common.tolerance,
        ..ExtensionOptions::default()
    };
    let lift = radial_lift_extension(&f, 0.05, &zero_map(2), &opts)?;
    push_lift_report(report, "", &f, &lift);
    Ok(usize::from(lift.status != LiftStatus::Lifted))
}

fn demo_bad_union(
    report: &mut Report,
    common: &Common,
    opts: &ValidationOptions,
) -> Result<usize> {
    report.record("demo", "bad-union");
    let mut findings = 0usize;
    for (k, name) in [
        "bad-union-F-union-Fprime",
        "bad-union-F-union-Fsecond",
        "bad-union-Fprime-union-Fsecond",
    ]
    .iter()
    .enumerate()
    {
        let p = load_presentation(name, common)?;
        let mut outcome = validate_defining_family(&p, opts);
        outcome.sort();
        let base = format!("union.{}", k + 1);
        report.record(format!("{base}.name"), *name);
        report.record(
            format!("{base}.status"),
            if outcome.ok() { "ok" } else { "violations" },
        );
        push_violations(report, &format!("{base}."), &outcome);
        if !outcome.ok() {
            findings += 1;
        }
    }
    let pa = fixtures::bad_union_f();
    let pb = fixtures::bad_union_fprime();
    let cross = vec![("F".to_string(), "Fprime".to_string())];
    let equivalent = atlases_equivalent(&pa, &pb, &cross, opts)?;
    report.record("equivalent.F.Fprime", equivalent);
    report.record(
        "finding",
        "the union of F and Fprime admits no injection, yet F and Fprime are equivalent atlases",
    );
    Ok(findings)
}

fn cmd_demo(
    name: &str,
    radius: f64,
    common: &Common,
    opts: &ValidationOptions,
) -> Result<(Report, i32)> {
    let mut report = Report::new();
    report.record("check", "demo");
    report.record("suite", name);
    let mut findings = 0usize;
    let known = ["all", "halfangle", "example1", "example2", "bad-union"];
    if !known.contains(&name) {
        return Err(Error::UnknownFixture(name.to_string()));
    }
    if name == "all" || name == "halfangle" {
        findings += demo_halfangle(&mut report, common)?;
    }
    if name == "all" || name == "example1" {
        findings += demo_example1(&mut report)?;
    }
    if name == "all" || name == "example2" {
        findings += demo_example2(&mut report, radius, common)?;
    }
    if name == "all" || name == "bad-union" {
        findings += demo_bad_union(&mut report, common, opts)?;
    }
    report.summary("status", if findings > 0 { "violations" } else { "ok" });
    report.summary("findings", findings);
    Ok((report, if findings > 0 { 1 } else { 0 }))
}
