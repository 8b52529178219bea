//! Atlas description files: JSON in which every scalar is a string, so
//! exact rationals survive round trips unchanged.
//!
//! Top level is `{mode, charts, transitions, identifications}`. Each chart
//! is `{id, dim, region, group: {scalarMode, generators}}`, generators
//! given as row-major entry lists. Exact-mode entries must be integers or
//! rationals `"p/q"`; decimal notation is rejected, naming the offending
//! field. Region geometry accepts either notation in any mode. Transitions
//! parse in the scalar mode of their source chart's group. Projections are
//! analytic data and are not part of the file format; identifications (the
//! declared image containments) and transitions carry the gluing.

use crate::atlas::{Chart, Mode, OrbifoldPresentation, Transition};
use crate::error::{Error, Result};
use crate::expr::{BallNorm, Region};
use crate::group::FiniteMatrixGroup;
use crate::linalg::{Matrix, Vector};
use crate::scalar::{Scalar, ScalarMode};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Cap on group closure when reading files; generators that do not close
/// within this many elements are reported as non-finite.
const GROUP_CLOSURE_CAP: usize = 512;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtlasFile {
    mode: String,
    charts: Vec<ChartFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    transitions: Vec<TransitionFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    identifications: Vec<(String, String)>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChartFile {
    id: String,
    dim: usize,
    region: RegionFile,
    group: GroupFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupFile {
    #[serde(rename = "scalarMode")]
    scalar_mode: String,
    generators: Vec<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RegionFile {
    Full {
        dim: usize,
        extent: String,
    },
    Ball {
        center: Vec<String>,
        radius: String,
    },
    Annulus {
        dim: usize,
        r1: String,
        r2: String,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionFile {
    from: String,
    to: String,
    domain: RegionFile,
    linear: Vec<String>,
    offset: Vec<String>,
}

fn parse_err<T>(path: impl Into<String>, detail: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        path: path.into(),
        detail: detail.into(),
    })
}

/// One scalar entry in the declared mode, tagging parse failures with the
/// field path. Exact mode accepts integers and `"p/q"` rationals only.
fn parse_scalar(s: &str, mode: ScalarMode, field: &str) -> Result<Scalar> {
    Scalar::parse(s, mode).map_err(|e| match e {
        Error::Parse { detail, .. } => Error::Parse {
            path: field.into(),
            detail,
        },
        other => other,
    })
}

/// Geometry numbers: any of integer, rational `"p/q"`, or decimal.
fn parse_number(s: &str, field: &str) -> Result<f64> {
    Ok(parse_scalar(s, ScalarMode::approx_default(), field)?.to_f64())
}

fn region_from_file(r: &RegionFile, expect_dim: usize, field: &str) -> Result<Region> {
    let region = match r {
        RegionFile::Full { dim, extent } => Region::FullSpace {
            dim: *dim,
            extent: parse_number(extent, &format!("{field}.extent"))?,
        },
        RegionFile::Ball { center, radius } => Region::Ball {
            center: center
                .iter()
                .enumerate()
                .map(|(i, c)| parse_number(c, &format!("{field}.center[{i}]")))
                .collect::<Result<Vec<f64>>>()?,
            radius: parse_number(radius, &format!("{field}.radius"))?,
            norm: BallNorm::Euclid,
        },
        RegionFile::Annulus { dim, r1, r2 } => Region::Annulus {
            dim: *dim,
            r1: parse_number(r1, &format!("{field}.r1"))?,
            r2: parse_number(r2, &format!("{field}.r2"))?,
        },
    };
    if region.dim() != expect_dim {
        return parse_err(
            field,
            format!(
                "region dimension {} does not match the chart dimension {}",
                region.dim(),
                expect_dim
            ),
        );
    }
    Ok(region)
}

fn scalar_mode_from_label(label: &str, field: &str) -> Result<ScalarMode> {
    match label {
        "exact" => Ok(ScalarMode::Exact),
        "approx" => Ok(ScalarMode::approx_default()),
        other => parse_err(field, format!("unknown scalarMode \"{other}\" (exact|approx)")),
    }
}

/// Parse an atlas description from its JSON text.
pub fn parse_atlas_str(text: &str) -> Result<OrbifoldPresentation> {
    let file: AtlasFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: format!("line {} column {}", e.line(), e.column()),
        detail: e.to_string(),
    })?;
    let mode = Mode::parse(&file.mode).ok_or_else(|| Error::Parse {
        path: "mode".into(),
        detail: format!(
            "unknown mode \"{}\" (satake|haefliger|diffeological)",
            file.mode
        ),
    })?;

    let mut charts: Vec<Chart> = Vec::with_capacity(file.charts.len());
    for (ci, cf) in file.charts.iter().enumerate() {
        let base = format!("charts[{ci}]");
        if cf.dim == 0 {
            return parse_err(format!("{base}.dim"), "chart dimension must be positive");
        }
        if charts.iter().any(|c| c.id == cf.id) {
            return parse_err(format!("{base}.id"), format!("duplicate chart id \"{}\"", cf.id));
        }
        let smode = scalar_mode_from_label(
            &cf.group.scalar_mode,
            &format!("{base}.group.scalarMode"),
        )?;
        let mut gens: Vec<Matrix> = Vec::new();
        for (gi, entries) in cf.group.generators.iter().enumerate() {
            if entries.len() != cf.dim * cf.dim {
                return parse_err(
                    format!("{base}.group.generators[{gi}]"),
                    format!(
                        "expected {} row-major entries for a {}x{} matrix, got {}",
                        cf.dim * cf.dim,
                        cf.dim,
                        cf.dim,
                        entries.len()
                    ),
                );
            }
            let data = entries
                .iter()
                .enumerate()
                .map(|(ei, e)| {
                    parse_scalar(e, smode, &format!("{base}.group.generators[{gi}][{ei}]"))
                })
                .collect::<Result<Vec<Scalar>>>()?;
            gens.push(Matrix::new(cf.dim, cf.dim, data));
        }
        if gens.is_empty() {
            gens.push(Matrix::identity(cf.dim, smode));
        }
        let group = FiniteMatrixGroup::close_generators(&gens, GROUP_CLOSURE_CAP)?;
        let model = region_from_file(&cf.region, cf.dim, &format!("{base}.region"))?;
        charts.push(Chart::new(&cf.id, model, group));
    }

    let chart_dim = |id: &str| charts.iter().find(|c| c.id == id).map(|c| c.dim);
    let chart_mode = |id: &str| {
        charts
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.group.mode())
            .unwrap_or(ScalarMode::approx_default())
    };

    let mut transitions: Vec<Transition> = Vec::with_capacity(file.transitions.len());
    for (ti, tf) in file.transitions.iter().enumerate() {
        let base = format!("transitions[{ti}]");
        let Some(from_dim) = chart_dim(&tf.from) else {
            return parse_err(format!("{base}.from"), format!("unknown chart \"{}\"", tf.from));
        };
        let Some(to_dim) = chart_dim(&tf.to) else {
            return parse_err(format!("{base}.to"), format!("unknown chart \"{}\"", tf.to));
        };
        let smode = chart_mode(&tf.from);
        if tf.linear.len() != to_dim * from_dim {
            return parse_err(
                format!("{base}.linear"),
                format!(
                    "expected {} row-major entries for a {}x{} matrix, got {}",
                    to_dim * from_dim,
                    to_dim,
                    from_dim,
                    tf.linear.len()
                ),
            );
        }
        let data = tf
            .linear
            .iter()
            .enumerate()
            .map(|(ei, e)| parse_scalar(e, smode, &format!("{base}.linear[{ei}]")))
            .collect::<Result<Vec<Scalar>>>()?;
        if tf.offset.len() != to_dim {
            return parse_err(
                format!("{base}.offset"),
                format!("expected {} entries, got {}", to_dim, tf.offset.len()),
            );
        }
        let offset = tf
            .offset
            .iter()
            .enumerate()
            .map(|(ei, e)| parse_scalar(e, smode, &format!("{base}.offset[{ei}]")))
            .collect::<Result<Vec<Scalar>>>()?;
        transitions.push(Transition {
            from: tf.from.clone(),
            to: tf.to.clone(),
            domain: region_from_file(&tf.domain, from_dim, &format!("{base}.domain"))?,
            linear: Matrix::new(to_dim, from_dim, data),
            offset: Vector::new(offset),
        });
    }

    let mut containments = Vec::with_capacity(file.identifications.len());
    for (ii, (a, b)) in file.identifications.iter().enumerate() {
        for (side, id) in [("inner", a), ("outer", b)] {
            if chart_dim(id).is_none() {
                return parse_err(
                    format!("identifications[{ii}].{side}"),
                    format!("unknown chart \"{id}\""),
                );
            }
        }
        containments.push((a.clone(), b.clone()));
    }

    Ok(OrbifoldPresentation {
        charts,
        transitions,
        containments,
        mode,
    })
}

/// Parse an atlas description file from disk.
pub fn parse_atlas(path: &Path) -> Result<OrbifoldPresentation> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    parse_atlas_str(&text)
}

fn format_f64(x: f64) -> String {
    crate::scalar::format_f64(x)
}

fn region_to_file(region: &Region, context: &str) -> Result<RegionFile> {
    match region {
        Region::FullSpace { dim, extent } => Ok(RegionFile::Full {
            dim: *dim,
            extent: format_f64(*extent),
        }),
        Region::Ball {
            center,
            radius,
            norm: BallNorm::Euclid,
        } => Ok(RegionFile::Ball {
            center: center.iter().map(|&c| format_f64(c)).collect(),
            radius: format_f64(*radius),
        }),
        Region::Annulus { dim, r1, r2 } => Ok(RegionFile::Annulus {
            dim: *dim,
            r1: format_f64(*r1),
            r2: format_f64(*r2),
        }),
        other => parse_err(
            context,
            format!("region {other:?} has no file representation"),
        ),
    }
}

fn matrix_entries(m: &Matrix) -> Vec<String> {
    let mut out = Vec::with_capacity(m.rows * m.cols);
    for i in 0..m.rows {
        for j in 0..m.cols {
            out.push(m.get(i, j).render());
        }
    }
    out
}

/// Serialize a presentation to the file format. Groups are written through
/// their generating sets; projections are code-level data and are omitted.
pub fn write_atlas(p: &OrbifoldPresentation) -> Result<String> {
    let mut charts = Vec::with_capacity(p.charts.len());
    for chart in &p.charts {
        let gen_indices = chart.group.generating_set();
        let generators: Vec<Vec<String>> = if gen_indices.is_empty() {
            vec![matrix_entries(&Matrix::identity(chart.dim, chart.group.mode()))]
        } else {
            gen_indices
                .iter()
                .map(|&gi| matrix_entries(chart.group.element(gi)))
                .collect()
        };
        charts.push(ChartFile {
            id: chart.id.clone(),
            dim: chart.dim,
            region: region_to_file(&chart.model, &format!("chart \"{}\"", chart.id))?,
            group: GroupFile {
                scalar_mode: if chart.group.mode().is_exact() {
                    "exact".into()
                } else {
                    "approx".into()
                },
                generators,
            },
        });
    }
    let transitions = p
        .transitions
        .iter()
        .map(|t| {
            Ok(TransitionFile {
                from: t.from.clone(),
                to: t.to.clone(),
                domain: region_to_file(&t.domain, &format!("transition {} -> {}", t.from, t.to))?,
                linear: matrix_entries(&t.linear),
                offset: t.offset.entries.iter().map(Scalar::render).collect(),
            })
        })
        .collect::<Result<Vec<TransitionFile>>>()?;
    let file = AtlasFile {
        mode: p.mode.label().into(),
        charts,
        transitions,
        identifications: p.containments.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| Error::Parse {
        path: "serialization".into(),
        detail: e.to_string(),
    })?;
    text.push('\n');
    Ok(text)
}
