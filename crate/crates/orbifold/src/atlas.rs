//! Presented atlases of linear-quotient charts: uniformizing charts,
//! injections between them, defining-family validation, germ compatibility,
//! equivalence of presentations, and restriction to open subsets.
//!
//! A chart is a group acting on a model region; an optional projection into
//! a shared coordinate space lets fixtures identify points across charts
//! numerically. Validation never proves nonexistence: a failed injection
//! search is reported either with a concrete monodromy witness or as "not
//! found in the search class".

use crate::error::{Error, Result};
use crate::expr::{MapExpr, Region};
use crate::group::FiniteMatrixGroup;
use crate::lifting::{grid_lift, GridOutcome, OrbitValued};
use crate::linalg::{euclid_dist, euclid_norm, jacobian_fd, Matrix, Vector};
use crate::scalar::ScalarMode;

pub type ChartId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Satake,
    Haefliger,
    Diffeological,
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Satake => "satake",
            Mode::Haefliger => "haefliger",
            Mode::Diffeological => "diffeological",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "satake" => Some(Mode::Satake),
            "haefliger" => Some(Mode::Haefliger),
            "diffeological" => Some(Mode::Diffeological),
            _ => None,
        }
    }
}

/// A uniformizing chart: finite linear group acting on a model region.
#[derive(Debug, Clone)]
pub struct Chart {
    pub id: ChartId,
    pub dim: usize,
    pub model: Region,
    pub group: FiniteMatrixGroup,
    /// Concrete map of the model into a shared coordinate space (constant
    /// on orbits up to the group action downstairs). Present on programmatic
    /// fixtures; atlases loaded from files identify points through declared
    /// transitions instead.
    pub projection: Option<MapExpr>,
}

impl Chart {
    pub fn new(id: &str, model: Region, group: FiniteMatrixGroup) -> Self {
        let dim = group.dim();
        Chart {
            id: id.to_string(),
            dim,
            model,
            group,
            projection: None,
        }
    }

    pub fn with_projection(mut self, projection: MapExpr) -> Self {
        assert_eq!(projection.in_dim, self.dim, "projection input dimension");
        self.projection = Some(projection);
        self
    }
}

/// Declared affine injection between charts on a subdomain.
#[derive(Debug, Clone)]
pub struct Transition {
    pub from: ChartId,
    pub to: ChartId,
    pub domain: Region,
    pub linear: Matrix,
    pub offset: Vector,
}

impl Transition {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let y = self.linear.apply_f64(x);
        y.iter()
            .zip(self.offset.to_f64())
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn map_expr(&self) -> MapExpr {
        MapExpr::affine(&self.linear.to_f64_rows(), &self.offset.to_f64())
    }

    /// Inverse image `A^{-1}(y - b)`, if the linear part inverts.
    pub fn apply_inverse(&self, y: &[f64], mode: ScalarMode) -> Option<Vec<f64>> {
        let inv = self.linear.inverse(mode).ok()?;
        let shifted: Vec<f64> = y
            .iter()
            .zip(self.offset.to_f64())
            .map(|(a, b)| a - b)
            .collect();
        Some(inv.apply_f64(&shifted))
    }
}

/// A finite presented family of charts with its declared relations.
#[derive(Debug, Clone)]
pub struct OrbifoldPresentation {
    pub charts: Vec<Chart>,
    pub transitions: Vec<Transition>,
    /// Declared image containments `(inner, outer)`: the image of `inner`
    /// lies inside the image of `outer` in the underlying space.
    pub containments: Vec<(ChartId, ChartId)>,
    pub mode: Mode,
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub condition: String,
    pub charts: Vec<ChartId>,
    pub witness: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, condition: &str, charts: &[&str], witness: String, detail: String) {
        self.violations.push(Violation {
            condition: condition.to_string(),
            charts: charts.iter().map(|s| s.to_string()).collect(),
            witness,
            detail,
        });
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn sort(&mut self) {
        self.violations.sort_by(|a, b| {
            (&a.condition, &a.charts, &a.witness).cmp(&(&b.condition, &b.charts, &b.witness))
        });
    }
}

#[derive(Debug, Clone)]
pub struct ValidationOptions {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub grid: usize,
    pub word_bound: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            samples: 200,
            seed: 0,
            tol: 1e-9,
            grid: 64,
            word_bound: 4,
        }
    }
}

impl OrbifoldPresentation {
    pub fn chart_index(&self, id: &str) -> Result<usize> {
        self.charts
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| Error::UnknownFixture(format!("chart '{id}'")))
    }

    pub fn chart(&self, id: &str) -> Result<&Chart> {
        Ok(&self.charts[self.chart_index(id)?])
    }
}

fn format_point(x: &[f64]) -> String {
    x.iter()
        .map(|v| format!("{v:.6}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Render a group element compactly; the identity and its negative get the
/// conventional names.
pub fn render_element(m: &Matrix) -> String {
    let rows = m.to_f64_rows();
    let n = rows.len();
    let is = |pred: &dyn Fn(usize, usize, f64) -> bool| {
        rows.iter()
            .enumerate()
            .all(|(i, r)| r.iter().enumerate().all(|(j, &v)| pred(i, j, v)))
    };
    if is(&|i, j, v| (v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-9) {
        return "I".to_string();
    }
    if is(&|i, j, v| (v - if i == j { -1.0 } else { 0.0 }).abs() < 1e-9) {
        return "-I".to_string();
    }
    let body = rows
        .iter()
        .map(|r| {
            format!(
                "[{}]",
                r.iter()
                    .map(|v| format!("{v:.4}"))
                    .collect::<Vec<_>>()
                    .join(",")
            )
        })
        .collect::<Vec<_>>()
        .join(",");
    format!("{n}x{n}:[{body}]")
}


/// Local uniformizing system checks: connected model, group-stable model,
/// and (Satake mode) no reflections.
pub fn validate_lus(chart: &Chart, mode: Mode, opts: &ValidationOptions) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !chart.model.is_connected_sampled(opts.grid.min(48)) {
        report.push(
            "lus: model connected",
            &[&chart.id],
            String::new(),
            "chart model splits into several sampled components".into(),
        );
    }
    let pts = chart.model.sample(opts.samples.min(64), opts.seed);
    'outer: for x in &pts {
        for g in chart.group.elements() {
            let gx = g.apply_f64(x);
            // Tolerant containment: flood-filled component models admit one
            // grid cell of slack, otherwise genuinely stable points near the
            // boundary would be flagged.
            if !component_contains_tolerant(&chart.model, &gx) {
                report.push(
                    "lus: model group-stable",
                    &[&chart.id],
                    format_point(x),
                    format!("group moves the sampled point outside the model: {}", format_point(&gx)),
                );
                break 'outer;
            }
        }
    }
    if mode == Mode::Satake {
        for i in 0..chart.group.order() {
            if chart.group.is_reflection(i).unwrap_or(false) {
                report.push(
                    "lus: reflection-free",
                    &[&chart.id],
                    render_element(chart.group.element(i)),
                    "reflection present: fixed-point set has codimension 1".into(),
                );
            }
        }
    }
    report
}

/// Sampled validity of a declared affine injection: invertibility, image in
/// the target model, forward orbit compatibility, and no cross-orbit
/// identification when pulling target orbits back.
pub fn validate_injection(
    t: &Transition,
    from: &Chart,
    to: &Chart,
    opts: &ValidationOptions,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mode = ScalarMode::approx_default();
    let det = t
        .linear
        .determinant(ScalarMode::approx_default())
        .map(|d| d.to_f64())
        .unwrap_or(0.0);
    if det.abs() < 1e-12 {
        report.push(
            "injection: invertible",
            &[&from.id, &to.id],
            format!("det={det:.3e}"),
            "linear part of the transition is singular".into(),
        );
        return report;
    }
    let tol = opts.tol.max(1e-9);
    let pts = t.domain.sample(opts.samples.min(80), opts.seed);
    for u in &pts {
        if !from.model.contains(u) {
            continue;
        }
        let image = t.apply(u);
        if !to.model.contains(&image) {
            report.push(
                "injection: image in target model",
                &[&from.id, &to.id],
                format_point(u),
                format!("image {} leaves the target model", format_point(&image)),
            );
            continue;
        }
        // Forward compatibility: identified source points stay identified.
        for g in from.group.elements() {
            let gu = g.apply_f64(u);
            if !t.domain.contains(&gu) {
                continue;
            }
            let im2 = t.apply(&gu);
            let on_orbit = to
                .group
                .orbit_f64(&image)
                .iter()
                .any(|c| euclid_dist(c, &im2) <= tol * 1e3 * (1.0 + euclid_norm(&im2)));
            if !on_orbit {
                report.push(
                    "injection: orbit compatibility",
                    &[&from.id, &to.id],
                    format_point(u),
                    format!(
                        "source identifies ({}) with ({}) but the images are on different target orbits",
                        format_point(u),
                        format_point(&gu)
                    ),
                );
                break;
            }
        }
        // Backward: target identifications must not merge distinct source
        // orbits.
        for j in 0..to.group.order() {
            let moved = to.group.element(j).apply_f64(&image);
            if let Some(v) = t.apply_inverse(&moved, mode) {
                if !t.domain.contains(&v) {
                    continue;
                }
                let same_source = from
                    .group
                    .orbit_f64(u)
                    .iter()
                    .any(|c| euclid_dist(c, &v) <= tol * 1e3 * (1.0 + euclid_norm(&v)));
                if !same_source {
                    report.push(
                        "injection: quotient injectivity",
                        &[&from.id, &to.id],
                        format_point(u),
                        format!(
                            "target identifies the images of ({}) and ({}), which are on different source orbits",
                            format_point(u),
                            format_point(&v)
                        ),
                    );
                    break;
                }
            }
        }
    }
    report
}

/// The unique target group element carrying one injection to another over a
/// shared domain.
pub fn injection_unique_factor(
    lambda: &Transition,
    mu: &Transition,
    to: &Chart,
    opts: &ValidationOptions,
) -> Result<usize> {
    let pts = lambda.domain.sample(opts.samples.min(60).max(8), opts.seed);
    let mut candidates: Option<Vec<usize>> = None;
    for u in &pts {
        let a = lambda.apply(u);
        let b = mu.apply(u);
        let tol = opts.tol.max(1e-9) * 1e3 * (1.0 + euclid_norm(&b));
        let here: Vec<usize> = (0..to.group.order())
            .filter(|&j| euclid_dist(&to.group.element(j).apply_f64(&a), &b) <= tol)
            .collect();
        candidates = Some(match candidates {
            None => here,
            Some(prev) => prev.into_iter().filter(|c| here.contains(c)).collect(),
        });
        if candidates.as_ref().unwrap().is_empty() {
            return Err(Error::NoFactor);
        }
    }
    match candidates {
        Some(c) if c.len() == 1 => Ok(c[0]),
        _ => Err(Error::NoFactor),
    }
}

/// Identification of a chart-i point inside chart j, through projections
/// when both charts carry one, otherwise by bounded search over declared
/// group moves and transitions.
pub fn identify(
    p: &OrbifoldPresentation,
    i: usize,
    u: &[f64],
    j: usize,
    opts: &ValidationOptions,
) -> Option<Vec<f64>> {
    if i == j {
        return Some(u.to_vec());
    }
    // Declared transitions are exact affine identifications; prefer them
    // over numeric projection matching.
    for t in &p.transitions {
        if t.from == p.charts[i].id && t.to == p.charts[j].id && t.domain.contains(u) {
            let v = t.apply(u);
            if p.charts[j].model.contains(&v) {
                return Some(v);
            }
        }
    }
    if let (Some(pi), Some(pj)) = (&p.charts[i].projection, &p.charts[j].projection) {
        let target = pi.eval(u).ok()?;
        let newton_tol = opts.tol.max(1e-10).min(1e-7);
        // Seeds: the point itself (common shared-coordinate case), then a
        // deterministic sweep of the target model.
        let mut seeds: Vec<Vec<f64>> = Vec::new();
        if p.charts[j].dim == u.len() {
            seeds.push(u.to_vec());
        }
        seeds.extend(p.charts[j].model.sample(48, opts.seed.wrapping_add(17)));
        for s in seeds {
            if let Some(v) = pj.newton_preimage(&target, &s, newton_tol) {
                if p.charts[j].model.contains(&v) {
                    return Some(v);
                }
            }
        }
        return None;
    }
    // Bounded word search over the declared relation.
    let key = |c: usize, x: &[f64]| -> (usize, Vec<i64>) {
        (c, x.iter().map(|&v| (v * 1e6).round() as i64).collect())
    };
    let mut queue = std::collections::VecDeque::from([(i, u.to_vec(), 0usize)]);
    let mut seen = std::collections::HashSet::new();
    seen.insert(key(i, u));
    while let Some((c, x, depth)) = queue.pop_front() {
        if c == j {
            return Some(x);
        }
        if depth >= opts.word_bound {
            continue;
        }
        let push = |c2: usize, x2: Vec<f64>, queue: &mut std::collections::VecDeque<(usize, Vec<f64>, usize)>, seen: &mut std::collections::HashSet<(usize, Vec<i64>)>| {
            if seen.insert(key(c2, &x2)) {
                queue.push_back((c2, x2, depth + 1));
            }
        };
        for g in p.charts[c].group.elements() {
            push(c, g.apply_f64(&x), &mut queue, &mut seen);
        }
        for t in &p.transitions {
            if t.from == p.charts[c].id && t.domain.contains(&x) {
                if let Ok(c2) = p.chart_index(&t.to) {
                    push(c2, t.apply(&x), &mut queue, &mut seen);
                }
            }
            if t.to == p.charts[c].id {
                if let Some(back) = t.apply_inverse(&x, ScalarMode::approx_default()) {
                    if t.domain.contains(&back) {
                        if let Ok(c2) = p.chart_index(&t.from) {
                            push(c2, back, &mut queue, &mut seen);
                        }
                    }
                }
            }
        }
    }
    None
}

/// Germ of "chart j over chart i" as an orbit-valued map: candidates for
/// the lifted value at `x` are the G_j-orbit of the branch of
/// `proj_j^{-1}(proj_i(x))` nearest the previous value.
struct ChartGerm<'a> {
    from: &'a Chart,
    to: &'a Chart,
    newton_tol: f64,
}

impl OrbitValued for ChartGerm<'_> {
    fn dim_in(&self) -> usize {
        self.from.dim
    }

    fn dim_out(&self) -> usize {
        self.to.dim
    }

    fn candidates(&self, x: &[f64], hint: &[f64]) -> Result<Vec<Vec<f64>>> {
        let pi = self.from.projection.as_ref().expect("source projection");
        let pj = self.to.projection.as_ref().expect("target projection");
        let target = pi.eval(x)?;
        let v = pj
            .newton_preimage(&target, hint, self.newton_tol)
            .ok_or(Error::StepTooLarge { index: 0, gap: 0.0 })?;
        Ok(self.to.group.orbit_f64(&v))
    }

    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        euclid_dist(a, b)
    }
}

/// Outcome of searching for an injection realizing a declared containment.
#[derive(Debug, Clone)]
pub enum InjectionSearch {
    /// An affine injection validated on samples.
    FoundAffine { linear: Vec<Vec<f64>>, offset: Vec<f64> },
    /// No affine form, but continuation covered the chart consistently
    /// (sampled evidence that a possibly nonlinear injection exists).
    FoundContinuation,
    /// Continuation met a definite group-element mismatch on a loop.
    Monodromy { element: Matrix },
    /// Nothing found; never a proof of nonexistence.
    NotFound { reason: String },
}

/// Search for an injection of chart `from_idx` into chart `to_idx`
/// realizing a declared image containment: affine candidates seeded by the
/// finite-difference Jacobian of the identification germ, then grid
/// continuation as the existence fallback.
pub fn injection_search(
    p: &OrbifoldPresentation,
    from_idx: usize,
    to_idx: usize,
    opts: &ValidationOptions,
) -> InjectionSearch {
    let from = &p.charts[from_idx];
    let to = &p.charts[to_idx];
    if to.group.order() % from.group.order() != 0 {
        // An injection restricts to a monomorphism of structure groups, so
        // Lagrange rules this pair out before any geometry.
        return InjectionSearch::NotFound {
            reason: format!(
                "structure group of order {} cannot embed in one of order {}",
                from.group.order(),
                to.group.order()
            ),
        };
    }
    let (Some(pi), Some(pj)) = (&from.projection, &to.projection) else {
        // Without projections the only injection evidence is a declared
        // transition, which is validated separately.
        return InjectionSearch::NotFound {
            reason: "no identification data for the chart pair".into(),
        };
    };
    let newton_tol = opts.tol.max(1e-10).min(1e-8);
    let samples = from.model.sample(opts.samples.clamp(24, 96), opts.seed);
    let Some(base) = samples.first().cloned() else {
        return InjectionSearch::NotFound {
            reason: "source model yielded no sample points".into(),
        };
    };
    let Some(v0) = identify(p, from_idx, &base, to_idx, opts) else {
        return InjectionSearch::NotFound {
            reason: "no identified image for the sampled base point".into(),
        };
    };
    // Affine class seeded by the germ Jacobian at the base point.
    let germ_jac = jacobian_fd(
        |x| {
            pj.newton_preimage(&pi.eval(x)?, &v0, newton_tol)
                .ok_or_else(|| Error::Evaluation("germ broke during differentiation".into()))
        },
        &base,
        1e-6,
    );
    if let Ok(l) = germ_jac {
        'candidates: for gj in 0..to.group.order() {
            let g = to.group.element(gj).to_f64_rows();
            // candidate x -> g (v0 + L (x - base))
            let n = from.dim;
            let m = to.dim;
            let mut lin = vec![vec![0.0; n]; m];
            let mut off = vec![0.0; m];
            for r in 0..m {
                for c in 0..n {
                    for k in 0..m {
                        lin[r][c] += g[r][k] * l[k][c];
                    }
                }
                let mut base_term = 0.0;
                for k in 0..m {
                    let mut lx = 0.0;
                    for c in 0..n {
                        lx += l[k][c] * base[c];
                    }
                    base_term += g[r][k] * (v0[k] - lx);
                }
                off[r] = base_term;
            }
            if from.dim == to.dim {
                let d = Matrix::from_f64_rows(&lin)
                    .determinant(ScalarMode::approx_default())
                    .map(|s| s.to_f64())
                    .unwrap_or(0.0);
                if d.abs() < 1e-10 {
                    continue 'candidates;
                }
            }
            let cand = MapExpr::affine(&lin, &off);
            for x in &samples {
                let Ok(y) = cand.eval(x) else { continue 'candidates };
                if !to.model.contains(&y) {
                    continue 'candidates;
                }
                let (Ok(px), Ok(py)) = (pi.eval(x), pj.eval(&y)) else {
                    continue 'candidates;
                };
                if euclid_dist(&px, &py) > 1e-5 * (1.0 + euclid_norm(&px)) {
                    continue 'candidates;
                }
            }
            return InjectionSearch::FoundAffine {
                linear: lin,
                offset: off,
            };
        }
    }
    // Continuation fallback over the source grid.
    let germ = ChartGerm {
        from,
        to,
        newton_tol,
    };
    let res = (opts.grid / 2).clamp(16, 40);
    match grid_lift(&germ, &from.model, res, &base, &v0, opts.tol) {
        Ok(GridOutcome::Lifted(table)) => {
            let (grid_pts, h) = from.model.grid(res);
            if table.len() * 10 < grid_pts.len() * 9 {
                return InjectionSearch::NotFound {
                    reason: format!(
                        "continuation covered only {} of {} grid points",
                        table.len(),
                        grid_pts.len()
                    ),
                };
            }
            if let Some((_, y)) = table.iter().find(|(_, y)| !to.model.contains(y)) {
                return InjectionSearch::NotFound {
                    reason: format!(
                        "continued image leaves the target model at ({})",
                        format_point(y)
                    ),
                };
            }
            // An injection is a diffeomorphism upstairs; a continued table
            // that sends well-separated grid points to the same value
            // cannot come from one.
            for (a, (xa, ya)) in table.iter().enumerate() {
                for (xb, yb) in table.iter().skip(a + 1).map(|t| (&t.0, &t.1)) {
                    let close = opts.tol.max(1e-9) * 10.0 * (1.0 + euclid_norm(ya));
                    if euclid_dist(ya, yb) <= close && euclid_dist(xa, xb) > 4.0 * h {
                        return InjectionSearch::NotFound {
                            reason: "continuation is not injective upstairs".into(),
                        };
                    }
                }
            }
            InjectionSearch::FoundContinuation
        }
        Ok(GridOutcome::Defect {
            stored, continued, ..
        }) => {
            let tol = opts.tol.max(1e-9) * 1e3 * (1.0 + euclid_norm(&continued));
            let element = (0..to.group.order())
                .find(|&j| euclid_dist(&to.group.element(j).apply_f64(&stored), &continued) <= tol)
                .map(|j| to.group.element(j).clone());
            match element {
                Some(m) => InjectionSearch::Monodromy { element: m },
                None => InjectionSearch::NotFound {
                    reason: "continuation became inconsistent without a group-element witness"
                        .into(),
                },
            }
        }
        Err(_) => InjectionSearch::NotFound {
            reason: "continuation failed to start from the base point".into(),
        },
    }
}

/// Containment poset: reflexive, declared containments, whole-model
/// transitions, transitively closed.
fn containment_poset(p: &OrbifoldPresentation, opts: &ValidationOptions) -> Vec<Vec<bool>> {
    let n = p.charts.len();
    let mut le = vec![vec![false; n]; n];
    for (i, row) in le.iter_mut().enumerate() {
        row[i] = true;
    }
    for (a, b) in &p.containments {
        if let (Ok(i), Ok(j)) = (p.chart_index(a), p.chart_index(b)) {
            le[i][j] = true;
        }
    }
    for t in &p.transitions {
        if let (Ok(i), Ok(j)) = (p.chart_index(&t.from), p.chart_index(&t.to)) {
            let pts = p.charts[i].model.sample(24, opts.seed.wrapping_add(3));
            if !pts.is_empty() && pts.iter().all(|u| t.domain.contains(u)) {
                le[i][j] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if le[i][k] {
                for j in 0..n {
                    if le[k][j] {
                        le[i][j] = true;
                    }
                }
            }
        }
    }
    le
}

/// Satake defining-family validation: per-chart uniformizing checks,
/// declared injections, refinement condition (1) over declared overlaps,
/// and existence of injections (2) for declared containments.
pub fn validate_defining_family(
    p: &OrbifoldPresentation,
    opts: &ValidationOptions,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    for chart in &p.charts {
        report.merge(validate_lus(chart, p.mode, opts));
    }
    for t in &p.transitions {
        match (p.chart(&t.from), p.chart(&t.to)) {
            (Ok(from), Ok(to)) => report.merge(validate_injection(t, from, to, opts)),
            _ => report.push(
                "injection: charts exist",
                &[&t.from, &t.to],
                String::new(),
                "transition references an unknown chart".into(),
            ),
        }
    }
    let le = containment_poset(p, opts);
    // Condition (1): overlaps declared through transitions admit a
    // refinement chart inside both images.
    for t in &p.transitions {
        let (Ok(i), Ok(j)) = (p.chart_index(&t.from), p.chart_index(&t.to)) else {
            continue;
        };
        let pts = t.domain.sample(16, opts.seed.wrapping_add(5));
        for u in &pts {
            if !p.charts[i].model.contains(u) {
                continue;
            }
            let mut covered = false;
            for k in 0..p.charts.len() {
                if !(le[k][i] && le[k][j]) {
                    continue;
                }
                if k == i || k == j {
                    covered = true;
                    break;
                }
                if identify(p, i, u, k, opts).is_some() {
                    covered = true;
                    break;
                }
            }
            if !covered {
                report.push(
                    "condition (1)",
                    &[&p.charts[i].id, &p.charts[j].id],
                    format_point(u),
                    "no chart image refines the sampled overlap point".into(),
                );
                break;
            }
        }
    }
    // Condition (2): every declared containment needs an injection.
    for (a, b) in &p.containments {
        let (Ok(i), Ok(j)) = (p.chart_index(a), p.chart_index(b)) else {
            report.push(
                "condition (2)",
                &[a, b],
                String::new(),
                "containment references an unknown chart".into(),
            );
            continue;
        };
        if i == j {
            continue;
        }
        // A declared whole-model transition already realizes it.
        let has_declared = p.transitions.iter().any(|t| {
            t.from == *a && t.to == *b && {
                let pts = p.charts[i].model.sample(16, opts.seed.wrapping_add(7));
                pts.iter().all(|u| t.domain.contains(u))
            }
        });
        if has_declared {
            continue;
        }
        match injection_search(p, i, j, opts) {
            InjectionSearch::FoundAffine { .. } | InjectionSearch::FoundContinuation => {}
            InjectionSearch::Monodromy { element } => {
                report.push(
                    "condition (2)",
                    &[a, b],
                    render_element(&element),
                    format!("no injection (monodromy {})", render_element(&element)),
                );
            }
            InjectionSearch::NotFound { reason } => {
                report.push(
                    "condition (2)",
                    &[a, b],
                    String::new(),
                    format!("no injection found in search class ({reason})"),
                );
            }
        }
    }
    report.sort();
    report
}

/// Extra probe points on the singular locus of a chart: the origin plus a
/// point of each element's fixed subspace, when they lie in the model.
fn singular_probes(chart: &Chart) -> Vec<Vec<f64>> {
    let mut probes = Vec::new();
    let origin = vec![0.0; chart.dim];
    if chart.model.contains(&origin) {
        probes.push(origin);
    }
    for i in 1..chart.group.order() {
        if let Ok(sub) = chart.group.element(i).fixed_subspace(chart.group.mode()) {
            for basis_vec in sub.basis.iter().map(|v| v.to_f64()) {
                let norm = euclid_norm(&basis_vec);
                if norm < 1e-12 {
                    continue;
                }
                for scale in [0.3, 0.7] {
                    let pt: Vec<f64> = basis_vec
                        .iter()
                        .map(|v| v / norm * scale * chart.model.diameter_hint() * 0.25)
                        .collect();
                    if chart.model.contains(&pt)
                        && !probes.iter().any(|q| euclid_dist(q, &pt) < 1e-9)
                    {
                        probes.push(pt);
                    }
                }
            }
        }
    }
    probes
}

/// Germ compatibility between two charts at sampled identified points:
/// structure-group orders must match and a local germ must exist around
/// every identified pair.
pub fn haefliger_compatible(
    p: &OrbifoldPresentation,
    id_i: &str,
    id_j: &str,
    opts: &ValidationOptions,
) -> Result<ValidationReport> {
    let i = p.chart_index(id_i)?;
    let j = p.chart_index(id_j)?;
    let mut report = ValidationReport::default();
    let chart_i = &p.charts[i];
    let chart_j = &p.charts[j];
    let stab_tol = opts.tol.max(1e-7);
    let mut pts = chart_i.model.sample(opts.samples.min(36), opts.seed);
    pts.extend(singular_probes(chart_i));
    for u in &pts {
        let Some(v) = identify(p, i, u, j, opts) else {
            continue;
        };
        let ord_i = chart_i.group.stabilizer_indices_f64(u, stab_tol).len();
        let ord_j = chart_j.group.stabilizer_indices_f64(&v, stab_tol).len();
        if ord_i != ord_j {
            report.push(
                "germ: structure-group order",
                &[id_i, id_j],
                format_point(u),
                format!(
                    "identified point has stabilizer order {ord_i} in '{id_i}' but {ord_j} in '{id_j}'"
                ),
            );
            continue;
        }
        // A declared transition through u that lands on v (up to the target
        // chart group) is itself the germ; no numeric search needed.
        let declared_germ = p.transitions.iter().any(|t| {
            t.from == chart_i.id && t.to == chart_j.id && t.domain.contains(u) && {
                let tu = t.apply(u);
                (0..chart_j.group.order()).any(|gi| {
                    euclid_dist(&chart_j.group.element(gi).apply_f64(&tu), &v) <= stab_tol * 10.0
                })
            }
        });
        if declared_germ {
            continue;
        }
        // Local germ: the branch near v must follow u's neighborhood.
        match (&chart_i.projection, &chart_j.projection) {
            (Some(pi), Some(pj)) => {
                let delta = 0.02 * chart_i.model.diameter_hint().max(1e-6);
                let newton_tol = opts.tol.max(1e-10).min(1e-7);
                let mut failed = None;
                for k in 0..6 {
                    let mut x = u.clone();
                    let axis = k % chart_i.dim;
                    let sign = if (k / chart_i.dim) % 2 == 0 { 1.0 } else { -1.0 };
                    x[axis] += sign * delta;
                    if !chart_i.model.contains(&x) {
                        continue;
                    }
                    let Ok(target) = pi.eval(&x) else {
                        failed = Some(x);
                        break;
                    };
                    // Newton from v alone stalls when v is a branch point
                    // (singular Jacobian), so nudge the start along each
                    // axis as fallback; any convergent preimage near the
                    // identified point witnesses the germ.
                    let jdelta = 0.02 * chart_j.model.diameter_hint().max(1e-6);
                    let mut starts: Vec<Vec<f64>> = vec![v.clone()];
                    for axis in 0..chart_j.dim {
                        for sign in [1.0, -1.0] {
                            let mut s = v.clone();
                            s[axis] += sign * jdelta;
                            starts.push(s);
                        }
                    }
                    let witness = starts.iter().find_map(|s| {
                        pj.newton_preimage(&target, s, newton_tol)
                            .filter(|w| {
                                euclid_dist(w, &v) <= 0.5 * chart_j.model.diameter_hint()
                            })
                    });
                    if witness.is_none() {
                        failed = Some(x);
                        break;
                    }
                }
                if let Some(x) = failed {
                    report.push(
                        "germ: local existence",
                        &[id_i, id_j],
                        format_point(u),
                        format!(
                            "no local germ matches the chart identification near ({})",
                            format_point(&x)
                        ),
                    );
                }
            }
            _ => {
                // Identification came from declared transitions; those are
                // themselves smooth affine germs, nothing more to check.
            }
        }
    }
    report.sort();
    Ok(report)
}

/// Equivalence of two presentations of the same underlying space: their
/// union must be germ-compatible across every identified chart pair.
pub fn atlases_equivalent(
    p: &OrbifoldPresentation,
    q: &OrbifoldPresentation,
    cross: &[(ChartId, ChartId)],
    opts: &ValidationOptions,
) -> Result<bool> {
    for chart in &p.charts {
        let related = chart.projection.is_some()
            || cross.iter().any(|(a, b)| *a == chart.id || *b == chart.id);
        if !related {
            return Err(Error::IdentificationIncomplete {
                chart: chart.id.clone(),
            });
        }
    }
    for chart in &q.charts {
        let related = chart.projection.is_some()
            || cross.iter().any(|(a, b)| *a == chart.id || *b == chart.id);
        if !related {
            return Err(Error::IdentificationIncomplete {
                chart: chart.id.clone(),
            });
        }
    }
    let mut charts = p.charts.clone();
    for c in &q.charts {
        if charts.iter().any(|d| d.id == c.id) {
            return Err(Error::Evaluation(format!(
                "chart id '{}' appears in both presentations",
                c.id
            )));
        }
        charts.push(c.clone());
    }
    let union = OrbifoldPresentation {
        charts,
        transitions: p
            .transitions
            .iter()
            .chain(&q.transitions)
            .cloned()
            .collect(),
        containments: p
            .containments
            .iter()
            .chain(&q.containments)
            .cloned()
            .collect(),
        mode: p.mode,
    };
    let pairs: Vec<(ChartId, ChartId)> = if cross.is_empty() {
        p.charts
            .iter()
            .flat_map(|a| q.charts.iter().map(move |b| (a.id.clone(), b.id.clone())))
            .collect()
    } else {
        cross.to_vec()
    };
    for (a, b) in &pairs {
        if !haefliger_compatible(&union, a, b, opts)?.ok() {
            return Ok(false);
        }
        if !haefliger_compatible(&union, b, a, opts)?.ok() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Component membership with one grid cell of slack: flood-filled cell
/// lists under-approximate near the boundary, which would otherwise drop
/// genuine setwise-stabilizer elements whose images land in an unflooded
/// boundary cell.
fn component_contains_tolerant(comp: &Region, x: &[f64]) -> bool {
    let Region::Component {
        base,
        cells,
        cell_size,
        ..
    } = comp
    else {
        return comp.contains(x);
    };
    if !base.contains(x) {
        return false;
    }
    let cell: Vec<i64> = x.iter().map(|&v| (v / cell_size).floor() as i64).collect();
    if cells.binary_search(&cell).is_ok() {
        return true;
    }
    let dim = cell.len();
    let mut offsets = vec![-1i64; dim];
    loop {
        let neighbor: Vec<i64> = cell.iter().zip(&offsets).map(|(c, o)| c + o).collect();
        if cells.binary_search(&neighbor).is_ok() {
            return true;
        }
        let mut i = 0;
        loop {
            if i == dim {
                return false;
            }
            offsets[i] += 1;
            if offsets[i] > 1 {
                offsets[i] = -1;
                i += 1;
            } else {
                break;
            }
        }
    }
}

/// Restrict a presentation to open selections per chart: each sampled
/// component of `model ∩ Y` becomes a chart with the component-preserving
/// subgroup; transitions are cut down to the components they still join.
/// Declared containments survive only between charts that stay in one
/// piece.
pub fn restrict_family(
    p: &OrbifoldPresentation,
    selections: &[(ChartId, Region)],
    opts: &ValidationOptions,
) -> Result<OrbifoldPresentation> {
    struct Piece {
        old: ChartId,
        new: ChartId,
        region: Region,
    }
    let mut pieces: Vec<Piece> = Vec::new();
    let mut charts: Vec<Chart> = Vec::new();
    let res = opts.grid.clamp(24, 48);
    for (id, y) in selections {
        let chart = p.chart(id)?;
        let inter = Region::Intersection(vec![chart.model.clone(), y.clone()]);
        let comps = match Region::components(&inter, res) {
            Ok(c) => c,
            Err(_) => continue, // selection misses this chart entirely
        };
        for (k, comp) in comps.into_iter().enumerate() {
            let anchor = match &comp {
                Region::Component { anchor, .. } => anchor.clone(),
                _ => unreachable!("components() returns Component regions"),
            };
            // Setwise stabilizer of the piece, sampled: an element survives
            // only if it keeps every probe inside the component (with one
            // grid cell of slack against flood discretization).
            let mut probes = comp.sample(16, opts.seed.wrapping_add(13));
            probes.push(anchor);
            let keep: Vec<usize> = (0..chart.group.order())
                .filter(|&gi| {
                    probes.iter().all(|x| {
                        component_contains_tolerant(
                            &comp,
                            &chart.group.element(gi).apply_f64(x),
                        )
                    })
                })
                .collect();
            let subgroup = chart.group.subgroup_from_indices(&keep)?;
            let new_id = format!("{id}#{k}");
            let mut new_chart = Chart::new(&new_id, comp.clone(), subgroup);
            if let Some(proj) = &chart.projection {
                new_chart = new_chart.with_projection(proj.clone());
            }
            pieces.push(Piece {
                old: id.clone(),
                new: new_id,
                region: comp,
            });
            charts.push(new_chart);
        }
    }
    if charts.is_empty() {
        return Err(Error::EmptyRestriction {
            chart: "every chart".into(),
        });
    }
    let mut transitions = Vec::new();
    for t in &p.transitions {
        for from_piece in pieces.iter().filter(|pc| pc.old == t.from) {
            for to_piece in pieces.iter().filter(|pc| pc.old == t.to) {
                let dom = Region::Intersection(vec![
                    t.domain.clone(),
                    from_piece.region.clone(),
                ]);
                let pts = dom.sample(12, opts.seed.wrapping_add(11));
                if pts.is_empty() {
                    continue;
                }
                if pts.iter().all(|u| to_piece.region.contains(&t.apply(u))) {
                    transitions.push(Transition {
                        from: from_piece.new.clone(),
                        to: to_piece.new.clone(),
                        domain: dom,
                        linear: t.linear.clone(),
                        offset: t.offset.clone(),
                    });
                }
            }
        }
    }
    let mut containments = Vec::new();
    for (a, b) in &p.containments {
        let a_pieces: Vec<&Piece> = pieces.iter().filter(|pc| pc.old == *a).collect();
        let b_pieces: Vec<&Piece> = pieces.iter().filter(|pc| pc.old == *b).collect();
        if a_pieces.len() == 1 && b_pieces.len() == 1 {
            containments.push((a_pieces[0].new.clone(), b_pieces[0].new.clone()));
        }
    }
    Ok(OrbifoldPresentation {
        charts,
        transitions,
        containments,
        mode: p.mode,
    })
}

/// Stabilizer of a point inside one chart; canonical only up to conjugacy.
pub fn structure_group_at(
    p: &OrbifoldPresentation,
    id: &str,
    u: &[f64],
) -> Result<FiniteMatrixGroup> {
    let chart = p.chart(id)?;
    if !chart.model.contains(u) {
        return Err(Error::OutOfChart {
            chart: id.to_string(),
        });
    }
    let tol = match chart.group.mode() {
        ScalarMode::Exact => 1e-9,
        ScalarMode::Approx { tolerance } => tolerance.max(1e-9),
    };
    let idxs = chart.group.stabilizer_indices_f64(u, tol);
    chart.group.subgroup_from_indices(&idxs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::BallNorm;
    use crate::fixtures;

    fn ball(center: &[f64], radius: f64) -> Region {
        Region::Ball {
            center: center.to_vec(),
            radius,
            norm: BallNorm::Euclid,
        }
    }

    fn rot90_exact() -> Matrix {
        Matrix::from_int_rows(&[&[0, -1], &[1, 0]], ScalarMode::Exact)
    }

    fn zero2() -> crate::linalg::Vector {
        crate::linalg::Vector::from_ints(&[0, 0], ScalarMode::Exact)
    }

    #[test]
    fn lus_flags_reflections_only_in_satake_mode() {
        let opts = ValidationOptions::default();
        let plain = Chart::new("plain", ball(&[0.0, 0.0], 1.0), fixtures::trivial_group(2));
        assert!(validate_lus(&plain, Mode::Satake, &opts).ok());

        let dihedral = Chart::new("dih", ball(&[0.0, 0.0], 1.0), fixtures::dihedral4());
        let satake = validate_lus(&dihedral, Mode::Satake, &opts);
        assert!(!satake.ok());
        assert!(satake
            .violations
            .iter()
            .all(|v| v.condition == "lus: reflection-free"));
        assert_eq!(satake.violations.len(), 2);
        assert!(validate_lus(&dihedral, Mode::Haefliger, &opts).ok());
        assert!(validate_lus(&dihedral, Mode::Diffeological, &opts).ok());

        // -I is a rotation in the plane, not a reflection.
        let signs = Chart::new("signs", ball(&[0.0, 0.0], 1.0), fixtures::sign_flip(2));
        assert!(validate_lus(&signs, Mode::Satake, &opts).ok());
    }

    #[test]
    fn lus_flags_unstable_and_disconnected_models() {
        let opts = ValidationOptions::default();
        let offset = Chart::new("off", ball(&[0.4, 0.0], 0.5), fixtures::sign_flip(2));
        let rep = validate_lus(&offset, Mode::Satake, &opts);
        assert!(rep
            .violations
            .iter()
            .any(|v| v.condition == "lus: model group-stable"));

        let split = Chart::new(
            "split",
            Region::Union(vec![ball(&[-1.0, 0.0], 0.3), ball(&[1.0, 0.0], 0.3)]),
            fixtures::trivial_group(2),
        );
        let rep = validate_lus(&split, Mode::Satake, &opts);
        assert!(rep
            .violations
            .iter()
            .any(|v| v.condition == "lus: model connected"));
    }

    #[test]
    fn injection_accepts_rotation_between_sign_charts() {
        let opts = ValidationOptions::default();
        let from = Chart::new("a", ball(&[0.0, 0.0], 0.8), fixtures::sign_flip(2));
        let to = Chart::new("b", ball(&[0.0, 0.0], 1.0), fixtures::sign_flip(2));
        let t = Transition {
            from: "a".into(),
            to: "b".into(),
            domain: ball(&[0.0, 0.0], 0.8),
            linear: rot90_exact(),
            offset: zero2(),
        };
        assert!(validate_injection(&t, &from, &to, &opts).ok());
    }

    #[test]
    fn injection_rejects_translation_that_merges_rotation_orbits() {
        let opts = ValidationOptions::default();
        let from = Chart::new("flat", ball(&[0.0, 0.0], 0.8), fixtures::trivial_group(2));
        let to = Chart::new(
            "cone",
            ball(&[0.0, 0.0], 2.5),
            fixtures::cyclic_exact(4).unwrap(),
        );
        let t = Transition {
            from: "flat".into(),
            to: "cone".into(),
            domain: ball(&[0.0, 0.0], 0.8),
            linear: Matrix::from_int_rows(&[&[1, 0], &[0, 1]], ScalarMode::Exact),
            offset: crate::linalg::Vector::from_ints(&[1, 0], ScalarMode::Exact),
        };
        let rep = validate_injection(&t, &from, &to, &opts);
        assert!(rep
            .violations
            .iter()
            .any(|v| v.condition == "injection: quotient injectivity"));
    }

    #[test]
    fn unique_factor_recovers_the_relating_element() {
        let opts = ValidationOptions::default();
        let to = Chart::new(
            "c4",
            ball(&[0.0, 0.0], 3.0),
            fixtures::cyclic_exact(4).unwrap(),
        );
        let lambda = Transition {
            from: "x".into(),
            to: "c4".into(),
            domain: ball(&[0.0, 0.0], 0.7),
            linear: rot90_exact(),
            offset: zero2(),
        };
        let mu = Transition {
            from: "x".into(),
            to: "c4".into(),
            domain: ball(&[0.0, 0.0], 0.7),
            linear: Matrix::from_int_rows(&[&[-1, 0], &[0, -1]], ScalarMode::Exact),
            offset: zero2(),
        };
        let j = injection_unique_factor(&lambda, &mu, &to, &opts).unwrap();
        // mu = gamma . lambda with gamma the quarter turn.
        let g = to.group.element(j).to_f64_rows();
        assert!((g[0][0]).abs() < 1e-12 && (g[0][1] + 1.0).abs() < 1e-12);
        let same = injection_unique_factor(&lambda, &lambda, &to, &opts).unwrap();
        assert_eq!(same, 0);
    }

    #[test]
    fn structure_group_orders_at_cone_point_and_regular_point() {
        let p = OrbifoldPresentation {
            charts: vec![Chart::new(
                "cone",
                ball(&[0.0, 0.0], 1.0),
                fixtures::cyclic_exact(4).unwrap(),
            )],
            transitions: vec![],
            containments: vec![],
            mode: Mode::Satake,
        };
        assert_eq!(structure_group_at(&p, "cone", &[0.0, 0.0]).unwrap().order(), 4);
        assert_eq!(structure_group_at(&p, "cone", &[0.3, 0.1]).unwrap().order(), 1);
        assert!(matches!(
            structure_group_at(&p, "cone", &[5.0, 5.0]),
            Err(Error::OutOfChart { .. })
        ));
    }

    #[test]
    fn restriction_keeps_or_drops_the_group_with_the_selection() {
        let opts = ValidationOptions::default();
        let p = OrbifoldPresentation {
            charts: vec![
                Chart::new("plane", ball(&[0.0, 0.0], 1.0), fixtures::sign_flip(2))
                    .with_projection(MapExpr::identity(2)),
            ],
            transitions: vec![],
            containments: vec![],
            mode: Mode::Satake,
        };
        // Off-center selection: the antipodal copy is cut away, the group drops.
        let off = restrict_family(&p, &[("plane".into(), ball(&[0.45, 0.0], 0.3))], &opts).unwrap();
        assert_eq!(off.charts.len(), 1);
        assert_eq!(off.charts[0].id, "plane#0");
        assert_eq!(off.charts[0].group.order(), 1);
        // Centered selection: the full group survives.
        let centered =
            restrict_family(&p, &[("plane".into(), ball(&[0.0, 0.0], 0.5))], &opts).unwrap();
        assert_eq!(centered.charts.len(), 1);
        assert_eq!(centered.charts[0].group.order(), 2);
        // Selection missing the chart entirely.
        assert!(matches!(
            restrict_family(&p, &[("plane".into(), ball(&[5.0, 5.0], 0.2))], &opts),
            Err(Error::EmptyRestriction { .. })
        ));
    }

    #[test]
    fn defining_family_accepts_true_containment_and_rejects_a_false_one() {
        let opts = ValidationOptions::default();
        let chart = |id: &str, c: &[f64], r: f64| {
            Chart::new(id, ball(c, r), fixtures::trivial_group(2))
                .with_projection(MapExpr::identity(2))
        };
        let good = OrbifoldPresentation {
            charts: vec![chart("big", &[0.0, 0.0], 1.0), chart("small", &[0.2, 0.0], 0.3)],
            transitions: vec![],
            containments: vec![("small".into(), "big".into())],
            mode: Mode::Satake,
        };
        let rep = validate_defining_family(&good, &opts);
        assert!(rep.ok(), "unexpected violations: {:?}", rep.violations);

        let bad = OrbifoldPresentation {
            containments: vec![("big".into(), "small".into())],
            ..good.clone()
        };
        let rep = validate_defining_family(&bad, &opts);
        assert!(!rep.ok());
        assert!(rep.violations.iter().all(|v| v.condition == "condition (2)"));
    }

    #[test]
    fn identify_runs_through_projections_and_through_transitions() {
        let opts = ValidationOptions::default();
        // Through projections: quarter-turn charts over the same image.
        let a = Chart::new("a", ball(&[0.0, 0.0], 1.0), fixtures::trivial_group(2))
            .with_projection(MapExpr::affine(
                &[vec![0.0, -1.0], vec![1.0, 0.0]],
                &[0.0, 0.0],
            ));
        let b = Chart::new("b", ball(&[0.0, 0.0], 1.0), fixtures::trivial_group(2))
            .with_projection(MapExpr::identity(2));
        let p = OrbifoldPresentation {
            charts: vec![a, b],
            transitions: vec![],
            containments: vec![],
            mode: Mode::Satake,
        };
        let u = [0.3, 0.2];
        let v = identify(&p, 0, &u, 1, &opts).unwrap();
        assert!(euclid_dist(&v, &[-0.2, 0.3]) < 1e-6);

        // Through a declared transition, no projections.
        let c = Chart::new("c", ball(&[0.0, 0.0], 1.0), fixtures::trivial_group(2));
        let d = Chart::new("d", ball(&[0.0, 0.0], 1.0), fixtures::trivial_group(2));
        let q = OrbifoldPresentation {
            charts: vec![c, d],
            transitions: vec![Transition {
                from: "c".into(),
                to: "d".into(),
                domain: ball(&[0.0, 0.0], 1.0),
                linear: rot90_exact(),
                offset: zero2(),
            }],
            containments: vec![],
            mode: Mode::Satake,
        };
        let w = identify(&q, 0, &u, 1, &opts).unwrap();
        assert!(euclid_dist(&w, &[-0.2, 0.3]) < 1e-9);
    }

    #[test]
    fn render_element_names_the_standard_matrices() {
        assert_eq!(
            render_element(&Matrix::from_int_rows(&[&[1, 0], &[0, 1]], ScalarMode::Exact)),
            "I"
        );
        assert_eq!(
            render_element(&Matrix::from_int_rows(&[&[-1, 0], &[0, -1]], ScalarMode::Exact)),
            "-I"
        );
        let r = render_element(&rot90_exact());
        assert!(r.starts_with("2x2:"), "{r}");
    }
}
