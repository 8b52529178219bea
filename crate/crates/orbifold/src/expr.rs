//! Closed-form smooth maps and sampling regions.
//!
//! Maps are expression trees over a small primitive set (arithmetic, sqrt,
//! exp, sin/cos, the Euclidean radius, flat bump factors, and guarded
//! piecewise branches). Everything evaluates over f64; exactness lives in
//! the group layer, not in map evaluation.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{euclid_norm, Matrix, Vector};

/// Scalar-valued expression in `dim` input coordinates.
#[derive(Debug, Clone)]
pub enum Expr {
    Const(f64),
    Coord(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Sqrt(Box<Expr>),
    Exp(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    /// Euclidean norm of the full input point.
    Radial,
    /// Flat bump supported on `(1/(n+1), 1/n)`, rescaled to peak at 1.
    Bump { n: u32, arg: Box<Expr> },
    /// First branch whose condition holds; conditions are evaluated lazily
    /// so untaken branches may be singular.
    Piecewise {
        branches: Vec<(Cond, Expr)>,
        otherwise: Box<Expr>,
    },
}

#[derive(Debug, Clone)]
pub struct Cond {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Coord(i) => {
                if *i >= x.len() {
                    return Err(Error::Evaluation(format!(
                        "coordinate {i} out of range for dimension {}",
                        x.len()
                    )));
                }
                x[*i]
            }
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let den = b.eval(x)?;
                if den.abs() < 1e-300 {
                    return Err(Error::Evaluation("division by zero".into()));
                }
                a.eval(x)? / den
            }
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Sqrt(a) => {
                let v = a.eval(x)?;
                if v < -1e-9 {
                    return Err(Error::Evaluation(format!("sqrt of negative value {v}")));
                }
                v.max(0.0).sqrt()
            }
            Expr::Exp(a) => a.eval(x)?.exp(),
            Expr::Sin(a) => a.eval(x)?.sin(),
            Expr::Cos(a) => a.eval(x)?.cos(),
            Expr::Radial => euclid_norm(x),
            Expr::Bump { n, arg } => bump(*n, arg.eval(x)?),
            Expr::Piecewise {
                branches,
                otherwise,
            } => {
                for (cond, expr) in branches {
                    if cond.holds(x)? {
                        return expr.eval(x);
                    }
                }
                otherwise.eval(x)?
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation("non-finite value".into()))
        }
    }

    /// Replace `Coord(i)` with `subs[i]` throughout.
    pub(crate) fn substitute(&self, subs: &[Expr]) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Coord(i) => subs[*i].clone(),
            Expr::Add(a, b) => Expr::Add(
                Box::new(a.substitute(subs)),
                Box::new(b.substitute(subs)),
            ),
            Expr::Sub(a, b) => Expr::Sub(
                Box::new(a.substitute(subs)),
                Box::new(b.substitute(subs)),
            ),
            Expr::Mul(a, b) => Expr::Mul(
                Box::new(a.substitute(subs)),
                Box::new(b.substitute(subs)),
            ),
            Expr::Div(a, b) => Expr::Div(
                Box::new(a.substitute(subs)),
                Box::new(b.substitute(subs)),
            ),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(subs))),
            Expr::Sqrt(a) => Expr::Sqrt(Box::new(a.substitute(subs))),
            Expr::Exp(a) => Expr::Exp(Box::new(a.substitute(subs))),
            Expr::Sin(a) => Expr::Sin(Box::new(a.substitute(subs))),
            Expr::Cos(a) => Expr::Cos(Box::new(a.substitute(subs))),
            Expr::Radial => {
                // |x| has no closed substitution form; expand as sqrt(sum of squares).
                let mut acc = Expr::Const(0.0);
                for s in subs {
                    acc = Expr::Add(
                        Box::new(acc),
                        Box::new(Expr::Mul(Box::new(s.clone()), Box::new(s.clone()))),
                    );
                }
                Expr::Sqrt(Box::new(acc))
            }
            Expr::Bump { n, arg } => Expr::Bump {
                n: *n,
                arg: Box::new(arg.substitute(subs)),
            },
            Expr::Piecewise {
                branches,
                otherwise,
            } => Expr::Piecewise {
                branches: branches
                    .iter()
                    .map(|(c, e)| {
                        (
                            Cond {
                                lhs: c.lhs.substitute(subs),
                                op: c.op,
                                rhs: c.rhs,
                            },
                            e.substitute(subs),
                        )
                    })
                    .collect(),
                otherwise: Box::new(otherwise.substitute(subs)),
            },
        }
    }
}

impl Cond {
    fn holds(&self, x: &[f64]) -> Result<bool> {
        let v = self.lhs.eval(x)?;
        Ok(match self.op {
            CmpOp::Gt => v > self.rhs,
            CmpOp::Ge => v >= self.rhs,
            CmpOp::Lt => v < self.rhs,
            CmpOp::Le => v <= self.rhs,
            CmpOp::Eq => v == self.rhs,
        })
    }
}

/// Support interval of the n-th bump: `(1/(n+1), 1/n)`.
pub fn bump_support(n: u32) -> (f64, f64) {
    (1.0 / (n as f64 + 1.0), 1.0 / n as f64)
}

/// Flat bump on `(1/(n+1), 1/n)`: zero outside with all derivatives, 1 at
/// the midpoint. `exp(4/(b-a)^2 - 1/((t-a)(b-t)))` inside the support.
pub fn bump(n: u32, t: f64) -> f64 {
    let (a, b) = bump_support(n);
    if t <= a || t >= b {
        return 0.0;
    }
    let w = (t - a) * (b - t);
    let peak = 4.0 / ((b - a) * (b - a));
    (peak - 1.0 / w).exp()
}

/// Map between model spaces, componentwise expressions.
#[derive(Debug, Clone)]
pub struct MapExpr {
    pub in_dim: usize,
    pub out_dim: usize,
    pub components: Vec<Expr>,
}

impl MapExpr {
    pub fn new(in_dim: usize, components: Vec<Expr>) -> Self {
        let out_dim = components.len();
        MapExpr {
            in_dim,
            out_dim,
            components,
        }
    }

    pub fn identity(dim: usize) -> Self {
        MapExpr::new(dim, (0..dim).map(Expr::Coord).collect())
    }

    /// `x -> A x + b` from float rows.
    pub fn affine(a: &[Vec<f64>], b: &[f64]) -> Self {
        let out_dim = a.len();
        assert_eq!(out_dim, b.len());
        let in_dim = a.first().map_or(0, |r| r.len());
        let components = (0..out_dim)
            .map(|i| {
                let mut acc = Expr::Const(b[i]);
                for (j, &coef) in a[i].iter().enumerate() {
                    if coef != 0.0 {
                        acc = Expr::Add(
                            Box::new(acc),
                            Box::new(Expr::Mul(
                                Box::new(Expr::Const(coef)),
                                Box::new(Expr::Coord(j)),
                            )),
                        );
                    }
                }
                acc
            })
            .collect();
        MapExpr::new(in_dim, components)
    }

    pub fn from_matrix(m: &Matrix, offset: &Vector) -> Self {
        MapExpr::affine(&m.to_f64_rows(), &offset.to_f64())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::DimMismatch {
                expected: self.in_dim,
                got: x.len(),
            });
        }
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &MapExpr) -> MapExpr {
        assert_eq!(self.in_dim, inner.out_dim, "composition dims");
        MapExpr::new(
            inner.in_dim,
            self.components
                .iter()
                .map(|c| c.substitute(&inner.components))
                .collect(),
        )
    }

    pub fn jacobian(&self, u: &[f64], step: f64) -> Result<Vec<Vec<f64>>> {
        crate::linalg::jacobian_fd(|x| self.eval(x), u, step)
    }

    /// Damped Gauss-Newton solve of `self(v) = target` from `start`,
    /// staying on the branch nearest the start. `None` when the iteration
    /// fails to reach the tolerance.
    pub fn newton_preimage(&self, target: &[f64], start: &[f64], tol: f64) -> Option<Vec<f64>> {
        if target.len() != self.out_dim || start.len() != self.in_dim {
            return None;
        }
        let residual = |v: &[f64]| -> Option<Vec<f64>> {
            let y = self.eval(v).ok()?;
            Some(y.iter().zip(target).map(|(a, b)| a - b).collect())
        };
        let mut v = start.to_vec();
        let mut r = residual(&v)?;
        for _ in 0..40 {
            let rn = euclid_norm(&r);
            if rn <= tol {
                return Some(v);
            }
            let j = self.jacobian(&v, 1e-6).ok()?;
            let n = self.in_dim;
            // Normal equations J^T J d = -J^T r (tiny ridge for flat spots).
            let mut jtj = vec![vec![0.0; n]; n];
            let mut jtr = vec![0.0; n];
            for (row, ri) in j.iter().zip(&r) {
                for a in 0..n {
                    for b in 0..n {
                        jtj[a][b] += row[a] * row[b];
                    }
                    jtr[a] -= row[a] * ri;
                }
            }
            for (a, row) in jtj.iter_mut().enumerate() {
                row[a] += 1e-14;
            }
            let delta = crate::linalg::solve_f64(&jtj, &jtr)?;
            let mut step = 1.0f64;
            loop {
                let cand: Vec<f64> = v.iter().zip(&delta).map(|(x, d)| x + step * d).collect();
                match residual(&cand) {
                    Some(rc) if euclid_norm(&rc) < rn => {
                        v = cand;
                        r = rc;
                        break;
                    }
                    _ if step < 1.0 / 256.0 => return None,
                    _ => step *= 0.5,
                }
            }
        }
        if euclid_norm(&r) <= tol {
            Some(v)
        } else {
            None
        }
    }
}

/// Norm used by ball regions.
#[derive(Debug, Clone)]
pub enum BallNorm {
    Euclid,
    /// `|x|^2 = x^T G x` for a symmetric positive-definite `G`.
    Gram(Vec<Vec<f64>>),
}

impl BallNorm {
    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        match self {
            BallNorm::Euclid => euclid_norm(&d),
            BallNorm::Gram(g) => {
                let mut q = 0.0;
                for (i, row) in g.iter().enumerate() {
                    for (j, &gij) in row.iter().enumerate() {
                        q += d[i] * gij * d[j];
                    }
                }
                q.max(0.0).sqrt()
            }
        }
    }

    /// Scale factor bounding the Euclidean radius of a unit ball in this norm.
    fn euclid_radius_bound(&self, dim: usize) -> f64 {
        match self {
            BallNorm::Euclid => 1.0,
            BallNorm::Gram(g) => {
                // |x|_G >= |x| * sqrt(lambda_min); cheap bound via diagonal.
                let min_diag = (0..dim)
                    .map(|i| g[i][i])
                    .fold(f64::INFINITY, f64::min)
                    .max(1e-12);
                // Conservative: also account for off-diagonal mass.
                let max_row: f64 = g
                    .iter()
                    .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                    .fold(0.0, f64::max);
                (1.0 / min_diag).sqrt().max((dim as f64) / max_row.max(1e-12)).max(1.0)
                    * (1.0 + max_row / min_diag)
            }
        }
    }
}

/// Open subset of a model space, closed under finite unions and
/// intersections. Connectivity and component selection are decided on a
/// sampled grid.
#[derive(Debug, Clone)]
pub enum Region {
    /// All of R^dim. Sampling and grids use the box `[-extent, extent]^dim`.
    FullSpace { dim: usize, extent: f64 },
    Ball {
        center: Vec<f64>,
        radius: f64,
        norm: BallNorm,
    },
    /// `r1 < |x| < r2` around the origin (Euclidean).
    Annulus { dim: usize, r1: f64, r2: f64 },
    /// `normal . x > offset`, clipped to `[-extent, extent]^dim` for sampling.
    HalfSpace {
        normal: Vec<f64>,
        offset: f64,
        extent: f64,
    },
    Union(Vec<Region>),
    Intersection(Vec<Region>),
    /// Points of `base` whose grid cell is flood-reachable from `anchor`.
    Component {
        base: Box<Region>,
        anchor: Vec<f64>,
        cells: Vec<Vec<i64>>,
        cell_size: f64,
    },
    /// Points whose image under `map` lies in `inner`; evaluation failures
    /// count as outside. Bounded by `[-extent, extent]^in_dim` for
    /// sampling, so it is normally intersected with a bounded region.
    Preimage {
        map: Box<MapExpr>,
        inner: Box<Region>,
        extent: f64,
    },
}

impl Region {
    pub const DEFAULT_EXTENT: f64 = 2.0;

    pub fn full(dim: usize) -> Region {
        Region::FullSpace {
            dim,
            extent: Self::DEFAULT_EXTENT,
        }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Region {
        Region::Ball {
            center,
            radius,
            norm: BallNorm::Euclid,
        }
    }

    pub fn annulus(r1: f64, r2: f64) -> Region {
        Region::Annulus { dim: 2, r1, r2 }
    }

    pub fn preimage(map: MapExpr, inner: Region) -> Region {
        Region::Preimage {
            map: Box::new(map),
            inner: Box::new(inner),
            extent: Self::DEFAULT_EXTENT,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::FullSpace { dim, .. } => *dim,
            Region::Ball { center, .. } => center.len(),
            Region::Annulus { dim, .. } => *dim,
            Region::HalfSpace { normal, .. } => normal.len(),
            Region::Union(parts) | Region::Intersection(parts) => {
                parts.first().map_or(0, Region::dim)
            }
            Region::Component { base, .. } => base.dim(),
            Region::Preimage { map, .. } => map.in_dim,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::FullSpace { dim, .. } => x.len() == *dim,
            Region::Ball {
                center,
                radius,
                norm,
            } => x.len() == center.len() && norm.dist(x, center) < *radius,
            Region::Annulus { dim, r1, r2 } => {
                if x.len() != *dim {
                    return false;
                }
                let r = euclid_norm(x);
                *r1 < r && r < *r2
            }
            Region::HalfSpace { normal, offset, .. } => {
                x.len() == normal.len()
                    && x.iter().zip(normal).map(|(a, b)| a * b).sum::<f64>() > *offset
            }
            Region::Union(parts) => parts.iter().any(|p| p.contains(x)),
            Region::Intersection(parts) => parts.iter().all(|p| p.contains(x)),
            Region::Component {
                base,
                cells,
                cell_size,
                ..
            } => {
                base.contains(x) && {
                    let cell: Vec<i64> =
                        x.iter().map(|&v| (v / cell_size).floor() as i64).collect();
                    cells.binary_search(&cell).is_ok()
                }
            }
            Region::Preimage { map, inner, .. } => {
                x.len() == map.in_dim
                    && map.eval(x).map(|y| inner.contains(&y)).unwrap_or(false)
            }
        }
    }

    /// Axis-aligned bounding box `(lo, hi)` used for grids and sampling.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::FullSpace { dim, extent } => {
                (vec![-extent; *dim], vec![*extent; *dim])
            }
            Region::Ball {
                center,
                radius,
                norm,
            } => {
                let r = radius * norm.euclid_radius_bound(center.len());
                (
                    center.iter().map(|c| c - r).collect(),
                    center.iter().map(|c| c + r).collect(),
                )
            }
            Region::Annulus { dim, r2, .. } => (vec![-r2; *dim], vec![*r2; *dim]),
            Region::HalfSpace { normal, extent, .. } => {
                (vec![-extent; normal.len()], vec![*extent; normal.len()])
            }
            Region::Union(parts) => {
                let boxes: Vec<_> = parts.iter().map(Region::bounding_box).collect();
                let dim = self.dim();
                let lo = (0..dim)
                    .map(|i| boxes.iter().map(|(l, _)| l[i]).fold(f64::INFINITY, f64::min))
                    .collect();
                let hi = (0..dim)
                    .map(|i| {
                        boxes
                            .iter()
                            .map(|(_, h)| h[i])
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect();
                (lo, hi)
            }
            Region::Intersection(parts) => {
                let boxes: Vec<_> = parts.iter().map(Region::bounding_box).collect();
                let dim = self.dim();
                let lo = (0..dim)
                    .map(|i| {
                        boxes
                            .iter()
                            .map(|(l, _)| l[i])
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect();
                let hi = (0..dim)
                    .map(|i| boxes.iter().map(|(_, h)| h[i]).fold(f64::INFINITY, f64::min))
                    .collect();
                (lo, hi)
            }
            Region::Component { base, .. } => base.bounding_box(),
            Region::Preimage { map, extent, .. } => {
                (vec![-extent; map.in_dim], vec![*extent; map.in_dim])
            }
        }
    }

    /// Longest edge of the bounding box.
    pub fn diameter_hint(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| h - l)
            .fold(0.0, f64::max)
    }

    /// Deterministic rejection sampling from the bounding box.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, count)
    }

    pub fn sample_with(&self, rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.bounding_box();
        let dim = self.dim();
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0usize;
        let budget = count.max(1) * 10_000;
        while out.len() < count && attempts < budget {
            attempts += 1;
            let x: Vec<f64> = (0..dim).map(|i| rng.gen_range(lo[i]..hi[i])).collect();
            if self.contains(&x) {
                out.push(x);
            }
        }
        out
    }

    /// Grid points of the bounding box lying in the region; `resolution`
    /// cells along the longest edge.
    pub fn grid(&self, resolution: usize) -> (Vec<Vec<f64>>, f64) {
        let (lo, hi) = self.bounding_box();
        let dim = self.dim();
        let h = self.diameter_hint() / resolution as f64;
        if h <= 0.0 || dim == 0 {
            return (Vec::new(), 0.0);
        }
        let counts: Vec<usize> = (0..dim)
            .map(|i| (((hi[i] - lo[i]) / h).ceil() as usize).max(1))
            .collect();
        let mut pts = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            let p: Vec<f64> = (0..dim)
                .map(|i| lo[i] + (idx[i] as f64 + 0.5) * h)
                .collect();
            if self.contains(&p) {
                pts.push(p);
            }
            let mut k = 0;
            loop {
                if k == dim {
                    return (pts, h);
                }
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    /// Sampled connectivity: one flood-fill component covers every grid point.
    pub fn is_connected_sampled(&self, resolution: usize) -> bool {
        let (pts, h) = self.grid(resolution);
        if pts.len() <= 1 {
            return true;
        }
        let comp = flood_components(&pts, h * 1.6);
        comp.iter().all(|&c| c == comp[0])
    }

    /// Component of `base` containing `anchor`, materialized on a grid.
    pub fn component_containing(
        base: Region,
        anchor: &[f64],
        resolution: usize,
    ) -> Result<Region> {
        if !base.contains(anchor) {
            return Err(Error::Evaluation(
                "component anchor lies outside the base region".into(),
            ));
        }
        let (pts, h) = base.grid(resolution);
        if pts.is_empty() {
            return Err(Error::Evaluation("region grid is empty".into()));
        }
        let comps = flood_components(&pts, h * 1.6);
        // Anchor joins the component of the nearest grid point.
        let nearest = (0..pts.len())
            .min_by(|&i, &j| {
                crate::linalg::euclid_dist(&pts[i], anchor)
                    .partial_cmp(&crate::linalg::euclid_dist(&pts[j], anchor))
                    .unwrap()
            })
            .unwrap();
        let target = comps[nearest];
        let mut cells: Vec<Vec<i64>> = pts
            .iter()
            .zip(&comps)
            .filter(|(_, &c)| c == target)
            .map(|(p, _)| p.iter().map(|&v| (v / h).floor() as i64).collect())
            .collect();
        cells.sort();
        cells.dedup();
        Ok(Region::Component {
            base: Box::new(base),
            anchor: anchor.to_vec(),
            cells,
            cell_size: h,
        })
    }

    /// All sampled-grid components of a region, anchored at a grid point
    /// each, in first-appearance order.
    pub fn components(base: &Region, resolution: usize) -> Result<Vec<Region>> {
        let (pts, h) = base.grid(resolution);
        if pts.is_empty() {
            return Err(Error::Evaluation("region grid is empty".into()));
        }
        let labels = flood_components(&pts, h * 1.6);
        let mut seen: Vec<usize> = Vec::new();
        let mut out = Vec::new();
        for (idx, &label) in labels.iter().enumerate() {
            if seen.contains(&label) {
                continue;
            }
            seen.push(label);
            let mut cells: Vec<Vec<i64>> = pts
                .iter()
                .zip(&labels)
                .filter(|(_, &c)| c == label)
                .map(|(p, _)| p.iter().map(|&v| (v / h).floor() as i64).collect())
                .collect();
            cells.sort();
            cells.dedup();
            out.push(Region::Component {
                base: Box::new(base.clone()),
                anchor: pts[idx].clone(),
                cells,
                cell_size: h,
            });
        }
        Ok(out)
    }
}

/// Union-find over points with adjacency within `step`.
pub fn flood_components(pts: &[Vec<f64>], step: f64) -> Vec<usize> {
    let n = pts.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        let mut i = i;
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if crate::linalg::euclid_dist(&pts[i], &pts[j]) <= step {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_is_zero_outside_support_and_one_at_midpoint() {
        for n in 1..=6u32 {
            let (a, b) = bump_support(n);
            assert_eq!(bump(n, a), 0.0);
            assert_eq!(bump(n, b), 0.0);
            assert_eq!(bump(n, a - 0.01), 0.0);
            let mid = 0.5 * (a + b);
            assert!((bump(n, mid) - 1.0).abs() < 1e-14);
            assert!(bump(n, mid + 0.3 * (b - a)) < 1.0);
        }
        // Narrow supports underflow to zero off-center; positivity is only
        // observable for the wide first bumps.
        for n in 1..=2u32 {
            let (a, b) = bump_support(n);
            let mid = 0.5 * (a + b);
            assert!(bump(n, mid + 0.3 * (b - a)) > 0.0);
        }
    }

    #[test]
    fn bump_supports_tile_the_unit_interval() {
        let (a1, b1) = bump_support(1);
        assert_eq!((a1, b1), (0.5, 1.0));
        for n in 1..10u32 {
            let (a, _) = bump_support(n);
            let (_, b_next) = bump_support(n + 1);
            assert_eq!(a, b_next);
        }
    }

    #[test]
    fn piecewise_branches_evaluate_lazily() {
        // 1/x guarded behind x > 0; must not error when x <= 0.
        let e = Expr::Piecewise {
            branches: vec![(
                Cond {
                    lhs: Expr::Coord(0),
                    op: CmpOp::Gt,
                    rhs: 0.0,
                },
                Expr::Div(Box::new(Expr::Const(1.0)), Box::new(Expr::Coord(0))),
            )],
            otherwise: Box::new(Expr::Const(0.0)),
        };
        assert_eq!(e.eval(&[2.0]).unwrap(), 0.5);
        assert_eq!(e.eval(&[0.0]).unwrap(), 0.0);
        assert_eq!(e.eval(&[-3.0]).unwrap(), 0.0);
    }

    #[test]
    fn compose_substitutes_componentwise() {
        // outer(x, y) = (x + y, x * y), inner(t) = (t, 2t)
        let outer = MapExpr::new(
            2,
            vec![
                Expr::Add(Box::new(Expr::Coord(0)), Box::new(Expr::Coord(1))),
                Expr::Mul(Box::new(Expr::Coord(0)), Box::new(Expr::Coord(1))),
            ],
        );
        let inner = MapExpr::new(
            1,
            vec![
                Expr::Coord(0),
                Expr::Mul(Box::new(Expr::Const(2.0)), Box::new(Expr::Coord(0))),
            ],
        );
        let c = outer.compose(&inner);
        let v = c.eval(&[3.0]).unwrap();
        assert_eq!(v, vec![9.0, 18.0]);
    }

    #[test]
    fn radial_substitution_expands_to_sqrt_of_squares() {
        let norm = MapExpr::new(2, vec![Expr::Radial]);
        let double = MapExpr::affine(&[vec![2.0, 0.0], vec![0.0, 2.0]], &[0.0, 0.0]);
        let c = norm.compose(&double);
        let v = c.eval(&[3.0, 4.0]).unwrap();
        assert!((v[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn affine_map_matches_matrix_action() {
        let m = MapExpr::affine(&[vec![0.0, -1.0], vec![1.0, 0.0]], &[1.0, 2.0]);
        assert_eq!(m.eval(&[3.0, 5.0]).unwrap(), vec![-4.0, 5.0]);
    }

    #[test]
    fn annulus_region_membership_and_connectivity() {
        let a = Region::annulus(0.5, 1.0);
        assert!(a.contains(&[0.7, 0.0]));
        assert!(!a.contains(&[0.0, 0.0]));
        assert!(!a.contains(&[1.5, 0.0]));
        assert!(a.is_connected_sampled(64));
    }

    #[test]
    fn disjoint_union_is_disconnected() {
        let u = Region::Union(vec![
            Region::ball(vec![-1.0, 0.0], 0.3),
            Region::ball(vec![1.0, 0.0], 0.3),
        ]);
        assert!(!u.is_connected_sampled(64));
    }

    #[test]
    fn component_selection_keeps_only_the_anchored_part() {
        let u = Region::Union(vec![
            Region::ball(vec![-1.0, 0.0], 0.3),
            Region::ball(vec![1.0, 0.0], 0.3),
        ]);
        let c = Region::component_containing(u, &[1.0, 0.0], 64).unwrap();
        assert!(c.contains(&[1.05, 0.05]));
        assert!(!c.contains(&[-1.0, 0.0]));
    }

    #[test]
    fn sampling_is_deterministic_and_inside() {
        let a = Region::annulus(0.5, 1.0);
        let s1 = a.sample(50, 7);
        let s2 = a.sample(50, 7);
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), 50);
        assert!(s1.iter().all(|p| a.contains(p)));
        let s3 = a.sample(50, 8);
        assert_ne!(s1, s3);
    }

    #[test]
    fn gram_ball_uses_the_quadratic_form() {
        let g = BallNorm::Gram(vec![vec![4.0, 0.0], vec![0.0, 1.0]]);
        let b = Region::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
            norm: g,
        };
        assert!(b.contains(&[0.4, 0.0])); // |x|_G = 0.8
        assert!(!b.contains(&[0.6, 0.0])); // |x|_G = 1.2
        assert!(b.contains(&[0.0, 0.9]));
    }
}
