//! Linear quotients `R^n / G` for a finite matrix group `G`.
//!
//! Points of the quotient are orbits; calculations work on canonical
//! representatives (lexicographically greatest orbit point). Slice charts
//! squash the model space onto a small invariant ball around a point, small
//! enough that distinct orbit translates of the ball stay disjoint.

use crate::error::{Error, Result};
use crate::expr::{BallNorm, Expr, MapExpr, Region};
use crate::group::FiniteMatrixGroup;
use crate::linalg::{euclid_dist, Matrix, Vector};
use crate::scalar::{Scalar, ScalarMode};

pub const DEFAULT_SAFETY: f64 = 0.49;

#[derive(Debug, Clone)]
pub struct LinearQuotient {
    group: FiniteMatrixGroup,
    gram: Matrix,
}

/// An orbit, held by its canonical representative.
#[derive(Debug, Clone)]
pub struct QuotientPoint {
    pub rep: Vector,
}

/// Slice radius around a point. Finite values follow the same squared-form
/// convention as `gamma_norm`: approx mode stores the radius, exact mode
/// stores its square.
#[derive(Debug, Clone)]
pub enum Radius {
    /// Whole-group stabilizer: the slice is the entire model space.
    Infinite,
    Finite(Scalar),
}

impl Radius {
    /// Radius as a float, taking the square root in exact mode.
    pub fn value_f64(&self) -> Option<f64> {
        match self {
            Radius::Infinite => None,
            Radius::Finite(s) => Some(match s {
                Scalar::Exact(_) => s.to_f64().max(0.0).sqrt(),
                Scalar::Approx(x) => *x,
            }),
        }
    }
}

/// Equivariant chart onto an invariant ball around `center`.
#[derive(Debug, Clone)]
pub struct SliceChart {
    pub center: Vector,
    pub stabilizer: FiniteMatrixGroup,
    pub radius: Radius,
    /// Diffeomorphism from the model space onto the ball, equivariant
    /// under the stabilizer.
    pub map: MapExpr,
}

impl LinearQuotient {
    pub fn new(group: FiniteMatrixGroup) -> Self {
        let gram = group.invariant_gram();
        LinearQuotient { group, gram }
    }

    pub fn group(&self) -> &FiniteMatrixGroup {
        &self.group
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn dim(&self) -> usize {
        self.group.dim()
    }

    pub fn mode(&self) -> ScalarMode {
        self.group.mode()
    }

    /// Squared invariant distance between two model points.
    pub fn gamma_dist_sq(&self, u: &Vector, v: &Vector) -> Scalar {
        FiniteMatrixGroup::gamma_norm_sq(&self.gram, &u.sub(v))
    }

    pub fn gamma_dist_f64(&self, a: &[f64], b: &[f64]) -> f64 {
        let gram = self.gram.to_f64_rows();
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let mut q = 0.0;
        for (i, row) in gram.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                q += d[i] * g * d[j];
            }
        }
        q.max(0.0).sqrt()
    }

    pub fn same_orbit(&self, u: &Vector, v: &Vector) -> bool {
        let tol = self.mode().tolerance();
        self.group
            .elements()
            .iter()
            .any(|g| g.apply(u).eq_within(v, tol))
    }

    pub fn same_orbit_f64(&self, a: &[f64], b: &[f64], tol: f64) -> bool {
        self.group
            .elements()
            .iter()
            .any(|g| euclid_dist(&g.apply_f64(a), b) <= tol)
    }

    /// Lexicographically greatest orbit point (first coordinate most
    /// significant). In approx mode, fails with `AmbiguousCanonical` when the
    /// winning comparison is decided by a sub-tolerance difference between
    /// distinct orbit points.
    pub fn canonical_rep(&self, u: &Vector) -> Result<Vector> {
        let orbit = self.group.orbit(u);
        let winner = orbit
            .iter()
            .max_by(|a, b| lex_cmp(a, b))
            .expect("orbit is nonempty")
            .clone();
        if let ScalarMode::Approx { tolerance } = self.mode() {
            for other in &orbit {
                if let Some(i) = first_raw_difference(&winner, other) {
                    let gap = (winner.entries[i].to_f64() - other.entries[i].to_f64()).abs();
                    if gap <= tolerance {
                        return Err(Error::AmbiguousCanonical { tolerance });
                    }
                }
            }
        }
        Ok(winner)
    }

    pub fn quotient_point(&self, u: &Vector) -> Result<QuotientPoint> {
        Ok(QuotientPoint {
            rep: self.canonical_rep(u)?,
        })
    }

    /// Canonical representative over f64 data: raw lexicographic maximum of
    /// the orbit.
    pub fn canonical_rep_f64(&self, x: &[f64]) -> Vec<f64> {
        self.group
            .orbit_f64(x)
            .into_iter()
            .max_by(|a, b| a.partial_cmp(b).expect("NaN in orbit point"))
            .expect("orbit is nonempty")
    }

    /// Largest safe slice radius at `u`: `safety * min |gamma u - u|` over
    /// group elements moving `u`, in the invariant norm. `Infinite` when the
    /// stabilizer is the whole group. Exact mode returns the squared form.
    pub fn slice_radius(&self, u: &Vector, safety: f64) -> Result<Radius> {
        assert!(
            safety > 0.0 && safety < 0.5,
            "safety factor must lie in (0, 1/2)"
        );
        let stab = self.group.stabilizer_indices(u);
        if stab.len() == self.group.order() {
            return Ok(Radius::Infinite);
        }
        let mut min_sq: Option<Scalar> = None;
        for i in 0..self.group.order() {
            if stab.contains(&i) {
                continue;
            }
            let gu = self.group.element(i).apply(u);
            let d = FiniteMatrixGroup::gamma_norm_sq(&self.gram, &gu.sub(u));
            min_sq = Some(match min_sq {
                None => d,
                Some(m) => {
                    if d.raw_cmp(&m) == std::cmp::Ordering::Less {
                        d
                    } else {
                        m
                    }
                }
            });
        }
        let min_sq = min_sq.expect("some element moves u");
        match self.mode() {
            ScalarMode::Exact => {
                let s = Scalar::exact_from_f64(safety).expect("finite safety factor");
                Ok(Radius::Finite(&(&s * &s) * &min_sq))
            }
            ScalarMode::Approx { .. } => Ok(Radius::Finite(Scalar::Approx(
                safety * min_sq.to_f64().max(0.0).sqrt(),
            ))),
        }
    }

    /// Slice radius as a float regardless of mode; `None` when infinite.
    pub fn slice_radius_f64(&self, x: &[f64], safety: f64) -> Option<f64> {
        assert!(safety > 0.0 && safety < 0.5);
        let tol = match self.mode() {
            ScalarMode::Exact => 1e-12,
            ScalarMode::Approx { tolerance } => tolerance,
        };
        let stab = self.group.stabilizer_indices_f64(x, tol);
        if stab.len() == self.group.order() {
            return None;
        }
        let mut min_d = f64::INFINITY;
        for i in 0..self.group.order() {
            if stab.contains(&i) {
                continue;
            }
            let gx = self.group.element(i).apply_f64(x);
            min_d = min_d.min(self.gamma_dist_f64(&gx, x));
        }
        Some(safety * min_d)
    }

    /// Equivariant chart at `u`: `x -> u + eps * x / sqrt(1 + |x|_gram^2)`,
    /// a diffeomorphism of the model space onto the invariant-norm ball
    /// `B(u, eps)`. The squash uses the full-group invariant norm, which the
    /// stabilizer preserves, so the image genuinely stays inside the ball
    /// whose translates under non-stabilizing elements are disjoint.
    pub fn slice_chart(&self, u: &Vector) -> Result<SliceChart> {
        let radius = self.slice_radius_checked(u)?;
        let stabilizer = self.group.stabilizer(u)?;
        let n = self.dim();
        let u_f = u.to_f64();
        let map = match radius.value_f64() {
            None => MapExpr::affine(
                &Matrix::identity(n, ScalarMode::approx_default()).to_f64_rows(),
                &u_f,
            ),
            Some(eps) => {
                let gram = self.gram.to_f64_rows();
                // q(x) = x^T G x
                let mut q = Expr::Const(0.0);
                for (i, row) in gram.iter().enumerate() {
                    for (j, &g) in row.iter().enumerate() {
                        if g != 0.0 {
                            q = Expr::Add(
                                Box::new(q),
                                Box::new(Expr::Mul(
                                    Box::new(Expr::Const(g)),
                                    Box::new(Expr::Mul(
                                        Box::new(Expr::Coord(i)),
                                        Box::new(Expr::Coord(j)),
                                    )),
                                )),
                            );
                        }
                    }
                }
                let denom = Expr::Sqrt(Box::new(Expr::Add(
                    Box::new(Expr::Const(1.0)),
                    Box::new(q),
                )));
                let components = (0..n)
                    .map(|k| {
                        Expr::Add(
                            Box::new(Expr::Const(u_f[k])),
                            Box::new(Expr::Div(
                                Box::new(Expr::Mul(
                                    Box::new(Expr::Const(eps)),
                                    Box::new(Expr::Coord(k)),
                                )),
                                Box::new(denom.clone()),
                            )),
                        )
                    })
                    .collect();
                MapExpr::new(n, components)
            }
        };
        Ok(SliceChart {
            center: u.clone(),
            stabilizer,
            radius,
            map,
        })
    }

    fn slice_radius_checked(&self, u: &Vector) -> Result<Radius> {
        Ok(self.slice_radius(u, DEFAULT_SAFETY)?)
    }

    /// Image ball of a slice chart as a region (invariant-norm ball).
    pub fn slice_ball(&self, chart: &SliceChart) -> Region {
        match chart.radius.value_f64() {
            None => Region::full(self.dim()),
            Some(eps) => Region::Ball {
                center: chart.center.to_f64(),
                radius: eps,
                norm: BallNorm::Gram(self.gram.to_f64_rows()),
            },
        }
    }
}

fn lex_cmp(a: &Vector, b: &Vector) -> std::cmp::Ordering {
    for (x, y) in a.entries.iter().zip(&b.entries) {
        match x.raw_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

fn first_raw_difference(a: &Vector, b: &Vector) -> Option<usize> {
    a.entries
        .iter()
        .zip(&b.entries)
        .position(|(x, y)| x.raw_cmp(y) != std::cmp::Ordering::Equal)
}

/// Sampled connectivity of a region and of its quotient image.
///
/// Grid points are adjacent within one step; in the quotient, points are
/// additionally adjacent when some group element carries one within `tol`
/// of the other. Returns `(region_connected, quotient_connected)`.
pub fn connectivity_transfer(
    quotient: &LinearQuotient,
    region: &Region,
    resolution: usize,
) -> (bool, bool) {
    let (pts, h) = region.grid(resolution);
    if pts.len() <= 1 {
        return (true, true);
    }
    let step = h * 1.6;
    let n = pts.len();
    let mut parent_plain: Vec<usize> = (0..n).collect();
    let mut parent_quot: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    fn union(p: &mut Vec<usize>, i: usize, j: usize) {
        let (a, b) = (find(p, i), find(p, j));
        if a != b {
            p[a] = b;
        }
    }
    let translates: Vec<Vec<Vec<f64>>> = pts.iter().map(|p| quotient.group.orbit_f64(p)).collect();
    for i in 0..n {
        for j in i + 1..n {
            if euclid_dist(&pts[i], &pts[j]) <= step {
                union(&mut parent_plain, i, j);
                union(&mut parent_quot, i, j);
            } else if translates[i]
                .iter()
                .any(|ti| euclid_dist(ti, &pts[j]) <= step)
            {
                union(&mut parent_quot, i, j);
            }
        }
    }
    let plain_root = find(&mut parent_plain, 0);
    let quot_root = find(&mut parent_quot, 0);
    let plain_connected = (0..n).all(|i| find(&mut parent_plain, i) == plain_root);
    let quot_connected = (0..n).all(|i| find(&mut parent_quot, i) == quot_root);
    (plain_connected, quot_connected)
}
