//! Named example groups, maps, and chart families used by the test suite
//! and the command-line demo.

use crate::atlas::{Chart, Mode, OrbifoldPresentation, Transition};
use crate::error::{Error, Result};
use crate::expr::{CmpOp, Cond, Expr, MapExpr, Region};
use crate::group::FiniteMatrixGroup;
use crate::lifting::{QuotientMap, QuotientRegion};
use crate::linalg::{Matrix, Vector};
use crate::quotient::LinearQuotient;
use crate::scalar::ScalarMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Groups
// ---------------------------------------------------------------------------

pub fn trivial_group(dim: usize) -> FiniteMatrixGroup {
    FiniteMatrixGroup::trivial(dim, ScalarMode::Exact)
}

/// `{±I}` in the given dimension, exact.
pub fn sign_flip(dim: usize) -> FiniteMatrixGroup {
    let rows: Vec<Vec<i64>> = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { -1 } else { 0 }).collect())
        .collect();
    let refs: Vec<&[i64]> = rows.iter().map(|r| r.as_slice()).collect();
    FiniteMatrixGroup::close_generators(&[Matrix::from_int_rows(&refs, ScalarMode::Exact)], 64)
        .expect("sign flip closes")
}

/// Cyclic group of order m on the plane with integer entries; only the
/// crystallographic orders have such a representation.
pub fn cyclic_exact(m: usize) -> Result<FiniteMatrixGroup> {
    let gen_rows: &[&[i64]] = match m {
        1 => &[&[1, 0], &[0, 1]],
        2 => &[&[-1, 0], &[0, -1]],
        3 => &[&[0, -1], &[1, -1]],
        4 => &[&[0, -1], &[1, 0]],
        6 => &[&[0, -1], &[1, 1]],
        _ => {
            return Err(Error::UnknownFixture(format!(
                "no integer plane representation of a cyclic group of order {m}"
            )))
        }
    };
    FiniteMatrixGroup::close_generators(&[Matrix::from_int_rows(gen_rows, ScalarMode::Exact)], 64)
}

/// Orthogonal rotation by `2π/m`, floating point.
pub fn rotation_approx(m: usize) -> Result<FiniteMatrixGroup> {
    assert!(m >= 1);
    let t = 2.0 * std::f64::consts::PI / m as f64;
    let g = Matrix::from_f64_rows(&[vec![t.cos(), -t.sin()], vec![t.sin(), t.cos()]]);
    FiniteMatrixGroup::close_generators(&[g], 4 * m + 8)
}

/// `{±I, diag(1,−1), diag(−1,1)}`, exact.
pub fn dihedral4() -> FiniteMatrixGroup {
    let a = Matrix::from_int_rows(&[&[1, 0], &[0, -1]], ScalarMode::Exact);
    let b = Matrix::from_int_rows(&[&[-1, 0], &[0, 1]], ScalarMode::Exact);
    FiniteMatrixGroup::close_generators(&[a, b], 16).expect("dihedral-4 closes")
}

/// Dihedral group of order 2m: rotation by 2π/m plus the x-axis mirror.
pub fn dihedral_approx(m: usize) -> Result<FiniteMatrixGroup> {
    let t = 2.0 * std::f64::consts::PI / m as f64;
    let rot = Matrix::from_f64_rows(&[vec![t.cos(), -t.sin()], vec![t.sin(), t.cos()]]);
    let refl = Matrix::from_f64_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
    FiniteMatrixGroup::close_generators(&[rot, refl], 8 * m + 8)
}

/// Seeded invertible matrix with small integer entries and determinant ±1,
/// in the group's scalar mode, used to produce conjugate copies.
pub fn random_unimodular(dim: usize, mode: ScalarMode, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let rows: Vec<Vec<i64>> = (0..dim)
            .map(|_| (0..dim).map(|_| rng.gen_range(-2..=2)).collect())
            .collect();
        let refs: Vec<&[i64]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = Matrix::from_int_rows(&refs, mode);
        if let Ok(d) = m.determinant(mode) {
            if d.to_f64().abs() > 0.5 {
                return m;
            }
        }
    }
}

/// The standing group corpus: the named base groups and a seeded rational
/// conjugate of each.
pub fn corpus() -> Vec<(String, FiniteMatrixGroup)> {
    let mut base: Vec<(String, FiniteMatrixGroup)> = vec![
        ("trivial-2".into(), trivial_group(2)),
        ("signs-1".into(), sign_flip(1)),
        ("signs-2".into(), sign_flip(2)),
        ("signs-3".into(), sign_flip(3)),
        ("cyclic-2".into(), cyclic_exact(2).unwrap()),
        ("cyclic-3".into(), cyclic_exact(3).unwrap()),
        ("cyclic-4".into(), cyclic_exact(4).unwrap()),
        ("cyclic-6".into(), cyclic_exact(6).unwrap()),
        ("dihedral-4".into(), dihedral4()),
    ];
    let mut out = Vec::new();
    for (seed, (name, group)) in base.drain(..).enumerate() {
        let a = random_unimodular(group.dim(), group.mode(), 1000 + seed as u64);
        let conj = group.conjugated(&a).expect("unimodular conjugation");
        out.push((name.clone(), group));
        out.push((format!("conj-{name}"), conj));
    }
    out
}

// ---------------------------------------------------------------------------
// Counterexample maps
// ---------------------------------------------------------------------------

/// The n-th smooth bump `ρ_n`: support inside `[1/(n+1), 1/n]`, maximum 1
/// at the midpoint.
pub fn bump_map(n: u32) -> MapExpr {
    MapExpr::new(
        1,
        vec![Expr::Bump {
            n,
            arg: Box::new(Expr::Coord(0)),
        }],
    )
}

/// A finite prefix of a sign sequence in `{+1, −1}^ℕ`; the tail is +1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignSequence {
    signs: Vec<i8>,
}

impl SignSequence {
    pub fn new(signs: &[i8]) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Evaluation(
                "sign sequences take values in {+1, -1}".into(),
            ));
        }
        Ok(SignSequence {
            signs: signs.to_vec(),
        })
    }

    /// 1-based; +1 past the stored prefix.
    pub fn sign(&self, n: usize) -> f64 {
        assert!(n >= 1);
        self.signs.get(n - 1).map(|&s| s as f64).unwrap_or(1.0)
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }
}

/// Terms past this index are flat below the double-precision floor on the
/// whole support (e^{-1/x} ≤ e^{-33}), so the truncated sum is exact to
/// machine precision.
const EXAMPLE1_TERMS: usize = 32;

/// `f_ε(x) = ε_n e^{−1/x} ρ_n(x)` on the n-th bump support, 0 for `x ≤ 0`
/// and `x > 1`.
pub fn example1_map(eps: &SignSequence) -> MapExpr {
    let terms = EXAMPLE1_TERMS.max(eps.len());
    let mut sum = Expr::Const(0.0);
    for n in 1..=terms {
        let term = Expr::Mul(
            Box::new(Expr::Const(eps.sign(n))),
            Box::new(Expr::Bump {
                n: n as u32,
                arg: Box::new(Expr::Coord(0)),
            }),
        );
        sum = Expr::Add(Box::new(sum), Box::new(term));
    }
    let flat = Expr::Exp(Box::new(Expr::Neg(Box::new(Expr::Div(
        Box::new(Expr::Const(1.0)),
        Box::new(Expr::Coord(0)),
    )))));
    let body = Expr::Mul(Box::new(flat), Box::new(sum));
    let component = Expr::Piecewise {
        branches: vec![(
            Cond {
                lhs: Expr::Coord(0),
                op: CmpOp::Le,
                rhs: 1e-200,
            },
            Expr::Const(0.0),
        )],
        otherwise: Box::new(body),
    };
    MapExpr::new(1, vec![component])
}

/// Look for one constant sign `σ ∈ {±1}` with `f = σ·g` on `(0, 1/n_lo]`,
/// comparing values at the midpoint of every bump support from `n_lo` to
/// `n_hi`. Returns the sign when one works, `None` when the required sign
/// changes between supports (no constant-sign equivalence), and `Some(1)`
/// vacuously when both maps vanish at all sampled midpoints.
pub fn constant_sign_match(
    f: &MapExpr,
    g: &MapExpr,
    n_lo: u32,
    n_hi: u32,
) -> Result<Option<i8>> {
    let mut sigma: Option<i8> = None;
    for m in n_lo..=n_hi {
        let (a, b) = crate::expr::bump_support(m);
        let x = 0.5 * (a + b);
        let fv = f.eval(&[x])?[0];
        let gv = g.eval(&[x])?[0];
        if fv == 0.0 || gv == 0.0 {
            if fv == gv {
                continue;
            }
            return Ok(None);
        }
        let ratio = fv / gv;
        if (ratio.abs() - 1.0).abs() > 1e-9 {
            return Ok(None);
        }
        let s: i8 = if ratio > 0.0 { 1 } else { -1 };
        match sigma {
            None => sigma = Some(s),
            Some(prev) if prev != s => return Ok(None),
            _ => {}
        }
    }
    Ok(Some(sigma.unwrap_or(1)))
}

/// The plane map that is radially `e^{−r} ρ_n(r) (r,0)` on even-index
/// annuli and `e^{−r} ρ_n(r) (x,y)` on odd ones, 0 at the origin and
/// outside the unit disk. Equivariant for every orthogonal action on the
/// odd annuli, invariant on the even ones.
pub fn example2_map() -> MapExpr {
    let radial_factor = |n: u32| {
        Expr::Mul(
            Box::new(Expr::Bump {
                n,
                arg: Box::new(Expr::Radial),
            }),
            Box::new(Expr::Exp(Box::new(Expr::Neg(Box::new(Expr::Radial))))),
        )
    };
    let terms = 8u32;
    let mut comp0 = Expr::Const(0.0);
    let mut comp1 = Expr::Const(0.0);
    for n in 1..=terms {
        let dir0 = if n % 2 == 0 {
            Expr::Radial
        } else {
            Expr::Coord(0)
        };
        comp0 = Expr::Add(
            Box::new(comp0),
            Box::new(Expr::Mul(Box::new(radial_factor(n)), Box::new(dir0))),
        );
        if n % 2 == 1 {
            comp1 = Expr::Add(
                Box::new(comp1),
                Box::new(Expr::Mul(
                    Box::new(radial_factor(n)),
                    Box::new(Expr::Coord(1)),
                )),
            );
        }
    }
    MapExpr::new(2, vec![comp0, comp1])
}

/// Quotient map carrying `example2_map` between two copies of the plane
/// modulo the exact cyclic rotation of order 4, on a ball of the given
/// radius around the origin.
pub fn example2_quotient_map(radius: f64) -> QuotientMap {
    let group = cyclic_exact(4).expect("cyclic 4");
    let source = QuotientRegion {
        quotient: LinearQuotient::new(group.clone()),
        region: Region::Ball {
            center: vec![0.0, 0.0],
            radius,
            norm: crate::expr::BallNorm::Euclid,
        },
    };
    let target = QuotientRegion {
        quotient: LinearQuotient::new(group),
        region: Region::FullSpace {
            dim: 2,
            extent: 2.0,
        },
    };
    QuotientMap::new(source, target, example2_map())
}

/// Polar half-angle representative with the branch cut on the positive
/// x-axis: `(g(r) cos(θ/2), g(r) sin(θ/2))`. Well defined only into the
/// `{±I}` quotient.
pub fn half_angle_rep(profile: &MapExpr) -> MapExpr {
    assert_eq!(profile.in_dim, 1);
    assert_eq!(profile.out_dim, 1);
    let g_of_r = profile.components[0].substitute(&[Expr::Radial]);
    let x_over_r = Expr::Div(Box::new(Expr::Coord(0)), Box::new(Expr::Radial));
    let plus_half = |num: Expr| {
        Expr::Sqrt(Box::new(Expr::Mul(
            Box::new(Expr::Const(0.5)),
            Box::new(num),
        )))
    };
    let cos_mag = plus_half(Expr::Add(
        Box::new(Expr::Const(1.0)),
        Box::new(x_over_r.clone()),
    ));
    let cos_half = Expr::Piecewise {
        branches: vec![(
            Cond {
                lhs: Expr::Coord(1),
                op: CmpOp::Ge,
                rhs: 0.0,
            },
            cos_mag.clone(),
        )],
        otherwise: Box::new(Expr::Neg(Box::new(cos_mag))),
    };
    let sin_half = plus_half(Expr::Sub(Box::new(Expr::Const(1.0)), Box::new(x_over_r)));
    let guard = |body: Expr| Expr::Piecewise {
        branches: vec![(
            Cond {
                lhs: Expr::Radial,
                op: CmpOp::Le,
                rhs: 1e-12,
            },
            Expr::Const(0.0),
        )],
        otherwise: Box::new(body),
    };
    MapExpr::new(
        2,
        vec![
            guard(Expr::Mul(Box::new(g_of_r.clone()), Box::new(cos_half))),
            guard(Expr::Mul(Box::new(g_of_r), Box::new(sin_half))),
        ],
    )
}

/// Default radial profile for the half-angle map: `ρ_1(r)·r`, vanishing
/// near 0 but not everywhere.
pub fn half_angle_default_profile() -> MapExpr {
    MapExpr::new(
        1,
        vec![Expr::Mul(
            Box::new(Expr::Bump {
                n: 1,
                arg: Box::new(Expr::Coord(0)),
            }),
            Box::new(Expr::Coord(0)),
        )],
    )
}

/// The half-angle quotient map `ℝ² → ℝ²/{±I}`.
pub fn halfangle_map(profile: &MapExpr) -> QuotientMap {
    let source = QuotientRegion {
        quotient: LinearQuotient::new(trivial_group(2)),
        region: Region::FullSpace {
            dim: 2,
            extent: 2.0,
        },
    };
    let target = QuotientRegion {
        quotient: LinearQuotient::new(sign_flip(2)),
        region: Region::FullSpace {
            dim: 2,
            extent: 2.0,
        },
    };
    QuotientMap::new(source, target, half_angle_rep(profile))
}

// ---------------------------------------------------------------------------
// Atlas fixtures
// ---------------------------------------------------------------------------

fn disk(center: (f64, f64), radius: f64) -> Region {
    Region::Ball {
        center: vec![center.0, center.1],
        radius,
        norm: crate::expr::BallNorm::Euclid,
    }
}

const ANNULUS_INNER: f64 = 0.5;
const ANNULUS_OUTER: f64 = 1.0;

fn annulus() -> Region {
    Region::Annulus {
        dim: 2,
        r1: ANNULUS_INNER,
        r2: ANNULUS_OUTER,
    }
}

/// Angle doubling that keeps the radius: `(r, θ) ↦ (r, 2θ)`, written as
/// `((x²−y²)/r, 2xy/r)`.
fn angle_doubling() -> MapExpr {
    let r = Expr::Radial;
    let c0 = Expr::Div(
        Box::new(Expr::Sub(
            Box::new(Expr::Mul(Box::new(Expr::Coord(0)), Box::new(Expr::Coord(0)))),
            Box::new(Expr::Mul(Box::new(Expr::Coord(1)), Box::new(Expr::Coord(1)))),
        )),
        Box::new(r.clone()),
    );
    let c1 = Expr::Div(
        Box::new(Expr::Mul(
            Box::new(Expr::Const(2.0)),
            Box::new(Expr::Mul(Box::new(Expr::Coord(0)), Box::new(Expr::Coord(1)))),
        )),
        Box::new(r),
    );
    MapExpr::new(2, vec![c0, c1])
}

/// Identity chart on the annulus (trivial group).
pub fn bad_union_f() -> OrbifoldPresentation {
    OrbifoldPresentation {
        charts: vec![
            Chart::new("F", annulus(), trivial_group(2)).with_projection(MapExpr::identity(2)),
        ],
        transitions: vec![],
        containments: vec![],
        mode: Mode::Satake,
    }
}

/// Angle-doubling chart on the annulus: the `{±I}` quotient has the same
/// image.
pub fn bad_union_fprime() -> OrbifoldPresentation {
    OrbifoldPresentation {
        charts: vec![
            Chart::new("Fprime", annulus(), sign_flip(2)).with_projection(angle_doubling()),
        ],
        transitions: vec![],
        containments: vec![],
        mode: Mode::Satake,
    }
}

const SECOND_DISK_COUNT: usize = 12;
const SECOND_DISK_RADIUS: f64 = 0.22;
const SECOND_DISK_RING: f64 = 0.75;

/// Twelve small identity-projection disks inside the annulus.
pub fn bad_union_fsecond() -> OrbifoldPresentation {
    let charts = (0..SECOND_DISK_COUNT)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / SECOND_DISK_COUNT as f64;
            Chart::new(
                &format!("disk{k}"),
                disk((SECOND_DISK_RING * t.cos(), SECOND_DISK_RING * t.sin()), SECOND_DISK_RADIUS),
                trivial_group(2),
            )
            .with_projection(MapExpr::identity(2))
        })
        .collect();
    OrbifoldPresentation {
        charts,
        transitions: vec![],
        containments: vec![],
        mode: Mode::Satake,
    }
}

/// Union of two presentations, with the containments the fixture family
/// declares between their charts.
pub fn union_presentations(
    a: &OrbifoldPresentation,
    b: &OrbifoldPresentation,
    cross_containments: &[(String, String)],
) -> OrbifoldPresentation {
    let mut charts = a.charts.clone();
    charts.extend(b.charts.iter().cloned());
    let mut transitions = a.transitions.clone();
    transitions.extend(b.transitions.iter().cloned());
    let mut containments = a.containments.clone();
    containments.extend(b.containments.iter().cloned());
    containments.extend(cross_containments.iter().cloned());
    OrbifoldPresentation {
        charts,
        transitions,
        containments,
        mode: a.mode,
    }
}

/// The containments the bad-union family declares when two of its members
/// are combined: equal-image pairs contain each other, disks sit inside
/// either annulus chart.
pub fn bad_union_cross_containments(a: &str, b: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut pair = |x: &str, y: &str| {
        let disks = |other: &str| {
            (0..SECOND_DISK_COUNT)
                .map(|k| (format!("disk{k}"), other.to_string()))
                .collect::<Vec<_>>()
        };
        match (x, y) {
            ("F", "Fprime") => out.extend([
                ("F".to_string(), "Fprime".to_string()),
                ("Fprime".to_string(), "F".to_string()),
            ]),
            ("F", "Fsecond") => out.extend(disks("F")),
            ("Fprime", "Fsecond") => out.extend(disks("Fprime")),
            _ => {}
        }
    };
    pair(a, b);
    pair(b, a);
    out.sort();
    out.dedup();
    out
}

/// Real and imaginary parts of `(x+iy)^p` as polynomial expressions.
fn complex_power(p: usize) -> (Expr, Expr) {
    // Accumulate (re, im) by repeated multiplication with (x + i y).
    let mut re = Expr::Const(1.0);
    let mut im = Expr::Const(0.0);
    for _ in 0..p {
        let new_re = Expr::Sub(
            Box::new(Expr::Mul(Box::new(re.clone()), Box::new(Expr::Coord(0)))),
            Box::new(Expr::Mul(Box::new(im.clone()), Box::new(Expr::Coord(1)))),
        );
        let new_im = Expr::Add(
            Box::new(Expr::Mul(Box::new(re), Box::new(Expr::Coord(1)))),
            Box::new(Expr::Mul(Box::new(im), Box::new(Expr::Coord(0)))),
        );
        re = new_re;
        im = new_im;
    }
    (re, im)
}

/// Teardrop atlas: one cone chart `(disk, ℤ/p, z^p)` plus four trivially
/// uniformized patch disks away from the cone point, declared inside the
/// cone chart's image.
pub fn teardrop(p: usize) -> Result<OrbifoldPresentation> {
    if p == 0 {
        return Err(Error::UnknownFixture("teardrop(0)".into()));
    }
    let group = rotation_approx(p)?;
    let (re, im) = complex_power(p);
    let cone = Chart::new("cone", disk((0.0, 0.0), 1.1), group)
        .with_projection(MapExpr::new(2, vec![re, im]));
    let mut charts = vec![cone];
    let mut containments = Vec::new();
    let image_radius = 0.8f64.powi(p as i32);
    for k in 0..4 {
        let t = 2.0 * std::f64::consts::PI * (p as f64) * k as f64 / 4.0;
        let center = (image_radius * t.cos(), image_radius * t.sin());
        let id = format!("patch{k}");
        charts.push(
            Chart::new(&id, disk(center, 0.3 * image_radius), trivial_group(2))
                .with_projection(MapExpr::identity(2)),
        );
        containments.push((id, "cone".to_string()));
    }
    Ok(OrbifoldPresentation {
        charts,
        transitions: vec![],
        containments,
        mode: Mode::Satake,
    })
}

/// Inverse stereographic projection from the plane onto the unit sphere;
/// `south` mirrors the z-axis so the origin maps to the south pole.
fn stereographic(south: bool) -> MapExpr {
    let r2 = Expr::Add(
        Box::new(Expr::Mul(Box::new(Expr::Coord(0)), Box::new(Expr::Coord(0)))),
        Box::new(Expr::Mul(Box::new(Expr::Coord(1)), Box::new(Expr::Coord(1)))),
    );
    let denom = Expr::Add(Box::new(Expr::Const(1.0)), Box::new(r2.clone()));
    let two = |c: usize| {
        Expr::Div(
            Box::new(Expr::Mul(
                Box::new(Expr::Const(2.0)),
                Box::new(Expr::Coord(c)),
            )),
            Box::new(denom.clone()),
        )
    };
    let z_num = Expr::Sub(Box::new(Expr::Const(1.0)), Box::new(r2));
    let (c0, c1) = (two(0), two(1));
    let z = Expr::Div(Box::new(z_num), Box::new(denom));
    let z = if south { Expr::Neg(Box::new(z)) } else { z };
    MapExpr::new(2, vec![c0, c1, z])
}

/// Football atlas on the sphere: a `ℤ/p` cone chart over the north pole, a
/// `ℤ/q` cone chart over the south pole, and eight equatorial patch disks
/// declared inside both caps.
pub fn football(p: usize, q: usize) -> Result<OrbifoldPresentation> {
    if p == 0 || q == 0 {
        return Err(Error::UnknownFixture(format!("football({p},{q})")));
    }
    let cap = |name: &str, order: usize, south: bool| -> Result<Chart> {
        let group = rotation_approx(order)?;
        let (re, im) = complex_power(order);
        let power = MapExpr::new(2, vec![re, im]);
        let proj = stereographic(south).compose(&power);
        let radius = 1.2f64.powf(1.0 / order as f64);
        Ok(Chart::new(name, disk((0.0, 0.0), radius), group).with_projection(proj))
    };
    let mut charts = vec![cap("capN", p, false)?, cap("capS", q, true)?];
    let mut containments = Vec::new();
    for k in 0..8 {
        let t = 2.0 * std::f64::consts::PI * k as f64 / 8.0;
        let id = format!("patch{k}");
        charts.push(
            Chart::new(&id, disk((t.cos(), t.sin()), 0.15), trivial_group(2))
                .with_projection(stereographic(false)),
        );
        containments.push((id.clone(), "capN".to_string()));
        containments.push((id, "capS".to_string()));
    }
    Ok(OrbifoldPresentation {
        charts,
        transitions: vec![],
        containments,
        mode: Mode::Satake,
    })
}

/// Two reflection charts over the same folded half-plane, glued by the
/// coordinate swap: legal as a diffeological/Haefliger atlas, rejected by
/// the reflection-free uniformizing condition.
pub fn mirror() -> OrbifoldPresentation {
    let g1 = FiniteMatrixGroup::close_generators(
        &[Matrix::from_int_rows(&[&[1, 0], &[0, -1]], ScalarMode::Exact)],
        8,
    )
    .expect("order two");
    let g2 = FiniteMatrixGroup::close_generators(
        &[Matrix::from_int_rows(&[&[-1, 0], &[0, 1]], ScalarMode::Exact)],
        8,
    )
    .expect("order two");
    let proj1 = MapExpr::new(
        2,
        vec![
            Expr::Coord(0),
            Expr::Mul(Box::new(Expr::Coord(1)), Box::new(Expr::Coord(1))),
        ],
    );
    let proj2 = MapExpr::new(
        2,
        vec![
            Expr::Coord(1),
            Expr::Mul(Box::new(Expr::Coord(0)), Box::new(Expr::Coord(0))),
        ],
    );
    let model = || disk((0.0, 0.0), 1.2);
    let swap = Matrix::from_int_rows(&[&[0, 1], &[1, 0]], ScalarMode::Exact);
    let zero = Vector::from_ints(&[0, 0], ScalarMode::Exact);
    OrbifoldPresentation {
        charts: vec![
            Chart::new("left", model(), g1).with_projection(proj1),
            Chart::new("right", model(), g2).with_projection(proj2),
        ],
        transitions: vec![
            Transition {
                from: "left".into(),
                to: "right".into(),
                domain: model(),
                linear: swap.clone(),
                offset: zero.clone(),
            },
            Transition {
                from: "right".into(),
                to: "left".into(),
                domain: model(),
                linear: swap,
                offset: zero,
            },
        ],
        containments: vec![
            ("left".into(), "right".into()),
            ("right".into(), "left".into()),
        ],
        mode: Mode::Satake,
    }
}

/// Resolve a fixture name as used by the command line, including
/// `A-union-B` combinations of the bad-union family and parameterized
/// `teardrop(p)` / `football(p,q)`.
pub fn presentation_fixture(name: &str) -> Result<OrbifoldPresentation> {
    let bad = |tag: &str| -> Option<OrbifoldPresentation> {
        match tag {
            "F" => Some(bad_union_f()),
            "Fprime" => Some(bad_union_fprime()),
            "Fsecond" => Some(bad_union_fsecond()),
            _ => None,
        }
    };
    if let Some(rest) = name.strip_prefix("bad-union-") {
        if let Some((a, b)) = rest.split_once("-union-") {
            let (pa, pb) = match (bad(a), bad(b)) {
                (Some(pa), Some(pb)) => (pa, pb),
                _ => return Err(Error::UnknownFixture(name.to_string())),
            };
            let cross = bad_union_cross_containments(a, b);
            return Ok(union_presentations(&pa, &pb, &cross));
        }
        return bad(rest).ok_or_else(|| Error::UnknownFixture(name.to_string()));
    }
    if let Some(args) = name.strip_prefix("teardrop(").and_then(|s| s.strip_suffix(')')) {
        let p: usize = args
            .trim()
            .parse()
            .map_err(|_| Error::UnknownFixture(name.to_string()))?;
        return teardrop(p);
    }
    if let Some(args) = name.strip_prefix("football(").and_then(|s| s.strip_suffix(')')) {
        let mut parts = args.split(',').map(|s| s.trim().parse::<usize>());
        match (parts.next(), parts.next(), parts.next()) {
            (Some(Ok(p)), Some(Ok(q)), None) => return football(p, q),
            _ => return Err(Error::UnknownFixture(name.to_string())),
        }
    }
    if name == "mirror" {
        return Ok(mirror());
    }
    Err(Error::UnknownFixture(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::euclid_dist;

    #[test]
    fn corpus_has_the_required_breadth() {
        let groups = corpus();
        assert!(groups.len() >= 8);
        let orders: Vec<usize> = groups.iter().map(|(_, g)| g.order()).collect();
        assert!(orders.contains(&1));
        assert!(orders.contains(&2));
        assert!(orders.contains(&3));
        assert!(orders.contains(&4));
        assert!(orders.contains(&6));
        // Conjugates keep the order of their base group.
        for pair in groups.chunks(2) {
            assert_eq!(pair[0].1.order(), pair[1].1.order());
        }
    }

    #[test]
    fn bump_values_match_the_closed_form() {
        let b1 = bump_map(1);
        // Maximum 1 at the support midpoint, 0 at the endpoints.
        assert!((b1.eval(&[0.75]).unwrap()[0] - 1.0).abs() < 1e-12);
        assert_eq!(b1.eval(&[0.5]).unwrap()[0], 0.0);
        assert_eq!(b1.eval(&[1.0]).unwrap()[0], 0.0);
        let b2 = bump_map(2);
        assert_eq!(b2.eval(&[0.7]).unwrap()[0], 0.0);
        let b3 = bump_map(3);
        assert!(b3.eval(&[1.0 / std::f64::consts::PI]).unwrap()[0] > 0.0);
        for n in 1..=6 {
            let b = bump_map(n);
            for k in 0..50 {
                let x = k as f64 / 49.0 * 1.2;
                let v = b.eval(&[x]).unwrap()[0];
                assert!((0.0..=1.0).contains(&v));
                let (a, bb) = crate::expr::bump_support(n);
                if !(a..=bb).contains(&x) {
                    assert_eq!(v, 0.0, "bump {n} nonzero at {x}");
                }
            }
        }
    }

    #[test]
    fn example1_vanishes_off_the_unit_interval_and_tracks_signs() {
        let eps = SignSequence::new(&[1, -1, 1, -1, 1]).unwrap();
        let f = example1_map(&eps);
        assert_eq!(f.eval(&[-1.0]).unwrap()[0], 0.0);
        assert_eq!(f.eval(&[0.0]).unwrap()[0], 0.0);
        assert_eq!(f.eval(&[2.0]).unwrap()[0], 0.0);
        for n in 1..=5usize {
            let mid = 0.5 * (1.0 / (n as f64 + 1.0) + 1.0 / n as f64);
            let v = f.eval(&[mid]).unwrap()[0];
            assert!(v != 0.0, "flat at bump {n}");
            assert_eq!(v.signum(), eps.sign(n), "sign at bump {n}");
        }
    }

    #[test]
    fn constant_sign_match_tracks_relative_sign_patterns() {
        let a = SignSequence::new(&[1, -1, 1, -1, 1]).unwrap();
        let fa = example1_map(&a);
        // A map equals itself with sign +1 and its negation with sign -1.
        assert_eq!(constant_sign_match(&fa, &fa, 5, 10).unwrap(), Some(1));
        let neg = SignSequence::new(&[-1, 1, -1, 1, -1]).unwrap();
        let fneg = example1_map(&neg);
        // Past the stored prefixes both tails are +1, so the relative sign
        // flips back to +1 and no constant sign survives on (0, 1/5].
        assert_eq!(constant_sign_match(&fa, &fneg, 5, 10).unwrap(), None);
        // On (0, 1/5] restricted to the prefix range only, the signs are
        // opposite throughout.
        assert_eq!(constant_sign_match(&fa, &fneg, 5, 5).unwrap(), Some(-1));
        // Sequences differing only below index 5 agree on (0, 1/5].
        let b = SignSequence::new(&[-1, 1, 1, -1, 1]).unwrap();
        assert_eq!(constant_sign_match(&fa, &example1_map(&b), 5, 10).unwrap(), Some(1));
    }

    #[test]
    fn example1_is_smooth_at_sampled_branch_points() {
        let eps = SignSequence::new(&[-1, 1, -1]).unwrap();
        let f = example1_map(&eps);
        for n in 1..=5usize {
            let b = 1.0 / n as f64;
            let h = 1e-4;
            let left = (f.eval(&[b]).unwrap()[0] - f.eval(&[b - h]).unwrap()[0]) / h;
            let right = (f.eval(&[b + h]).unwrap()[0] - f.eval(&[b]).unwrap()[0]) / h;
            assert!(
                (left - right).abs() <= 1e-6,
                "kink at 1/{n}: {left} vs {right}"
            );
        }
    }

    #[test]
    fn example2_quoted_values_and_equivariance() {
        let f = example2_map();
        assert_eq!(f.eval(&[3.0, 4.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(f.eval(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        // Even annulus: image on the positive x-axis ray.
        let r_even = 0.5 * (1.0 / 3.0 + 1.0 / 2.0); // inside (1/3, 1/2), n = 2
        let v = f.eval(&[0.0, r_even]).unwrap();
        assert!(v[0] > 0.0 && v[1].abs() < 1e-15);
        // Odd annulus: radial multiple of the input.
        let r_odd = 0.75; // inside (1/2, 1), n = 1
        let x = [r_odd * 0.6, r_odd * 0.8];
        let w = f.eval(&x).unwrap();
        let ratio = w[0] / x[0];
        assert!(ratio > 0.0);
        assert!((w[1] - ratio * x[1]).abs() < 1e-12);
        // Well defined on the order-4 quotient.
        let q = example2_quotient_map(0.45);
        assert!(q.check_well_defined(60, 4, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn half_angle_map_is_well_defined_and_vanishing_profile_kills_it() {
        let profile = half_angle_default_profile();
        let f = halfangle_map(&profile);
        assert!(f.check_well_defined(80, 6, 1e-7).unwrap().is_empty());
        // Profile vanishes off its support, so small radii map to 0.
        assert_eq!(f.eval_rep(&[0.2, 0.1]).unwrap(), vec![0.0, 0.0]);
        // On the support the image radius equals the profile value.
        let x = [0.75, 0.0];
        let y = f.eval_rep(&x).unwrap();
        let want = profile.eval(&[0.75]).unwrap()[0];
        assert!((crate::linalg::euclid_norm(&y) - want.abs()).abs() < 1e-9);
    }

    #[test]
    fn fixture_names_resolve() {
        for name in [
            "bad-union-F",
            "bad-union-Fprime",
            "bad-union-Fsecond",
            "bad-union-F-union-Fprime",
            "bad-union-F-union-Fsecond",
            "bad-union-Fprime-union-Fsecond",
            "teardrop(3)",
            "football(2,3)",
            "mirror",
        ] {
            assert!(presentation_fixture(name).is_ok(), "{name}");
        }
        assert!(presentation_fixture("nonsense").is_err());
        assert!(presentation_fixture("teardrop(x)").is_err());
    }

    #[test]
    fn angle_doubling_keeps_radius_and_identifies_antipodes() {
        let d = angle_doubling();
        let u = [0.6, 0.45];
        let v = d.eval(&u).unwrap();
        let ru = (u[0] * u[0] + u[1] * u[1]).sqrt();
        let rv = (v[0] * v[0] + v[1] * v[1]).sqrt();
        assert!((ru - rv).abs() < 1e-12);
        let minus: Vec<f64> = u.iter().map(|a| -a).collect();
        let w = d.eval(&minus).unwrap();
        assert!(euclid_dist(&v, &w) < 1e-12);
    }

    #[test]
    fn stereographic_lands_on_the_sphere() {
        let s = stereographic(false);
        for pt in [[0.0, 0.0], [1.0, 0.0], [0.3, -0.8]] {
            let p = s.eval(&pt).unwrap();
            let norm: f64 = p.iter().map(|v| v * v).sum::<f64>();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        assert!(euclid_dist(&s.eval(&[0.0, 0.0]).unwrap(), &[0.0, 0.0, 1.0]) < 1e-12);
        let south = stereographic(true);
        assert!(euclid_dist(&south.eval(&[0.0, 0.0]).unwrap(), &[0.0, 0.0, -1.0]) < 1e-12);
        // The two projections agree after the reciprocal change of plane
        // coordinates.
        let u = [1.3, 0.4];
        let r2: f64 = u.iter().map(|v| v * v).sum();
        let inv = [u[0] / r2, u[1] / r2];
        assert!(euclid_dist(&s.eval(&u).unwrap(), &south.eval(&inv).unwrap()) < 1e-12);
    }
}
