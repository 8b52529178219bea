//! Lifting maps between quotients back to equivariant maps of model spaces.
//!
//! A lift is reconstructed by continuation: at each new source point the
//! target orbit offers finitely many candidate values, and the candidate
//! nearest to the previously lifted value wins whenever it wins clearly.
//! Ambiguity (near a fixed locus or a zero of the map) splits the domain
//! into patches; genuine obstructions show up either as a loop that fails
//! to close (monodromy) or as patches forcing different group
//! homomorphisms.

use crate::error::{Error, Result};
use crate::expr::{MapExpr, Region};
use crate::group::{FiniteMatrixGroup, GroupHomomorphism};
use crate::linalg::{euclid_dist, euclid_norm, Matrix};
use crate::quotient::LinearQuotient;

/// A quotient with a declared open sampling region in its model space.
#[derive(Debug, Clone)]
pub struct QuotientRegion {
    pub quotient: LinearQuotient,
    pub region: Region,
}

/// Map of quotients, evaluated through a representative-valued formula on
/// the source model. The formula may pick representatives discontinuously;
/// only the induced orbit map has to be continuous.
#[derive(Debug, Clone)]
pub struct QuotientMap {
    pub source: QuotientRegion,
    pub target: QuotientRegion,
    rep_map: MapExpr,
    pub declared_lift: Option<MapExpr>,
}

impl QuotientMap {
    pub fn new(source: QuotientRegion, target: QuotientRegion, rep_map: MapExpr) -> Self {
        assert_eq!(rep_map.in_dim, source.quotient.dim(), "source dimension");
        assert_eq!(rep_map.out_dim, target.quotient.dim(), "target dimension");
        QuotientMap {
            source,
            target,
            rep_map,
            declared_lift: None,
        }
    }

    pub fn with_lift(mut self, lift: MapExpr) -> Self {
        self.declared_lift = Some(lift);
        self
    }

    /// One representative of the image orbit.
    pub fn eval_rep(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.rep_map.eval(x)
    }

    /// Canonical representative of the image orbit.
    pub fn eval_orbit(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .target
            .quotient
            .canonical_rep_f64(&self.rep_map.eval(x)?))
    }

    /// Sampled well-definedness: source-orbit mates map to the same target
    /// orbit. Returns offending source points.
    pub fn check_well_defined(&self, samples: usize, seed: u64, tol: f64) -> Result<Vec<Vec<f64>>> {
        let mut bad = Vec::new();
        for x in self.source.region.sample(samples, seed) {
            let fx = self.eval_rep(&x)?;
            for g in self.source.quotient.group().elements() {
                let gx = g.apply_f64(&x);
                if !self.source.region.contains(&gx) {
                    continue;
                }
                let fgx = self.eval_rep(&gx)?;
                if !self.target.quotient.same_orbit_f64(&fx, &fgx, tol) {
                    bad.push(x.clone());
                    break;
                }
            }
        }
        Ok(bad)
    }
}

/// Anything that assigns each source point a finite set of candidate target
/// values (one orbit). `hint` is the previously lifted value, used by
/// implementations that must solve for a branch locally.
pub trait OrbitValued {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn candidates(&self, x: &[f64], hint: &[f64]) -> Result<Vec<Vec<f64>>>;
    /// Metric on the target used to pick the nearest candidate.
    fn dist(&self, a: &[f64], b: &[f64]) -> f64;
}

impl OrbitValued for QuotientMap {
    fn dim_in(&self) -> usize {
        self.source.quotient.dim()
    }

    fn dim_out(&self) -> usize {
        self.target.quotient.dim()
    }

    fn candidates(&self, x: &[f64], _hint: &[f64]) -> Result<Vec<Vec<f64>>> {
        let rep = self.eval_rep(x)?;
        Ok(self.target.quotient.group().orbit_f64(&rep))
    }

    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        self.target.quotient.gamma_dist_f64(a, b)
    }
}

/// Pick the candidate nearest to `val`; `Ok(None)` when the choice is not
/// clear (two distinct candidates nearly equidistant).
fn nearest_candidate(
    map: &impl OrbitValued,
    val: &[f64],
    x: &[f64],
    tol: f64,
) -> Result<Option<Vec<f64>>> {
    let mut cands = map.candidates(x, val)?;
    // Merge candidates that coincide (stabilizer collapses the orbit).
    let mut distinct: Vec<Vec<f64>> = Vec::new();
    for c in cands.drain(..) {
        if !distinct.iter().any(|d| euclid_dist(d, &c) <= tol) {
            distinct.push(c);
        }
    }
    let mut best: Option<(f64, usize)> = None;
    let mut second = f64::INFINITY;
    for (i, c) in distinct.iter().enumerate() {
        let d = map.dist(val, c);
        match best {
            None => best = Some((d, i)),
            Some((b, _)) if d < b => {
                second = best.unwrap().0;
                best = Some((d, i));
            }
            _ => second = second.min(d),
        }
    }
    let (d1, idx) = best.ok_or_else(|| Error::Evaluation("empty candidate set".into()))?;
    if distinct.len() == 1 || d1 <= 0.45 * second {
        Ok(Some(distinct.swap_remove(idx)))
    } else {
        Ok(None)
    }
}

/// Continue a lifted value along `path(t)`, `t` in [0, 1], with adaptive
/// step halving. Returns the value at `path(1)`.
pub fn continue_along<P>(
    map: &impl OrbitValued,
    path: P,
    start_val: &[f64],
    tol: f64,
) -> Result<Vec<f64>>
where
    P: Fn(f64) -> Vec<f64>,
{
    const MIN_STEP: f64 = 1.0 / 8192.0;
    let mut t = 0.0f64;
    let mut val = start_val.to_vec();
    let mut dt = 0.25f64;
    let mut steps = 0usize;
    while t < 1.0 {
        let target_t = (t + dt).min(1.0);
        let x = path(target_t);
        match nearest_candidate(map, &val, &x, tol)? {
            Some(next) => {
                t = target_t;
                val = next;
                dt = (dt * 2.0).min(0.25);
                steps += 1;
            }
            None => {
                dt *= 0.5;
                if dt < MIN_STEP {
                    return Err(Error::StepTooLarge {
                        index: steps,
                        gap: 0.0,
                    });
                }
            }
        }
    }
    Ok(val)
}

/// Recover the single group element that a sampled map agrees with on a
/// region: samples with trivial stabilizer vote, and the vote must be
/// unanimous. Disconnected regions can legitimately disagree per component,
/// which is reported as `Inconsistent`.
pub fn unique_group_element(
    h: &MapExpr,
    region: &Region,
    group: &FiniteMatrixGroup,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<usize> {
    let pts = region.sample(samples, seed);
    let mut choice: Option<(usize, Vec<f64>)> = None;
    let mut used = 0usize;
    for x in &pts {
        let hx = h.eval(x)?;
        let matches: Vec<usize> = (0..group.order())
            .filter(|&i| euclid_dist(&group.element(i).apply_f64(x), &hx) <= tol)
            .collect();
        if matches.is_empty() {
            return Err(Error::NotOrbitPreserving {
                witness: format_point(x),
            });
        }
        if group.stabilizer_indices_f64(x, tol).len() > 1 || matches.len() > 1 {
            continue;
        }
        used += 1;
        match &choice {
            None => choice = Some((matches[0], x.clone())),
            Some((prev, witness)) => {
                if *prev != matches[0] {
                    return Err(Error::Inconsistent {
                        detail: format!(
                            "element {} at ({}) vs element {} at ({})",
                            prev,
                            format_point(witness),
                            matches[0],
                            format_point(x)
                        ),
                    });
                }
            }
        }
    }
    match choice {
        Some((idx, _)) => Ok(idx),
        None => Err(Error::Ambiguous {
            detail: format!("none of {used} usable samples had a trivial stabilizer"),
        }),
    }
}

/// Lift a sampled path point-by-point: each lifted value is the orbit
/// preimage of the next image nearest to the current value.
pub fn path_lift(
    f: &QuotientMap,
    path: &[Vec<f64>],
    seed_value: &[f64],
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    let first = path.first().ok_or_else(|| Error::Evaluation("empty path".into()))?;
    let image0 = f.eval_rep(first)?;
    if !f.target.quotient.same_orbit_f64(seed_value, &image0, step_match_tol(tol, seed_value)) {
        return Err(Error::SeedOffOrbit);
    }
    let mut out = Vec::with_capacity(path.len());
    out.push(seed_value.to_vec());
    for (k, point) in path.iter().enumerate().skip(1) {
        let prev = out.last().unwrap().clone();
        match nearest_candidate(f, &prev, point, tol)? {
            Some(v) => out.push(v),
            None => {
                return Err(Error::StepTooLarge { index: k, gap: 0.0 });
            }
        }
    }
    Ok(out)
}

fn step_match_tol(tol: f64, v: &[f64]) -> f64 {
    tol.max(1e-12) * (1.0 + euclid_norm(v)) * 10.0
}

/// Monodromy of a closed loop: the group element carrying the lift of the
/// start point to the lift continued around the loop.
pub fn monodromy(
    f: &QuotientMap,
    loop_path: &[Vec<f64>],
    seed_value: &[f64],
    tol: f64,
) -> Result<usize> {
    let lifted = path_lift(f, loop_path, seed_value, tol)?;
    let start = lifted.first().unwrap();
    let end = lifted.last().unwrap();
    let group = f.target.quotient.group();
    let match_tol = step_match_tol(tol, end);
    (0..group.order())
        .find(|&i| euclid_dist(&group.element(i).apply_f64(start), end) <= match_tol)
        .ok_or(Error::NoGroupElement)
}

/// Match each source group element to the target element that the lift
/// intertwines it with, by unanimity over samples. No injectivity demands:
/// used internally where lifts may collapse dimensions.
fn orbit_match_homomorphism(
    lift: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    source_group: &FiniteMatrixGroup,
    target_group: &FiniteMatrixGroup,
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<Vec<usize>> {
    let mut map = Vec::with_capacity(source_group.order());
    for gi in 0..source_group.order() {
        let g = source_group.element(gi);
        let mut candidates: Option<Vec<usize>> = None;
        for u in samples {
            let fu = lift(u)?;
            let gu = g.apply_f64(u);
            let fgu = lift(&gu)?;
            let mtol = step_match_tol(tol, &fu);
            let here: Vec<usize> = (0..target_group.order())
                .filter(|&j| euclid_dist(&target_group.element(j).apply_f64(&fu), &fgu) <= mtol)
                .collect();
            candidates = Some(match candidates {
                None => here,
                Some(prev) => prev.into_iter().filter(|c| here.contains(c)).collect(),
            });
            if candidates.as_ref().unwrap().is_empty() {
                return Err(Error::NoConsistentImage { index: gi });
            }
        }
        match candidates {
            Some(c) if c.len() == 1 => map.push(c[0]),
            Some(c) if c.is_empty() => return Err(Error::NoConsistentImage { index: gi }),
            Some(c) => {
                return Err(Error::Ambiguous {
                    detail: format!("element {gi} admits {} images on all samples", c.len()),
                })
            }
            None => {
                return Err(Error::Ambiguous {
                    detail: "no samples available".into(),
                })
            }
        }
    }
    Ok(map)
}

/// Homomorphism induced by an injective equivariant lift: for each source
/// element the unanimous target element with `lift(g u) = h(g) lift(u)`,
/// cross-checked against conjugation by the Jacobian at the origin when the
/// region contains it.
pub fn induced_homomorphism(
    lift: &MapExpr,
    source_group: &FiniteMatrixGroup,
    target_group: &FiniteMatrixGroup,
    region: &Region,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<GroupHomomorphism> {
    let pts = region.sample(samples, seed);
    let source_q = LinearQuotient::new(source_group.clone());
    let target_q = LinearQuotient::new(target_group.clone());
    // Injectivity on sampled orbits.
    let images: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| lift.eval(p))
        .collect::<Result<_>>()?;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let same_src = source_q.same_orbit_f64(&pts[i], &pts[j], tol.max(1e-9));
            let same_tgt =
                target_q.same_orbit_f64(&images[i], &images[j], step_match_tol(tol, &images[i]));
            if same_tgt && !same_src {
                return Err(Error::Evaluation(format!(
                    "lift is not injective on sampled orbits: ({}) and ({}) collide",
                    format_point(&pts[i]),
                    format_point(&pts[j])
                )));
            }
        }
    }
    let eval = |x: &[f64]| lift.eval(x);
    let map = orbit_match_homomorphism(&eval, source_group, target_group, &pts, tol)?;
    let hom = GroupHomomorphism {
        source: source_group.clone(),
        target: target_group.clone(),
        map,
    };
    if !hom.is_homomorphism() {
        return Err(Error::NotHomomorphism {
            detail: "sampled table fails multiplicativity".into(),
        });
    }
    // Derivative cross-check at the origin.
    let origin = vec![0.0; lift.in_dim];
    if region.contains(&origin) {
        let jac = lift.jacobian(&origin, 1e-5)?;
        let l = Matrix::from_f64_rows(&jac);
        if let Ok(l_inv) = l.inverse(crate::scalar::ScalarMode::approx_default()) {
            let fd_tol = 1e-6;
            for (gi, &ti) in hom.map.iter().enumerate() {
                let g64 = Matrix::from_f64_rows(&source_group.element(gi).to_f64_rows());
                let conj = l.mul(&g64).mul(&l_inv);
                let target64 = Matrix::from_f64_rows(&target_group.element(ti).to_f64_rows());
                let scale = 1.0 + target64.max_abs();
                if conj.frobenius_distance(&target64) > fd_tol * scale {
                    return Err(Error::NotHomomorphism {
                        detail: format!(
                            "jacobian conjugation disagrees with the table at element {gi}"
                        ),
                    });
                }
            }
        }
    }
    Ok(hom)
}

/// Transport a stabilizer through a lift: the Jacobian at `u` must conjugate
/// the stabilizer of `u` onto the stabilizer of the image point. Returns the
/// Jacobian and whether the sampled check passed.
pub fn stabilizer_transport(
    lift: &MapExpr,
    source: &LinearQuotient,
    target: &LinearQuotient,
    u: &[f64],
    tol: f64,
) -> Result<(Matrix, bool)> {
    let jac = lift.jacobian(u, 1e-5)?;
    let l = Matrix::from_f64_rows(&jac);
    let mode = crate::scalar::ScalarMode::approx_default();
    let det = l.determinant(mode)?.to_f64();
    if det.abs() < 1e-9 {
        return Err(Error::SingularJacobian { det });
    }
    let l_inv = l.inverse(mode)?;
    let image = lift.eval(u)?;
    let fd_tol = tol.max(1e-6);
    let stab_tol = tol.max(1e-7);
    let src_stab = source.group().stabilizer_indices_f64(u, stab_tol);
    let tgt_stab = target.group().stabilizer_indices_f64(&image, stab_tol);
    if src_stab.len() != tgt_stab.len() {
        return Ok((l, false));
    }
    let mut matched = vec![false; tgt_stab.len()];
    for &si in &src_stab {
        let g64 = Matrix::from_f64_rows(&source.group().element(si).to_f64_rows());
        let conj = l.mul(&g64).mul(&l_inv);
        let mut found = false;
        for (slot, &ti) in tgt_stab.iter().enumerate() {
            if matched[slot] {
                continue;
            }
            let t64 = Matrix::from_f64_rows(&target.group().element(ti).to_f64_rows());
            if conj.frobenius_distance(&t64) <= fd_tol * (1.0 + t64.max_abs()) {
                matched[slot] = true;
                found = true;
                break;
            }
        }
        if !found {
            return Ok((l, false));
        }
    }
    Ok((l, true))
}

/// Options for the radial extension engine.
#[derive(Debug, Clone)]
pub struct ExtensionOptions {
    /// Ring growth factor per round.
    pub growth: f64,
    /// Ring anchor spacing as a fraction of the smallest local slice radius.
    pub spacing_fraction: f64,
    /// Numeric tolerance for matching orbit points.
    pub tol: f64,
    /// Anchors drawn per patch when computing its homomorphism.
    pub hom_samples: usize,
    /// Center the rings somewhere other than the origin.
    pub center: Option<Vec<f64>>,
    /// Cap the outermost ring radius (measured from the center); otherwise
    /// derived from the source region.
    pub max_radius: Option<f64>,
}

impl Default for ExtensionOptions {
    fn default() -> Self {
        ExtensionOptions {
            growth: 1.2,
            spacing_fraction: 0.4,
            tol: 1e-9,
            hom_samples: 12,
            center: None,
            max_radius: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftStatus {
    Lifted,
    NonLiftable,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub enum Obstruction {
    /// A loop at the given radius fails to close; the element is the index
    /// of the mismatch in the target group.
    Monodromy { radius: f64, element: usize },
    /// Two radial patches force homomorphisms that differ even after
    /// conjugation. Each patch tuple is (radius where its homomorphism was
    /// pinned, patch outer radius).
    ConflictingHomomorphisms {
        patch_a: (f64, f64),
        patch_b: (f64, f64),
        map_a: Vec<usize>,
        map_b: Vec<usize>,
    },
}

/// One maximal radial band over which continuation never broke and the
/// ring-sampled homomorphism never changed.
#[derive(Debug, Clone)]
pub struct Patch {
    pub r_in: f64,
    pub r_out: f64,
    /// Sampled homomorphism carried by the patch lift, when determinable.
    pub homomorphism: Option<Vec<usize>>,
    /// Radius of the first ring that pinned the homomorphism.
    pub hom_radius: Option<f64>,
    /// Anchor points and lifted values.
    pub table: Vec<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone)]
pub struct LiftReport {
    pub status: LiftStatus,
    pub obstruction: Option<Obstruction>,
    pub patches: Vec<Patch>,
    /// Largest deviation of a lifted value from the image orbit.
    pub max_residual: f64,
}

/// Grow a lift of `f` outward sphere by sphere, mirroring the radial
/// construction: each ring is covered by anchors spaced below the local
/// slice radius, lifted by continuation from the previous ring, and checked
/// for closure around the ring. A failed closure is a monodromy
/// obstruction; a blocked radial step starts a fresh patch, and patches
/// must agree on the induced homomorphism up to conjugation.
pub fn radial_lift_extension(
    f: &QuotientMap,
    rho: f64,
    local_lift: &MapExpr,
    opts: &ExtensionOptions,
) -> Result<LiftReport> {
    let n = f.source.quotient.dim();
    assert!(n >= 1 && n <= 3, "radial extension supports dimensions 1-3");
    let cen = opts.center.clone().unwrap_or_else(|| vec![0.0; n]);
    assert_eq!(cen.len(), n);
    let (r_start, range_stop) = radial_range(&f.source.region, rho);
    let r_stop = opts.max_radius.unwrap_or(range_stop);
    // Base anchor and seed value from the declared local lift.
    let base_point = first_ring_point(&f.source.region, n, r_start, &cen)
        .ok_or_else(|| Error::Evaluation("no ring point inside the source region".into()))?;
    let base_value = local_lift.eval(&base_point)?;
    let image0 = f.eval_rep(&base_point)?;
    if !f
        .target
        .quotient
        .same_orbit_f64(&base_value, &image0, step_match_tol(opts.tol, &base_value))
    {
        return Err(Error::SeedOffOrbit);
    }

    let mut patches: Vec<Patch> = Vec::new();
    let mut current = Patch {
        r_in: r_start,
        r_out: r_start,
        homomorphism: None,
        hom_radius: None,
        table: Vec::new(),
    };
    let mut obstruction: Option<Obstruction> = None;
    let mut prev_ring: Option<Vec<(Vec<f64>, Vec<f64>)>> = None;

    let mut r = r_start;
    while r <= r_stop * (1.0 + 1e-12) {
        let ring = match build_ring(
            f,
            n,
            r,
            prev_ring.as_deref(),
            &base_point,
            &base_value,
            &cen,
            opts,
        ) {
            Ok(RingResult::Ring(anchors)) => anchors,
            Ok(RingResult::Monodromy(element)) => {
                obstruction = Some(Obstruction::Monodromy { radius: r, element });
                break;
            }
            Ok(RingResult::Blocked) => {
                // Close the current patch and reseed beyond the wall.
                if !current.table.is_empty() {
                    patches.push(std::mem::replace(
                        &mut current,
                        Patch {
                            r_in: r,
                            r_out: r,
                            homomorphism: None,
                            hom_radius: None,
                            table: Vec::new(),
                        },
                    ));
                }
                match reseed_ring(f, n, r, &cen, opts)? {
                    Some(RingResult::Ring(anchors)) => {
                        current.r_in = r;
                        anchors
                    }
                    Some(RingResult::Monodromy(element)) => {
                        obstruction = Some(Obstruction::Monodromy { radius: r, element });
                        break;
                    }
                    _ => {
                        // Ring cannot be pinned even fresh; skip it.
                        prev_ring = None;
                        r *= opts.growth;
                        continue;
                    }
                }
            }
            Err(e) => return Err(e),
        };
        // Equivariance is a local property: each ring votes on the element
        // intertwined with every source generator, and a ring whose vote
        // contradicts the patch so far opens a new patch there. (Smooth maps
        // glued flatly along zero bands never block the continuation, so
        // walls alone cannot separate annuli with incompatible symmetry.)
        let ring_hom = ring_homomorphism(f, &ring);
        let conflicts = match (&current.homomorphism, &ring_hom) {
            (Some(a), Some(b)) => {
                f.source.quotient.group().order() > 1
                    && !homs_conjugate(f.target.quotient.group(), a, b)
            }
            _ => false,
        };
        if conflicts && !current.table.is_empty() {
            patches.push(std::mem::replace(
                &mut current,
                Patch {
                    r_in: r,
                    r_out: r,
                    homomorphism: None,
                    hom_radius: None,
                    table: Vec::new(),
                },
            ));
        }
        if current.homomorphism.is_none() {
            if let Some(h) = &ring_hom {
                current.homomorphism = Some(h.clone());
                current.hom_radius = Some(r);
            }
        }
        current.r_out = r;
        current.table.extend(ring.iter().cloned());
        prev_ring = Some(ring);
        r *= opts.growth;
    }

    if !current.table.is_empty() {
        patches.push(current);
    }

    let max_residual = patches
        .iter()
        .flat_map(|p| p.table.iter())
        .map(|(x, v)| {
            let rep = f.eval_rep(x).unwrap_or_else(|_| v.clone());
            f.target
                .quotient
                .group()
                .orbit_f64(&rep)
                .iter()
                .map(|c| euclid_dist(c, v))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);

    if obstruction.is_none() && patches.len() > 1 {
        // Compare patch homomorphisms pairwise up to conjugation, outermost
        // pairs first so the reported conflict names the widest annuli.
        'outer: for i in (1..patches.len()).rev() {
            for j in (0..i).rev() {
                if let (Some(a), Some(b)) = (&patches[i].homomorphism, &patches[j].homomorphism) {
                    if !homs_conjugate(f.target.quotient.group(), a, b)
                        && f.source.quotient.group().order() > 1
                    {
                        obstruction = Some(Obstruction::ConflictingHomomorphisms {
                            patch_a: (
                                patches[i].hom_radius.unwrap_or(patches[i].r_in),
                                patches[i].r_out,
                            ),
                            patch_b: (
                                patches[j].hom_radius.unwrap_or(patches[j].r_in),
                                patches[j].r_out,
                            ),
                            map_a: a.clone(),
                            map_b: b.clone(),
                        });
                        break 'outer;
                    }
                }
            }
        }
    }

    let status = if obstruction.is_some() {
        LiftStatus::NonLiftable
    } else if patches.len() <= 1 {
        LiftStatus::Lifted
    } else {
        LiftStatus::Inconclusive
    };
    Ok(LiftReport {
        status,
        obstruction,
        patches,
        max_residual,
    })
}

fn radial_range(region: &Region, rho: f64) -> (f64, f64) {
    match region {
        Region::Ball { radius, .. } => (rho, radius * 0.95),
        Region::Annulus { r1, r2, .. } => (rho.max(r1 * 1.05), r2 * 0.95),
        _ => (rho, Region::DEFAULT_EXTENT * 0.95),
    }
}

fn sphere_point(n: usize, r: f64, theta: f64, phi: f64, cen: &[f64]) -> Vec<f64> {
    match n {
        1 => vec![cen[0] + r * theta.cos()], // theta in {0, pi}
        2 => vec![cen[0] + r * theta.cos(), cen[1] + r * theta.sin()],
        _ => vec![
            cen[0] + r * phi.sin() * theta.cos(),
            cen[1] + r * phi.sin() * theta.sin(),
            cen[2] + r * phi.cos(),
        ],
    }
}

fn first_ring_point(region: &Region, n: usize, r: f64, cen: &[f64]) -> Option<Vec<f64>> {
    for k in 0..64 {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
        let p = sphere_point(n, r, theta, std::f64::consts::FRAC_PI_2, cen);
        if region.contains(&p) {
            return Some(p);
        }
    }
    None
}

enum RingResult {
    Ring(Vec<(Vec<f64>, Vec<f64>)>),
    Monodromy(usize),
    Blocked,
}

/// Anchor count for a ring: circumference over a fraction of the smallest
/// local slice radius, clamped.
fn ring_anchor_count(
    f: &QuotientMap,
    n: usize,
    r: f64,
    cen: &[f64],
    opts: &ExtensionOptions,
) -> usize {
    if n == 1 {
        return 2;
    }
    let mut min_eps = f64::INFINITY;
    for k in 0..64 {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
        let p = sphere_point(n, r, theta, std::f64::consts::FRAC_PI_2, cen);
        if let Some(eps) = f.source.quotient.slice_radius_f64(&p, 0.49) {
            if eps > 1e-9 {
                min_eps = min_eps.min(eps);
            }
        }
    }
    let circumference = 2.0 * std::f64::consts::PI * r;
    let by_spacing = if min_eps.is_finite() {
        (circumference / (opts.spacing_fraction * min_eps)).ceil() as usize
    } else {
        16
    };
    by_spacing.clamp(16, 256)
}

fn build_ring(
    f: &QuotientMap,
    n: usize,
    r: f64,
    prev: Option<&[(Vec<f64>, Vec<f64>)]>,
    base_point: &[f64],
    base_value: &[f64],
    cen: &[f64],
    opts: &ExtensionOptions,
) -> Result<RingResult> {
    if n == 1 {
        return build_ring_1d(f, r, prev, base_point, base_value, cen, opts);
    }
    if n == 3 {
        return build_sphere(f, r, prev, base_point, base_value, cen, opts);
    }
    let m = ring_anchor_count(f, n, r, cen, opts);
    let region = &f.source.region;
    let angles: Vec<f64> = (0..m)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / m as f64)
        .collect();
    let pts: Vec<Vec<f64>> = angles
        .iter()
        .map(|&t| sphere_point(2, r, t, 0.0, cen))
        .collect();
    // Partial rings (region not rotation-invariant at this radius) are not
    // continued; treat as a wall.
    if pts.iter().any(|p| !region.contains(p)) {
        return Ok(RingResult::Blocked);
    }

    // Entry value: radial continuation from the previous ring, or the base
    // germ for the first ring.
    let entry = match prev {
        None => {
            let p0 = &pts[0];
            if euclid_dist(p0, base_point) < 1e-12 {
                base_value.to_vec()
            } else {
                match continue_along(
                    f,
                    |t| lerp_polar(base_point, p0, t, cen),
                    base_value,
                    opts.tol,
                ) {
                    Ok(v) => v,
                    Err(Error::StepTooLarge { .. }) => return Ok(RingResult::Blocked),
                    Err(e) => return Err(e),
                }
            }
        }
        Some(prev_ring) => {
            let p0 = &pts[0];
            let (from_pt, from_val) = prev_ring
                .iter()
                .min_by(|a, b| {
                    euclid_dist(&a.0, p0)
                        .partial_cmp(&euclid_dist(&b.0, p0))
                        .unwrap()
                })
                .map(|(p, v)| (p.clone(), v.clone()))
                .unwrap();
            match continue_along(f, |t| lerp_polar(&from_pt, p0, t, cen), &from_val, opts.tol) {
                Ok(v) => v,
                Err(Error::StepTooLarge { .. }) => return Ok(RingResult::Blocked),
                Err(e) => return Err(e),
            }
        }
    };

    // Walk the ring by arcs.
    let mut anchors: Vec<(Vec<f64>, Vec<f64>)> = vec![(pts[0].clone(), entry)];
    for k in 1..m {
        let prev_val = anchors[k - 1].1.clone();
        let (a0, a1) = (angles[k - 1], angles[k]);
        let val = match continue_along(
            f,
            |t| sphere_point(2, r, a0 + (a1 - a0) * t, 0.0, cen),
            &prev_val,
            opts.tol,
        ) {
            Ok(v) => v,
            Err(Error::StepTooLarge { .. }) => return Ok(RingResult::Blocked),
            Err(e) => return Err(e),
        };
        anchors.push((pts[k].clone(), val));
    }
    // Closure: continue from the last anchor back to angle 2 pi.
    let last_val = anchors[m - 1].1.clone();
    let closed = match continue_along(
        f,
        |t| {
            sphere_point(
                2,
                r,
                angles[m - 1] + (2.0 * std::f64::consts::PI - angles[m - 1]) * t,
                0.0,
                cen,
            )
        },
        &last_val,
        opts.tol,
    ) {
        Ok(v) => v,
        Err(Error::StepTooLarge { .. }) => return Ok(RingResult::Blocked),
        Err(e) => return Err(e),
    };
    let start_val = &anchors[0].1;
    let mtol = step_match_tol(opts.tol, start_val);
    if euclid_dist(&closed, start_val) > mtol {
        // The loop picked up a group element.
        let group = f.target.quotient.group();
        let element = (0..group.order())
            .find(|&i| euclid_dist(&group.element(i).apply_f64(start_val), &closed) <= mtol)
            .ok_or(Error::NoGroupElement)?;
        return Ok(RingResult::Monodromy(element));
    }
    Ok(RingResult::Ring(anchors))
}

fn build_ring_1d(
    f: &QuotientMap,
    r: f64,
    prev: Option<&[(Vec<f64>, Vec<f64>)]>,
    base_point: &[f64],
    base_value: &[f64],
    cen: &[f64],
    opts: &ExtensionOptions,
) -> Result<RingResult> {
    let mut anchors = Vec::new();
    for &sign in &[1.0f64, -1.0] {
        let p = vec![cen[0] + sign * r];
        if !f.source.region.contains(&p) {
            continue;
        }
        let (from_pt, from_val) = match prev {
            Some(ring) => match ring.iter().find(|(q, _)| (q[0] - cen[0]) * sign > 0.0) {
                Some((q, v)) => (q.clone(), v.clone()),
                None => (base_point.to_vec(), base_value.to_vec()),
            },
            None => (base_point.to_vec(), base_value.to_vec()),
        };
        match continue_along(
            f,
            |t| vec![from_pt[0] + (p[0] - from_pt[0]) * t],
            &from_val,
            opts.tol,
        ) {
            Ok(v) => anchors.push((p, v)),
            Err(Error::StepTooLarge { .. }) => return Ok(RingResult::Blocked),
            Err(e) => return Err(e),
        }
    }
    if anchors.is_empty() {
        Ok(RingResult::Blocked)
    } else {
        Ok(RingResult::Ring(anchors))
    }
}

/// Latitude-longitude cover of the 2-sphere; each latitude ring is walked
/// and closed like a circle, seeded from the previous latitude.
fn build_sphere(
    f: &QuotientMap,
    r: f64,
    prev: Option<&[(Vec<f64>, Vec<f64>)]>,
    base_point: &[f64],
    base_value: &[f64],
    cen: &[f64],
    opts: &ExtensionOptions,
) -> Result<RingResult> {
    let lat_count = 8usize;
    let lon_count = 16usize;
    let pole = sphere_point(3, r, 0.0, 0.0, cen);
    let entry = match prev {
        None => {
            match continue_along(
                f,
                |t| lerp_polar(base_point, &pole, t, cen),
                base_value,
                opts.tol,
            ) {
                Ok(v) => v,
                Err(Error::StepTooLarge { .. }) => return Ok(RingResult::Blocked),
                Err(e) => return Err(e),
            }
        }
        Some(ring) => {
            let (from_pt, from_val) = ring
                .iter()
                .min_by(|a, b| {
                    euclid_dist(&a.0, &pole)
                        .partial_cmp(&euclid_dist(&b.0, &pole))
                        .unwrap()
                })
                .map(|(p, v)| (p.clone(), v.clone()))
                .unwrap();
            match continue_along(f, |t| lerp_polar(&from_pt, &pole, t, cen), &from_val, opts.tol) {
                Ok(v) => v,
                Err(Error::StepTooLarge { .. }) => return Ok(RingResult::Blocked),
                Err(e) => return Err(e),
            }
        }
    };
    let mut anchors: Vec<(Vec<f64>, Vec<f64>)> = vec![(pole, entry)];
    let mut prev_lat_first = anchors[0].clone();
    for li in 1..=lat_count {
        let phi = std::f64::consts::PI * li as f64 / (lat_count + 1) as f64;
        let first_pt = sphere_point(3, r, 0.0, phi, cen);
        let first_val = match continue_along(
            f,
            |t| lerp_polar(&prev_lat_first.0, &first_pt, t, cen),
            &prev_lat_first.1,
            opts.tol,
        ) {
            Ok(v) => v,
            Err(Error::StepTooLarge { .. }) => return Ok(RingResult::Blocked),
            Err(e) => return Err(e),
        };
        let mut lat_ring = vec![(first_pt.clone(), first_val)];
        for lo in 1..lon_count {
            let t0 = 2.0 * std::f64::consts::PI * (lo - 1) as f64 / lon_count as f64;
            let t1 = 2.0 * std::f64::consts::PI * lo as f64 / lon_count as f64;
            let prev_val = lat_ring[lo - 1].1.clone();
            let val = match continue_along(
                f,
                |t| sphere_point(3, r, t0 + (t1 - t0) * t, phi, cen),
                &prev_val,
                opts.tol,
            ) {
                Ok(v) => v,
                Err(Error::StepTooLarge { .. }) => return Ok(RingResult::Blocked),
                Err(e) => return Err(e),
            };
            lat_ring.push((sphere_point(3, r, t1, phi, cen), val));
        }
        // Close the latitude ring.
        let t_last = 2.0 * std::f64::consts::PI * (lon_count - 1) as f64 / lon_count as f64;
        let closed = match continue_along(
            f,
            |t| sphere_point(3, r, t_last + (2.0 * std::f64::consts::PI - t_last) * t, phi, cen),
            &lat_ring[lon_count - 1].1,
            opts.tol,
        ) {
            Ok(v) => v,
            Err(Error::StepTooLarge { .. }) => return Ok(RingResult::Blocked),
            Err(e) => return Err(e),
        };
        let mtol = step_match_tol(opts.tol, &lat_ring[0].1);
        if euclid_dist(&closed, &lat_ring[0].1) > mtol {
            let group = f.target.quotient.group();
            let element = (0..group.order())
                .find(|&i| {
                    euclid_dist(&group.element(i).apply_f64(&lat_ring[0].1), &closed) <= mtol
                })
                .ok_or(Error::NoGroupElement)?;
            return Ok(RingResult::Monodromy(element));
        }
        prev_lat_first = lat_ring[0].clone();
        anchors.extend(lat_ring);
    }
    Ok(RingResult::Ring(anchors))
}

/// Fresh seed for a ring beyond a continuation wall: the canonical
/// representative of the image pins a new (arbitrary) branch.
fn reseed_ring(
    f: &QuotientMap,
    n: usize,
    r: f64,
    cen: &[f64],
    opts: &ExtensionOptions,
) -> Result<Option<RingResult>> {
    let p0 = match first_ring_point(&f.source.region, n, r, cen) {
        Some(p) => p,
        None => return Ok(None),
    };
    let rep = f.eval_rep(&p0)?;
    let seed = f.target.quotient.canonical_rep_f64(&rep);
    Ok(Some(build_ring(f, n, r, None, &p0, &seed, cen, opts)?))
}

/// Interpolate between points keeping the radius piecewise linear (walks
/// stay inside annular regions).
fn lerp_polar(a: &[f64], b: &[f64], t: f64, cen: &[f64]) -> Vec<f64> {
    let ac: Vec<f64> = a.iter().zip(cen).map(|(x, c)| x - c).collect();
    let bc: Vec<f64> = b.iter().zip(cen).map(|(x, c)| x - c).collect();
    let straight: Vec<f64> = ac.iter().zip(&bc).map(|(x, y)| x + (y - x) * t).collect();
    let ra = euclid_norm(&ac);
    let rb = euclid_norm(&bc);
    let rs = euclid_norm(&straight);
    if rs < 1e-12 {
        return straight.iter().zip(cen).map(|(x, c)| x + c).collect();
    }
    let want = ra + (rb - ra) * t;
    straight
        .iter()
        .zip(cen)
        .map(|(x, c)| x * want / rs + c)
        .collect()
}

/// Relative margin for aligning an anchor value with its representative
/// sheet and for matching the intertwined element. Relative (not absolute)
/// so that flat tails, however deep, still carry equivariance information.
const SHEET_REL_TOL: f64 = 1e-6;

/// Homomorphism evidence carried by one ring of anchors: for each source
/// element, the target element that intertwines the lift on every
/// informative anchor. Matching is relative to the value magnitude, and the
/// lift at `g u` is read off by sheet continuation of the representative
/// (anchor value = some orbit member of the representative; the same orbit
/// member at `g u` is the continuous branch through the anchor, since the
/// ring has constant value magnitude). Rings whose anchors are all zero, or
/// where the vote is not unanimous, return `None`.
fn ring_homomorphism(f: &QuotientMap, ring: &[(Vec<f64>, Vec<f64>)]) -> Option<Vec<usize>> {
    if ring.is_empty() {
        return None;
    }
    let source = f.source.quotient.group();
    let target = f.target.quotient.group();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut map = Vec::with_capacity(source.order());
    for gi in 0..source.order() {
        let g = source.element(gi);
        let mut candidates: Option<Vec<usize>> = None;
        for (u, lu) in ring {
            let m = norm(lu);
            if m == 0.0 {
                continue;
            }
            let rep_u = match f.eval_rep(u) {
                Ok(v) => v,
                Err(_) => continue,
            };
            // Identify which orbit member of the representative the anchor
            // carries; skip the anchor if that sheet is not unambiguous.
            let sheets: Vec<usize> = (0..target.order())
                .filter(|&j| euclid_dist(&target.element(j).apply_f64(&rep_u), lu) <= SHEET_REL_TOL * m)
                .collect();
            if sheets.len() != 1 {
                continue;
            }
            let gu = g.apply_f64(u);
            let rep_gu = match f.eval_rep(&gu) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let l_gu = target.element(sheets[0]).apply_f64(&rep_gu);
            let here: Vec<usize> = (0..target.order())
                .filter(|&j| euclid_dist(&target.element(j).apply_f64(lu), &l_gu) <= SHEET_REL_TOL * m)
                .collect();
            candidates = Some(match candidates {
                None => here,
                Some(prev) => prev.into_iter().filter(|c| here.contains(c)).collect(),
            });
            if candidates.as_ref().map_or(false, |c| c.is_empty()) {
                return None;
            }
        }
        match candidates {
            Some(c) if c.len() == 1 => map.push(c[0]),
            _ => return None,
        }
    }
    Some(map)
}

fn homs_conjugate(target: &FiniteMatrixGroup, a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    (0..target.order()).any(|s| {
        let s_inv = target.inverse(s);
        a.iter()
            .zip(b)
            .all(|(&x, &y)| target.mult(target.mult(s, x), s_inv) == y)
    })
}

fn format_point(x: &[f64]) -> String {
    x.iter()
        .map(|v| format!("{v:.6}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Outcome of flooding a lift over a sampled grid.
#[derive(Debug, Clone)]
pub enum GridOutcome {
    /// Consistent lift at every reached grid point.
    Lifted(Vec<(Vec<f64>, Vec<f64>)>),
    /// A grid cycle fails to close: continuing `from`'s value along the
    /// edge into `at` produced `continued`, but the flood had `stored`.
    Defect {
        at: Vec<f64>,
        stored: Vec<f64>,
        continued: Vec<f64>,
    },
}

/// Flood a lifted value over the sampled grid of a region, starting from
/// the grid point nearest `start`. Tree edges propagate values; every other
/// adjacency is then re-walked, and any mismatch is a cycle defect (the
/// sampled monodromy obstruction). Edges that cannot be continued are
/// skipped, so walls simply limit coverage.
pub fn grid_lift(
    map: &impl OrbitValued,
    region: &Region,
    resolution: usize,
    start: &[f64],
    start_val: &[f64],
    tol: f64,
) -> Result<GridOutcome> {
    let (pts, h) = region.grid(resolution);
    if pts.is_empty() {
        return Err(Error::Evaluation("region grid is empty".into()));
    }
    let n = pts.len();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if euclid_dist(&pts[i], &pts[j]) <= h * 1.6 {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    let start_idx = (0..n)
        .min_by(|&i, &j| {
            euclid_dist(&pts[i], start)
                .partial_cmp(&euclid_dist(&pts[j], start))
                .unwrap()
        })
        .unwrap();
    let mut values: Vec<Option<Vec<f64>>> = vec![None; n];
    let seg = |a: Vec<f64>, b: Vec<f64>| move |t: f64| -> Vec<f64> {
        a.iter().zip(&b).map(|(x, y)| x + (y - x) * t).collect()
    };
    let entry = continue_along(
        map,
        seg(start.to_vec(), pts[start_idx].clone()),
        start_val,
        tol,
    )?;
    values[start_idx] = Some(entry);
    let mut queue = std::collections::VecDeque::from([start_idx]);
    let mut tree_edges: Vec<(usize, usize)> = Vec::new();
    while let Some(i) = queue.pop_front() {
        let vi = values[i].clone().unwrap();
        for &j in &neighbors[i] {
            if values[j].is_some() {
                continue;
            }
            match continue_along(map, seg(pts[i].clone(), pts[j].clone()), &vi, tol) {
                Ok(vj) => {
                    values[j] = Some(vj);
                    tree_edges.push((i, j));
                    queue.push_back(j);
                }
                Err(Error::StepTooLarge { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    // Cross-check every remaining adjacency between valued points.
    for i in 0..n {
        let Some(vi) = values[i].clone() else { continue };
        for &j in &neighbors[i] {
            if j < i || values[j].is_none() {
                continue;
            }
            if tree_edges.contains(&(i, j)) || tree_edges.contains(&(j, i)) {
                continue;
            }
            match continue_along(map, seg(pts[i].clone(), pts[j].clone()), &vi, tol) {
                Ok(cont) => {
                    let stored = values[j].clone().unwrap();
                    if euclid_dist(&cont, &stored) > step_match_tol(tol, &stored) {
                        return Ok(GridOutcome::Defect {
                            at: pts[j].clone(),
                            stored,
                            continued: cont,
                        });
                    }
                }
                Err(Error::StepTooLarge { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let table: Vec<(Vec<f64>, Vec<f64>)> = pts
        .into_iter()
        .zip(values)
        .filter_map(|(p, v)| v.map(|v| (p, v)))
        .collect();
    Ok(GridOutcome::Lifted(table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{BallNorm, CmpOp, Cond, Expr};
    use crate::scalar::ScalarMode;

    fn c4_exact() -> FiniteMatrixGroup {
        let g = Matrix::from_int_rows(&[&[0, -1], &[1, 0]], ScalarMode::Exact);
        FiniteMatrixGroup::close_generators(&[g], 100).unwrap()
    }

    fn pm_one(dim: usize) -> FiniteMatrixGroup {
        let mut rows = vec![vec![0i64; dim]; dim];
        for i in 0..dim {
            rows[i][i] = -1;
        }
        let refs: Vec<&[i64]> = rows.iter().map(|r| r.as_slice()).collect();
        let g = Matrix::from_int_rows(&refs, ScalarMode::Exact);
        FiniteMatrixGroup::close_generators(&[g], 100).unwrap()
    }

    fn trivial_region(dim: usize, region: Region) -> QuotientRegion {
        QuotientRegion {
            quotient: LinearQuotient::new(FiniteMatrixGroup::trivial(dim, ScalarMode::Exact)),
            region,
        }
    }

    fn ball(center: &[f64], radius: f64) -> Region {
        Region::Ball {
            center: center.to_vec(),
            radius,
            norm: BallNorm::Euclid,
        }
    }

    /// Square-root covering written through representatives: polar
    /// half-angle with the branch cut on the positive x-axis, radius kept.
    fn sqrt_cover_rep() -> MapExpr {
        let r = Expr::Radial;
        let half = |sign: f64, num: Expr| {
            Expr::Sqrt(Box::new(Expr::Mul(
                Box::new(Expr::Const(0.5 * sign)),
                Box::new(Expr::Add(
                    Box::new(Expr::Const(if sign > 0.0 { 1.0 } else { -1.0 })),
                    Box::new(Expr::Mul(
                        Box::new(Expr::Const(if sign > 0.0 { 1.0 } else { -1.0 })),
                        Box::new(num),
                    )),
                )),
            )))
        };
        // cos(t/2) = sign(y) sqrt((1 + x/r)/2), sin(t/2) = sqrt((1 - x/r)/2)
        let x_over_r = Expr::Div(Box::new(Expr::Coord(0)), Box::new(Expr::Radial));
        let cos_half = Expr::Piecewise {
            branches: vec![(
                Cond {
                    lhs: Expr::Coord(1),
                    op: CmpOp::Ge,
                    rhs: 0.0,
                },
                half(1.0, x_over_r.clone()),
            )],
            otherwise: Box::new(Expr::Neg(Box::new(half(1.0, x_over_r.clone())))),
        };
        let sin_half = Expr::Sqrt(Box::new(Expr::Mul(
            Box::new(Expr::Const(0.5)),
            Box::new(Expr::Sub(
                Box::new(Expr::Const(1.0)),
                Box::new(x_over_r),
            )),
        )));
        MapExpr::new(
            2,
            vec![
                Expr::Mul(Box::new(r.clone()), Box::new(cos_half)),
                Expr::Mul(Box::new(r), Box::new(sin_half)),
            ],
        )
    }

    fn sqrt_cover_map() -> QuotientMap {
        let source = trivial_region(
            2,
            Region::Annulus {
                dim: 2,
                r1: 0.5,
                r2: 2.0,
            },
        );
        let target = QuotientRegion {
            quotient: LinearQuotient::new(pm_one(2)),
            region: Region::FullSpace {
                dim: 2,
                extent: Region::DEFAULT_EXTENT,
            },
        };
        QuotientMap::new(source, target, sqrt_cover_rep())
    }

    fn circle_path(r: f64, steps: usize, turns: f64) -> Vec<Vec<f64>> {
        (0..=steps)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * turns * k as f64 / steps as f64;
                vec![r * t.cos(), r * t.sin()]
            })
            .collect()
    }

    #[test]
    fn sqrt_cover_is_well_defined_on_orbits() {
        let f = sqrt_cover_map();
        let bad = f.check_well_defined(120, 7, 1e-7).unwrap();
        assert!(bad.is_empty(), "offending points: {bad:?}");
    }

    #[test]
    fn full_loop_around_sqrt_cover_has_antipodal_monodromy() {
        let f = sqrt_cover_map();
        let path = circle_path(1.0, 96, 1.0);
        let seed = f.eval_rep(&path[0]).unwrap();
        let m = monodromy(&f, &path, &seed, 1e-9).unwrap();
        let g = Matrix::from_int_rows(&[&[-1, 0], &[0, -1]], ScalarMode::Exact);
        let minus = f.target.quotient.group().find_element(&g).unwrap();
        assert_eq!(m, minus);
        // A double loop closes up.
        let path2 = circle_path(1.0, 192, 2.0);
        let m2 = monodromy(&f, &path2, &seed, 1e-9).unwrap();
        assert_eq!(m2, 0);
    }

    #[test]
    fn path_lift_rejects_seed_off_orbit() {
        let f = sqrt_cover_map();
        let path = circle_path(1.0, 16, 0.25);
        let err = path_lift(&f, &path, &[5.0, 5.0], 1e-9).unwrap_err();
        assert!(matches!(err, Error::SeedOffOrbit));
    }

    #[test]
    fn path_lift_rejects_ambiguous_steps() {
        // Identity representatives into the +-1 plane quotient: a long jump
        // towards the opposite sign cannot decide between the two sheets.
        let source = trivial_region(2, ball(&[0.0, 0.0], 3.0));
        let target = QuotientRegion {
            quotient: LinearQuotient::new(pm_one(2)),
            region: Region::FullSpace {
                dim: 2,
                extent: 4.0,
            },
        };
        let f = QuotientMap::new(source, target, MapExpr::identity(2));
        let path = vec![vec![1.0, 0.0], vec![0.05, 0.0]];
        let err = path_lift(&f, &path, &[1.0, 0.0], 1e-9).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { index: 1, .. }));
    }

    #[test]
    fn unique_element_recovers_planted_rotation() {
        let group = c4_exact();
        let rot = MapExpr::affine(&group.element(1).to_f64_rows(), &[0.0, 0.0]);
        let region = ball(&[1.0, 0.5], 0.4);
        let idx = unique_group_element(&rot, &region, &group, 40, 3, 1e-9).unwrap();
        assert_eq!(idx, 1);
    }

    #[test]
    fn unique_element_reports_per_component_mismatch() {
        let group = c4_exact();
        // Rotation on the right component, identity on the left one.
        let split = |rot: Expr, id: Expr| Expr::Piecewise {
            branches: vec![(
                Cond {
                    lhs: Expr::Coord(0),
                    op: CmpOp::Ge,
                    rhs: 0.0,
                },
                rot,
            )],
            otherwise: Box::new(id),
        };
        let h = MapExpr::new(
            2,
            vec![
                split(Expr::Neg(Box::new(Expr::Coord(1))), Expr::Coord(0)),
                split(Expr::Coord(0), Expr::Coord(1)),
            ],
        );
        let region = Region::Union(vec![ball(&[1.3, 0.2], 0.3), ball(&[-1.3, 0.2], 0.3)]);
        let err = unique_group_element(&h, &region, &group, 60, 5, 1e-9).unwrap_err();
        assert!(matches!(err, Error::Inconsistent { .. }));
    }

    #[test]
    fn unique_element_rejects_non_orbit_map() {
        let group = c4_exact();
        let h = MapExpr::affine(&[vec![2.0, 0.0], vec![0.0, 2.0]], &[0.0, 0.0]);
        let region = ball(&[1.0, 0.5], 0.4);
        let err = unique_group_element(&h, &region, &group, 20, 3, 1e-9).unwrap_err();
        assert!(matches!(err, Error::NotOrbitPreserving { .. }));
    }

    #[test]
    fn induced_homomorphism_of_linear_conjugation() {
        let group = c4_exact();
        let a = Matrix::from_int_rows(&[&[2, 1], &[1, 1]], ScalarMode::Exact);
        let conj = group.conjugated(&a).unwrap();
        let lift = MapExpr::affine(&a.to_f64_rows(), &[0.0, 0.0]);
        let region = ball(&[0.0, 0.0], 1.5);
        let hom = induced_homomorphism(&lift, &group, &conj, &region, 60, 11, 1e-9).unwrap();
        // The conjugated group lists elements in matching order.
        assert_eq!(hom.map, (0..group.order()).collect::<Vec<_>>());
        assert!(hom.is_homomorphism());
    }

    #[test]
    fn induced_homomorphism_requires_sampled_injectivity() {
        let group = pm_one(1);
        let lift = MapExpr::new(1, vec![Expr::Const(1.0)]);
        let region = Region::FullSpace {
            dim: 1,
            extent: 2.0,
        };
        let err =
            induced_homomorphism(&lift, &group, &group, &region, 30, 2, 1e-9).unwrap_err();
        let text = format!("{err}");
        assert!(text.contains("injective"), "{text}");
    }

    #[test]
    fn stabilizer_transport_through_rotation() {
        let refl = Matrix::from_int_rows(&[&[1, 0], &[0, -1]], ScalarMode::Exact);
        let minus = Matrix::from_int_rows(&[&[-1, 0], &[0, 1]], ScalarMode::Exact);
        let dihedral =
            FiniteMatrixGroup::close_generators(&[refl, minus], 100).unwrap();
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let rot45 = Matrix::from_f64_rows(&[vec![c, -c], vec![c, c]]);
        let target_group = dihedral
            .to_approx(1e-9)
            .conjugated(&rot45)
            .unwrap();
        let source = LinearQuotient::new(dihedral);
        let target = LinearQuotient::new(target_group);
        let lift = MapExpr::affine(&rot45.to_f64_rows(), &[0.0, 0.0]);
        let (_l, ok) = stabilizer_transport(&lift, &source, &target, &[1.0, 0.0], 1e-7).unwrap();
        assert!(ok);
        // Against a trivial target the stabilizer counts cannot match.
        let trivial = LinearQuotient::new(FiniteMatrixGroup::trivial(2, ScalarMode::Exact));
        let (_l, ok) =
            stabilizer_transport(&MapExpr::identity(2), &source, &trivial, &[1.0, 0.0], 1e-7)
                .unwrap();
        assert!(!ok);
    }

    #[test]
    fn radial_extension_lifts_a_linear_conjugation() {
        let group = c4_exact();
        let a = Matrix::from_int_rows(&[&[2, 1], &[1, 1]], ScalarMode::Exact);
        let conj = group.conjugated(&a).unwrap();
        let lift_expr = MapExpr::affine(&a.to_f64_rows(), &[0.0, 0.0]);
        let source = QuotientRegion {
            quotient: LinearQuotient::new(group),
            region: ball(&[0.0, 0.0], 1.5),
        };
        let target = QuotientRegion {
            quotient: LinearQuotient::new(conj),
            region: Region::FullSpace {
                dim: 2,
                extent: 6.0,
            },
        };
        let f = QuotientMap::new(source, target, lift_expr.clone());
        let report =
            radial_lift_extension(&f, 0.1, &lift_expr, &ExtensionOptions::default()).unwrap();
        assert_eq!(report.status, LiftStatus::Lifted);
        assert_eq!(report.patches.len(), 1);
        assert!(report.max_residual < 1e-9);
        // The continued lift reproduces the planted map exactly (same germ).
        for (x, v) in report.patches[0].table.iter().take(40) {
            let want = lift_expr.eval(x).unwrap();
            assert!(euclid_dist(v, &want) < 1e-7, "{x:?} -> {v:?} vs {want:?}");
        }
        let hom = report.patches[0].homomorphism.as_ref().unwrap();
        assert_eq!(hom, &(0..4).collect::<Vec<_>>());
    }

    #[test]
    fn radial_extension_detects_cover_monodromy() {
        let f = sqrt_cover_map();
        // Local lift: the chosen branch of the half-angle formula.
        let branch = sqrt_cover_rep();
        let report =
            radial_lift_extension(&f, 0.6, &branch, &ExtensionOptions::default()).unwrap();
        assert_eq!(report.status, LiftStatus::NonLiftable);
        match report.obstruction {
            Some(Obstruction::Monodromy { element, .. }) => {
                let g = Matrix::from_int_rows(&[&[-1, 0], &[0, -1]], ScalarMode::Exact);
                let minus = f.target.quotient.group().find_element(&g).unwrap();
                assert_eq!(element, minus);
            }
            other => panic!("expected monodromy, got {other:?}"),
        }
    }

    /// Two annuli carrying incompatible equivariance: the inner one lifts
    /// with the identity homomorphism, the outer one only with the trivial
    /// one, and the zero band between them breaks every continuation.
    #[test]
    fn radial_extension_reports_conflicting_patch_homomorphisms() {
        let bump2 = |a: f64, b: f64, e: Expr| {
            // (r-a)^2 (b-r)^2 scaled to peak near 1, times e.
            let r = Expr::Radial;
            let up = Expr::Sub(Box::new(r.clone()), Box::new(Expr::Const(a)));
            let down = Expr::Sub(Box::new(Expr::Const(b)), Box::new(r));
            let prof = Expr::Mul(
                Box::new(Expr::Mul(Box::new(up.clone()), Box::new(up))),
                Box::new(Expr::Mul(Box::new(down.clone()), Box::new(down))),
            );
            let scale = 16.0 / (b - a).powi(4);
            Expr::Mul(
                Box::new(Expr::Mul(Box::new(Expr::Const(scale)), Box::new(prof))),
                Box::new(e),
            )
        };
        let band = |upper: f64, body: Expr| {
            (
                Cond {
                    lhs: Expr::Radial,
                    op: CmpOp::Le,
                    rhs: upper,
                },
                body,
            )
        };
        let comp = |equivariant: Expr, invariant: Expr| Expr::Piecewise {
            branches: vec![
                band(0.2, Expr::Const(0.0)),
                band(0.3, bump2(0.2, 0.3, equivariant)),
                band(0.35, Expr::Const(0.0)),
                band(0.45, bump2(0.35, 0.45, invariant)),
            ],
            otherwise: Box::new(Expr::Const(0.0)),
        };
        let rep = MapExpr::new(
            2,
            vec![
                comp(Expr::Coord(0), Expr::Radial),
                comp(Expr::Coord(1), Expr::Const(0.0)),
            ],
        );
        let source = QuotientRegion {
            quotient: LinearQuotient::new(pm_one(2)),
            region: ball(&[0.0, 0.0], 0.48),
        };
        let target = QuotientRegion {
            quotient: LinearQuotient::new(pm_one(2)),
            region: Region::FullSpace {
                dim: 2,
                extent: 2.0,
            },
        };
        let f = QuotientMap::new(source, target, rep.clone());
        assert!(f.check_well_defined(80, 9, 1e-7).unwrap().is_empty());
        let report = radial_lift_extension(&f, 0.05, &rep, &ExtensionOptions::default()).unwrap();
        assert_eq!(report.status, LiftStatus::NonLiftable);
        match &report.obstruction {
            Some(Obstruction::ConflictingHomomorphisms { map_a, map_b, .. }) => {
                assert_ne!(map_a, map_b);
            }
            other => panic!("expected conflicting homomorphisms, got {other:?}"),
        }
    }

    #[test]
    fn continuation_from_translated_seed_stays_translated() {
        // Lift uniqueness: starting from g' . seed yields g' . lift.
        let f = sqrt_cover_map();
        let path = circle_path(1.0, 48, 0.5);
        let seed = f.eval_rep(&path[0]).unwrap();
        let lift_a = path_lift(&f, &path, &seed, 1e-9).unwrap();
        let minus_seed: Vec<f64> = seed.iter().map(|v| -v).collect();
        let lift_b = path_lift(&f, &path, &minus_seed, 1e-9).unwrap();
        for (a, b) in lift_a.iter().zip(&lift_b) {
            let flipped: Vec<f64> = b.iter().map(|v| -v).collect();
            assert!(euclid_dist(a, &flipped) < 1e-9);
        }
    }
}
