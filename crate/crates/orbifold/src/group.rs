//! Finite subgroups of GL(n, R) given by generators.
//!
//! A group closes its generator set under multiplication (bounded by a cap),
//! stores the full multiplication table, and answers orbit, stabilizer, and
//! conjugacy questions. Element equality is exact in exact mode and
//! Frobenius-tolerant in approx mode.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Subspace, Vector};
use crate::scalar::{Scalar, ScalarMode};

pub const DEFAULT_CLOSURE_CAP: usize = 10_000;
pub const DEFAULT_CONJUGACY_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct FiniteMatrixGroup {
    dim: usize,
    mode: ScalarMode,
    elements: Vec<Matrix>,
    mult: Vec<Vec<usize>>,
    inverses: Vec<usize>,
}

impl FiniteMatrixGroup {
    /// Close `generators` under products, identity first, insertion order
    /// after. Fails with `NotFinite` past `cap` elements.
    pub fn close_generators(generators: &[Matrix], cap: usize) -> Result<FiniteMatrixGroup> {
        let first = generators.first().ok_or(Error::DimMismatch {
            expected: 1,
            got: 0,
        })?;
        first.require_square()?;
        let dim = first.rows;
        let mode = first.mode();
        for g in generators {
            g.require_square()?;
            if g.rows != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: g.rows,
                });
            }
            if g.rank(mode) < dim {
                return Err(Error::Singular);
            }
        }

        let identity = Matrix::identity(dim, mode);
        let mut elements = vec![identity];
        let mut index = ElementIndex::new(mode);
        index.insert(&elements[0], 0);

        let gens: Vec<Matrix> = generators.to_vec();
        let mut cursor = 0;
        while cursor < elements.len() {
            for g in &gens {
                let product = elements[cursor].mul(g);
                if index.find(&elements, &product, mode).is_none() {
                    if elements.len() >= cap {
                        return Err(Error::NotFinite { cap });
                    }
                    index.insert(&product, elements.len());
                    elements.push(product);
                }
            }
            cursor += 1;
        }

        let n = elements.len();
        let mut mult = vec![vec![0usize; n]; n];
        for i in 0..n {
            for j in 0..n {
                let product = elements[i].mul(&elements[j]);
                mult[i][j] =
                    index
                        .find(&elements, &product, mode)
                        .ok_or_else(|| Error::Inconsistent {
                            detail: format!(
                                "product of elements {i} and {j} left the closed set"
                            ),
                        })?;
            }
        }
        let inverses = (0..n)
            .map(|i| {
                (0..n)
                    .find(|&j| mult[i][j] == 0)
                    .ok_or(Error::Inconsistent {
                        detail: format!("element {i} has no inverse in the table"),
                    })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(FiniteMatrixGroup {
            dim,
            mode,
            elements,
            mult,
            inverses,
        })
    }

    pub fn trivial(dim: usize, mode: ScalarMode) -> FiniteMatrixGroup {
        FiniteMatrixGroup {
            dim,
            mode,
            elements: vec![Matrix::identity(dim, mode)],
            mult: vec![vec![0]],
            inverses: vec![0],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> ScalarMode {
        self.mode
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.order() == 1
    }

    pub fn elements(&self) -> &[Matrix] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &Matrix {
        &self.elements[i]
    }

    pub fn mult(&self, i: usize, j: usize) -> usize {
        self.mult[i][j]
    }

    pub fn inverse(&self, i: usize) -> usize {
        self.inverses[i]
    }

    pub fn find_element(&self, m: &Matrix) -> Option<usize> {
        self.elements
            .iter()
            .position(|e| e.eq_within(m, self.mode))
    }

    /// Order of a single element in the group.
    pub fn element_order(&self, i: usize) -> usize {
        let mut k = 1;
        let mut cur = i;
        while cur != 0 {
            cur = self.mult[cur][i];
            k += 1;
        }
        k
    }

    /// Indices of elements fixing `u`.
    pub fn stabilizer_indices(&self, u: &Vector) -> Vec<usize> {
        let tol = self.mode.tolerance();
        (0..self.order())
            .filter(|&i| self.elements[i].apply(u).eq_within(u, tol))
            .collect()
    }

    /// Stabilizer as a group in its own right (inherits mode and ordering).
    pub fn stabilizer(&self, u: &Vector) -> Result<FiniteMatrixGroup> {
        self.subgroup_from_indices(&self.stabilizer_indices(u))
    }

    /// Indices of elements fixing a float point within `tol` (largest
    /// coordinate deviation).
    pub fn stabilizer_indices_f64(&self, x: &[f64], tol: f64) -> Vec<usize> {
        (0..self.order())
            .filter(|&i| {
                let gx = self.elements[i].apply_f64(x);
                gx.iter().zip(x).all(|(a, b)| (a - b).abs() <= tol)
            })
            .collect()
    }

    pub fn subgroup_from_indices(&self, indices: &[usize]) -> Result<FiniteMatrixGroup> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.first() != Some(&0) {
            return Err(Error::Inconsistent {
                detail: "subgroup does not contain the identity".into(),
            });
        }
        let position: HashMap<usize, usize> = sorted
            .iter()
            .enumerate()
            .map(|(pos, &idx)| (idx, pos))
            .collect();
        let k = sorted.len();
        let mut mult = vec![vec![0usize; k]; k];
        for a in 0..k {
            for b in 0..k {
                let prod = self.mult[sorted[a]][sorted[b]];
                mult[a][b] = *position.get(&prod).ok_or(Error::Inconsistent {
                    detail: "index set is not closed under multiplication".into(),
                })?;
            }
        }
        let inverses = (0..k)
            .map(|a| (0..k).find(|&b| mult[a][b] == 0).unwrap())
            .collect();
        Ok(FiniteMatrixGroup {
            dim: self.dim,
            mode: self.mode,
            elements: sorted.iter().map(|&i| self.elements[i].clone()).collect(),
            mult,
            inverses,
        })
    }

    /// Distinct orbit points in first-appearance order.
    pub fn orbit(&self, u: &Vector) -> Vec<Vector> {
        let tol = self.mode.tolerance();
        let mut out: Vec<Vector> = Vec::new();
        for g in &self.elements {
            let gu = g.apply(u);
            if !out.iter().any(|v| v.eq_within(&gu, tol)) {
                out.push(gu);
            }
        }
        out
    }

    pub fn orbit_f64(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.elements.iter().map(|g| g.apply_f64(x)).collect()
    }

    /// Invariant inner product: `gram = sum over gamma of gamma^T gamma`.
    /// Symmetric positive-definite, and `|gamma v|_gram = |v|_gram` for
    /// every group element.
    pub fn invariant_gram(&self) -> Matrix {
        let mut acc = Matrix::identity(self.dim, self.mode);
        let zero = Scalar::zero(self.mode);
        for i in 0..self.dim {
            acc.set(i, i, zero.clone());
        }
        let mut gram = acc;
        for g in &self.elements {
            gram = gram.add(&g.transpose().mul(g));
        }
        gram
    }

    /// Squared invariant norm `v^T gram v`, exact in exact mode.
    pub fn gamma_norm_sq(gram: &Matrix, v: &Vector) -> Scalar {
        gram.apply(v).dot(v)
    }

    /// Invariant norm. In approx mode this is `sqrt(v^T gram v)`; in exact
    /// mode the squared form is returned so the value stays rational, and
    /// callers compare squares.
    pub fn gamma_norm(gram: &Matrix, v: &Vector) -> Scalar {
        let sq = Self::gamma_norm_sq(gram, v);
        match sq {
            Scalar::Exact(_) => sq,
            Scalar::Approx(x) => Scalar::Approx(x.max(0.0).sqrt()),
        }
    }

    /// Element whose fixed-point space has codimension exactly 1.
    pub fn is_reflection(&self, i: usize) -> Result<bool> {
        if i == 0 {
            return Ok(false);
        }
        let fixed: Subspace = self.elements[i].fixed_subspace(self.mode)?;
        Ok(fixed.codimension() == 1)
    }

    /// Greedy generating set (element indices).
    pub fn generating_set(&self) -> Vec<usize> {
        let mut gens: Vec<usize> = Vec::new();
        let mut generated = vec![false; self.order()];
        generated[0] = true;
        let mut count = 1;
        for e in 1..self.order() {
            if generated[e] {
                continue;
            }
            gens.push(e);
            // Regenerate the subgroup spanned so far.
            let mut frontier = vec![0usize];
            let mut seen = vec![false; self.order()];
            seen[0] = true;
            while let Some(cur) = frontier.pop() {
                for &g in &gens {
                    let nxt = self.mult[cur][g];
                    if !seen[nxt] {
                        seen[nxt] = true;
                        frontier.push(nxt);
                    }
                }
            }
            generated = seen;
            count = generated.iter().filter(|&&b| b).count();
            if count == self.order() {
                break;
            }
        }
        debug_assert_eq!(count, self.order());
        gens
    }

    /// The same group with entries converted to floating point, keeping the
    /// element order and multiplication table. Lets exact groups combine
    /// with matrices that have no rational entries.
    pub fn to_approx(&self, tolerance: f64) -> FiniteMatrixGroup {
        let mode = ScalarMode::Approx { tolerance };
        FiniteMatrixGroup {
            dim: self.dim,
            mode,
            elements: self
                .elements
                .iter()
                .map(|g| Matrix::from_f64_rows(&g.to_f64_rows()))
                .collect(),
            mult: self.mult.clone(),
            inverses: self.inverses.clone(),
        }
    }

    /// Conjugated copy `A G A^{-1}` (an isomorphic group with the same
    /// multiplication table).
    pub fn conjugated(&self, a: &Matrix) -> Result<FiniteMatrixGroup> {
        a.require_square()?;
        if a.rows != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: a.rows,
            });
        }
        let a_inv = a.inverse(self.mode)?;
        Ok(FiniteMatrixGroup {
            dim: self.dim,
            mode: self.mode,
            elements: self
                .elements
                .iter()
                .map(|g| a.mul(g).mul(&a_inv))
                .collect(),
            mult: self.mult.clone(),
            inverses: self.inverses.clone(),
        })
    }
}

/// Lookup accelerator: exact entries hash to a canonical key; approx mode
/// falls back to a tolerant scan.
struct ElementIndex {
    exact: Option<HashMap<Vec<String>, usize>>,
}

impl ElementIndex {
    fn new(mode: ScalarMode) -> Self {
        ElementIndex {
            exact: mode.is_exact().then(HashMap::new),
        }
    }

    fn key(m: &Matrix) -> Vec<String> {
        let mut k = Vec::with_capacity(m.rows * m.cols);
        for i in 0..m.rows {
            for j in 0..m.cols {
                k.push(m.get(i, j).render());
            }
        }
        k
    }

    fn insert(&mut self, m: &Matrix, idx: usize) {
        if let Some(map) = &mut self.exact {
            map.insert(Self::key(m), idx);
        }
    }

    fn find(&self, elements: &[Matrix], m: &Matrix, mode: ScalarMode) -> Option<usize> {
        match &self.exact {
            Some(map) => map.get(&Self::key(m)).copied(),
            None => elements.iter().position(|e| e.eq_within(m, mode)),
        }
    }
}

/// Group homomorphism as an index table over stored element orders.
#[derive(Debug, Clone)]
pub struct GroupHomomorphism {
    pub source: FiniteMatrixGroup,
    pub target: FiniteMatrixGroup,
    /// `map[i]` is the target index of the image of source element `i`.
    pub map: Vec<usize>,
}

impl GroupHomomorphism {
    pub fn is_homomorphism(&self) -> bool {
        self.map.len() == self.source.order()
            && self.map[0] == 0
            && (0..self.source.order()).all(|i| {
                (0..self.source.order()).all(|j| {
                    self.map[self.source.mult(i, j)]
                        == self.target.mult(self.map[i], self.map[j])
                })
            })
    }

    pub fn is_isomorphism(&self) -> bool {
        if self.source.order() != self.target.order() || !self.is_homomorphism() {
            return false;
        }
        let mut seen = vec![false; self.target.order()];
        for &t in &self.map {
            if seen[t] {
                return false;
            }
            seen[t] = true;
        }
        true
    }

    pub fn is_trivial(&self) -> bool {
        self.map.iter().all(|&t| t == 0)
    }

    /// Tables agree after relabeling by conjugation with some target element.
    pub fn equal_up_to_conjugacy(&self, other: &GroupHomomorphism) -> bool {
        if self.map.len() != other.map.len() {
            return false;
        }
        let t = &self.target;
        (0..t.order()).any(|s| {
            let s_inv = t.inverse(s);
            self.map
                .iter()
                .zip(&other.map)
                .all(|(&a, &b)| t.mult(t.mult(s, a), s_inv) == b)
        })
    }
}

/// Search for `L` in GL(n, R) and an isomorphism `h` with
/// `L gamma L^{-1} = h(gamma)` for all `gamma` in `g`. Returns `None` when
/// no isomorphism admits an invertible intertwiner. The `budget` caps the
/// number of generator-image assignments explored.
pub fn conjugate_in_gl(
    g: &FiniteMatrixGroup,
    h: &FiniteMatrixGroup,
    budget: u64,
    seed: u64,
) -> Result<Option<(Matrix, GroupHomomorphism)>> {
    if g.dim() != h.dim() {
        return Err(Error::DimMismatch {
            expected: g.dim(),
            got: h.dim(),
        });
    }
    if g.order() != h.order() {
        return Ok(None);
    }
    let gens = g.generating_set();
    if gens.is_empty() {
        // Trivial groups: the identity intertwines them.
        let hom = GroupHomomorphism {
            source: g.clone(),
            target: h.clone(),
            map: vec![0],
        };
        return Ok(Some((Matrix::identity(g.dim(), g.mode()), hom)));
    }
    let gen_orders: Vec<usize> = gens.iter().map(|&i| g.element_order(i)).collect();
    let h_by_order: Vec<Vec<usize>> = gen_orders
        .iter()
        .map(|&ord| {
            (0..h.order())
                .filter(|&j| h.element_order(j) == ord)
                .collect()
        })
        .collect();

    let mut assignment = vec![0usize; gens.len()];
    let mut tried: u64 = 0;
    let mut stack = vec![0usize];
    // Depth-first enumeration of generator images, cheapest checks first.
    loop {
        let depth = stack.len() - 1;
        let choice = stack[depth];
        if choice >= h_by_order[depth].len() {
            stack.pop();
            match stack.last_mut() {
                Some(top) => {
                    *top += 1;
                    continue;
                }
                None => return Ok(None),
            }
        }
        assignment[depth] = h_by_order[depth][choice];
        if depth + 1 < gens.len() {
            stack.push(0);
            continue;
        }
        tried += 1;
        if tried > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        if let Some(map) = induced_map(g, h, &gens, &assignment) {
            let hom = GroupHomomorphism {
                source: g.clone(),
                target: h.clone(),
                map,
            };
            if hom.is_isomorphism() {
                if let Some(l) = intertwiner(g, h, &gens, &assignment, seed)? {
                    return Ok(Some((l, hom)));
                }
            }
        }
        *stack.last_mut().unwrap() += 1;
    }
}

/// Extend generator images to the whole group via the multiplication
/// tables; `None` when the extension is inconsistent.
fn induced_map(
    g: &FiniteMatrixGroup,
    h: &FiniteMatrixGroup,
    gens: &[usize],
    images: &[usize],
) -> Option<Vec<usize>> {
    let n = g.order();
    let mut map = vec![usize::MAX; n];
    map[0] = 0;
    let mut frontier = vec![0usize];
    while let Some(cur) = frontier.pop() {
        for (k, &gen) in gens.iter().enumerate() {
            let nxt = g.mult(cur, gen);
            let img = h.mult(map[cur], images[k]);
            if map[nxt] == usize::MAX {
                map[nxt] = img;
                frontier.push(nxt);
            } else if map[nxt] != img {
                return None;
            }
        }
    }
    if map.contains(&usize::MAX) {
        return None;
    }
    // Full multiplicativity, not just the relations hit by the walk.
    for i in 0..n {
        for j in 0..n {
            if map[g.mult(i, j)] != h.mult(map[i], map[j]) {
                return None;
            }
        }
    }
    Some(map)
}

/// Solve `L g_k = h_k L` across generators, then look for an invertible
/// element of the solution space.
fn intertwiner(
    g: &FiniteMatrixGroup,
    h: &FiniteMatrixGroup,
    gens: &[usize],
    images: &[usize],
    seed: u64,
) -> Result<Option<Matrix>> {
    let n = g.dim();
    let mode = g.mode();
    let unknowns = n * n;
    let mut rows: Vec<Vec<Scalar>> = Vec::with_capacity(gens.len() * unknowns);
    for (k, &gen) in gens.iter().enumerate() {
        let gm = g.element(gen);
        let hm = h.element(images[k]);
        for a in 0..n {
            for b in 0..n {
                let mut row = vec![Scalar::zero(mode); unknowns];
                for c in 0..n {
                    // (L g)_{ab} contributes g_{cb} * L_{ac}
                    row[a * n + c] = &row[a * n + c] + gm.get(c, b);
                    // (h L)_{ab} contributes h_{ac} * L_{cb}
                    row[c * n + b] = &row[c * n + b] - hm.get(a, c);
                }
                rows.push(row);
            }
        }
    }
    let system = Matrix::from_rows(rows);
    let kernel = system.kernel(mode);
    if kernel.dim() == 0 {
        return Ok(None);
    }
    let as_matrix = |v: &Vector| -> Matrix {
        Matrix::from_rows(
            (0..n)
                .map(|a| (0..n).map(|c| v.entries[a * n + c].clone()).collect())
                .collect(),
        )
    };
    let invertible = |m: &Matrix| m.rank(mode) == n;

    for v in &kernel.basis {
        let m = as_matrix(v);
        if invertible(&m) {
            return Ok(Some(m));
        }
    }
    for i in 0..kernel.dim() {
        for j in i + 1..kernel.dim() {
            let m = as_matrix(&kernel.basis[i].add(&kernel.basis[j]));
            if invertible(&m) {
                return Ok(Some(m));
            }
        }
    }
    // Random small-integer combinations; an invertible element, if any
    // exists, is generic in the solution space.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..40 {
        let mut acc = Vector::zero(unknowns, mode);
        for b in &kernel.basis {
            let c = Scalar::from_int(rng.gen_range(-5i64..=5), mode);
            acc = acc.add(&b.scale(&c));
        }
        let m = as_matrix(&acc);
        if invertible(&m) {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(rows: &[&[i64]]) -> Matrix {
        Matrix::from_int_rows(rows, ScalarMode::Exact)
    }

    fn rot90() -> Matrix {
        exact(&[&[0, -1], &[1, 0]])
    }

    fn neg_identity(n: usize) -> Matrix {
        let mut m = Matrix::identity(n, ScalarMode::Exact);
        for i in 0..n {
            m.set(i, i, Scalar::from_int(-1, ScalarMode::Exact));
        }
        m
    }

    #[test]
    fn cyclic_four_closes_with_identity_first() {
        let g = FiniteMatrixGroup::close_generators(&[rot90()], 10_000).unwrap();
        assert_eq!(g.order(), 4);
        assert!(g
            .element(0)
            .eq_within(&Matrix::identity(2, ScalarMode::Exact), ScalarMode::Exact));
        // Insertion order: I, R, R^2, R^3.
        assert!(g.element(1).eq_within(&rot90(), ScalarMode::Exact));
        assert_eq!(g.element_order(1), 4);
        assert_eq!(g.inverse(1), 3);
    }

    #[test]
    fn infinite_generator_hits_the_cap() {
        let shear = exact(&[&[1, 1], &[0, 1]]);
        let err = FiniteMatrixGroup::close_generators(&[shear], 100).unwrap_err();
        assert!(matches!(err, Error::NotFinite { cap: 100 }));
    }

    #[test]
    fn singular_generator_is_rejected() {
        let sing = exact(&[&[1, 0], &[0, 0]]);
        assert!(matches!(
            FiniteMatrixGroup::close_generators(&[sing], 10),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn irrational_rotation_closes_in_approx_mode() {
        let th = 2.0 * std::f64::consts::PI / 5.0;
        let r = Matrix::from_f64_rows(&[
            vec![th.cos(), -th.sin()],
            vec![th.sin(), th.cos()],
        ]);
        let g = FiniteMatrixGroup::close_generators(&[r], 10_000).unwrap();
        assert_eq!(g.order(), 5);
    }

    #[test]
    fn dihedral_four_stabilizer_of_axis_point() {
        let g = FiniteMatrixGroup::close_generators(
            &[neg_identity(2), exact(&[&[1, 0], &[0, -1]])],
            10_000,
        )
        .unwrap();
        assert_eq!(g.order(), 4);
        let u = Vector::from_ints(&[1, 0], ScalarMode::Exact);
        let stab = g.stabilizer(&u).unwrap();
        // Fixing (1, 0): identity and diag(1, -1).
        assert_eq!(stab.order(), 2);
        assert!(stab
            .element(1)
            .eq_within(&exact(&[&[1, 0], &[0, -1]]), ScalarMode::Exact));
        let orbit = g.orbit(&u);
        assert_eq!(orbit.len(), 2);
        assert_eq!(g.order(), orbit.len() * stab.order());
    }

    #[test]
    fn gram_of_sign_group_is_twice_identity() {
        let g = FiniteMatrixGroup::close_generators(&[neg_identity(2)], 10).unwrap();
        let gram = g.invariant_gram();
        assert!(gram.eq_within(
            &Matrix::from_int_rows(&[&[2, 0], &[0, 2]], ScalarMode::Exact),
            ScalarMode::Exact
        ));
        let v = Vector::from_ints(&[-2, 0], ScalarMode::Exact);
        // Exact mode reports the squared form: (-2, 0) has |v|^2 = 8.
        assert_eq!(FiniteMatrixGroup::gamma_norm(&gram, &v).render(), "8");
    }

    #[test]
    fn gram_is_invariant_under_a_nonorthogonal_rational_group() {
        // Order-3 rational representation: companion matrix of x^2 + x + 1.
        let c3 = exact(&[&[0, -1], &[1, -1]]);
        let g = FiniteMatrixGroup::close_generators(&[c3], 10).unwrap();
        assert_eq!(g.order(), 3);
        let gram = g.invariant_gram();
        for e in g.elements() {
            let pushed = e.transpose().mul(&gram).mul(e);
            assert!(pushed.eq_within(&gram, ScalarMode::Exact));
        }
    }

    #[test]
    fn reflection_detection_by_fixed_codimension() {
        let g = FiniteMatrixGroup::close_generators(
            &[neg_identity(2), exact(&[&[1, 0], &[0, -1]])],
            10,
        )
        .unwrap();
        let flags: Vec<bool> = (0..g.order())
            .map(|i| g.is_reflection(i).unwrap())
            .collect();
        // Identity: no. -I: fixed space 0, codim 2: no. The two mirror
        // images diag(+-1, -+1): yes.
        assert_eq!(flags.iter().filter(|&&b| b).count(), 2);
        assert!(!flags[0]);
    }

    #[test]
    fn rotations_are_never_reflections() {
        let g = FiniteMatrixGroup::close_generators(&[rot90()], 10).unwrap();
        for i in 0..g.order() {
            assert!(!g.is_reflection(i).unwrap());
        }
    }

    #[test]
    fn conjugate_groups_are_recognized_with_intertwiner() {
        let g = FiniteMatrixGroup::close_generators(&[rot90()], 10).unwrap();
        let a = exact(&[&[2, 1], &[1, 1]]);
        let h = g.conjugated(&a).unwrap();
        let (l, hom) = conjugate_in_gl(&g, &h, DEFAULT_CONJUGACY_BUDGET, 0)
            .unwrap()
            .expect("conjugate pair must be matched");
        assert!(hom.is_isomorphism());
        let l_inv = l.inverse(ScalarMode::Exact).unwrap();
        for (i, e) in g.elements().iter().enumerate() {
            let conj = l.mul(e).mul(&l_inv);
            assert!(conj.eq_within(h.element(hom.map[i]), ScalarMode::Exact));
        }
    }

    #[test]
    fn sign_group_and_mirror_group_are_isomorphic_but_not_conjugate() {
        let g = FiniteMatrixGroup::close_generators(&[neg_identity(2)], 10).unwrap();
        let h =
            FiniteMatrixGroup::close_generators(&[exact(&[&[1, 0], &[0, -1]])], 10).unwrap();
        let got = conjugate_in_gl(&g, &h, DEFAULT_CONJUGACY_BUDGET, 0).unwrap();
        assert!(got.is_none(), "central -I cannot map to a reflection");
    }

    #[test]
    fn groups_of_different_order_are_not_conjugate() {
        let g = FiniteMatrixGroup::close_generators(&[rot90()], 10).unwrap();
        let h = FiniteMatrixGroup::close_generators(&[neg_identity(2)], 10).unwrap();
        assert!(conjugate_in_gl(&g, &h, DEFAULT_CONJUGACY_BUDGET, 0)
            .unwrap()
            .is_none());
    }

    #[test]
    fn generating_set_spans_the_group() {
        let g = FiniteMatrixGroup::close_generators(
            &[neg_identity(2), exact(&[&[1, 0], &[0, -1]])],
            10,
        )
        .unwrap();
        let gens = g.generating_set();
        assert!(gens.len() <= 2);
        let regenerated = FiniteMatrixGroup::close_generators(
            &gens.iter().map(|&i| g.element(i).clone()).collect::<Vec<_>>(),
            10,
        )
        .unwrap();
        assert_eq!(regenerated.order(), g.order());
    }

    #[test]
    fn subgroup_must_contain_identity() {
        let g = FiniteMatrixGroup::close_generators(&[rot90()], 10).unwrap();
        assert!(g.subgroup_from_indices(&[1, 2]).is_err());
    }
}
