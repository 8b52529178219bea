//! Vectors, matrices, and subspaces over dual-mode scalars.
//!
//! Elimination-based routines (rank, kernel, inverse) run the same code in
//! both modes; in approx mode a pivot counts as zero when its magnitude is
//! at most `tolerance * max_abs_entry` of the input matrix.

use crate::error::{Error, Result};
use crate::scalar::{Scalar, ScalarMode};

#[derive(Debug, Clone)]
pub struct Vector {
    pub entries: Vec<Scalar>,
}

impl Vector {
    pub fn new(entries: Vec<Scalar>) -> Self {
        Vector { entries }
    }

    pub fn zero(dim: usize, mode: ScalarMode) -> Self {
        Vector {
            entries: (0..dim).map(|_| Scalar::zero(mode)).collect(),
        }
    }

    pub fn from_f64(xs: &[f64]) -> Self {
        Vector {
            entries: xs.iter().map(|&x| Scalar::Approx(x)).collect(),
        }
    }

    pub fn from_ints(xs: &[i64], mode: ScalarMode) -> Self {
        Vector {
            entries: xs.iter().map(|&x| Scalar::from_int(x, mode)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.to_f64()).collect()
    }

    pub fn add(&self, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim());
        Vector {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim());
        Vector {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: &Scalar) -> Vector {
        Vector {
            entries: self.entries.iter().map(|a| a * s).collect(),
        }
    }

    pub fn dot(&self, other: &Vector) -> Scalar {
        assert_eq!(self.dim(), other.dim());
        let mode = self.mode();
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(Scalar::zero(mode), |acc, (a, b)| &acc + &(a * b))
    }

    pub fn mode(&self) -> ScalarMode {
        mode_of(&self.entries)
    }

    /// Pointwise equality: exact, or every coordinate within `tol`.
    pub fn eq_within(&self, other: &Vector, tol: f64) -> bool {
        self.dim() == other.dim()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.eq_within(b, tol))
    }
}

#[derive(Debug, Clone)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Scalar>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Scalar>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<Scalar>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix rows");
        Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_f64_rows(rows: &[Vec<f64>]) -> Self {
        Matrix::from_rows(
            rows.iter()
                .map(|row| row.iter().map(|&x| Scalar::Approx(x)).collect())
                .collect(),
        )
    }

    pub fn from_int_rows(rows: &[&[i64]], mode: ScalarMode) -> Self {
        Matrix::from_rows(
            rows.iter()
                .map(|row| row.iter().map(|&x| Scalar::from_int(x, mode)).collect())
                .collect(),
        )
    }

    pub fn identity(n: usize, mode: ScalarMode) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(if i == j {
                    Scalar::one(mode)
                } else {
                    Scalar::zero(mode)
                });
            }
        }
        Matrix {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> &Scalar {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mode(&self) -> ScalarMode {
        mode_of(&self.data)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NonSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j).clone());
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matrix product shape");
        let mode = self.mode();
        let mut data = Vec::with_capacity(self.rows * other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Scalar::zero(mode);
                for k in 0..self.cols {
                    acc = &acc + &(self.get(i, k) * other.get(k, j));
                }
                data.push(acc);
            }
        }
        Matrix {
            rows: self.rows,
            cols: other.cols,
            data,
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        assert_eq!(self.cols, v.dim(), "matrix apply shape");
        let mode = self.mode();
        let mut entries = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut acc = Scalar::zero(mode);
            for j in 0..self.cols {
                acc = &acc + &(self.get(i, j) * &v.entries[j]);
            }
            entries.push(acc);
        }
        Vector { entries }
    }

    /// Float action on float data, regardless of the stored mode.
    pub fn apply_f64(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matrix apply shape");
        (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| self.get(i, j).to_f64() * x[j])
                    .sum()
            })
            .collect()
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).to_f64()).collect())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .map(|s| s.to_f64().abs())
            .fold(0.0, f64::max)
    }

    /// Frobenius distance, always as a float.
    pub fn frobenius_distance(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| {
                let d = a.to_f64() - b.to_f64();
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Element equality: exact agreement, or Frobenius distance at most
    /// `tol * sqrt(rows)` in approx mode.
    pub fn eq_within(&self, other: &Matrix, mode: ScalarMode) -> bool {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return false;
        }
        match mode {
            ScalarMode::Exact => self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.eq_within(b, 0.0)),
            ScalarMode::Approx { tolerance } => {
                self.frobenius_distance(other) <= tolerance * (self.rows as f64).sqrt()
            }
        }
    }

    fn pivot_threshold(&self, mode: ScalarMode) -> f64 {
        match mode {
            ScalarMode::Exact => 0.0,
            ScalarMode::Approx { tolerance } => tolerance * self.max_abs().max(1.0),
        }
    }

    /// Reduced row echelon form; returns (rref, pivot columns).
    pub fn rref(&self, mode: ScalarMode) -> (Matrix, Vec<usize>) {
        let threshold = self.pivot_threshold(mode);
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            // Partial pivoting: largest magnitude in this column.
            let mut best = row;
            for r in row + 1..m.rows {
                if m.get(r, col).to_f64().abs() > m.get(best, col).to_f64().abs() {
                    best = r;
                }
            }
            let pivot_abs = m.get(best, col).to_f64().abs();
            let is_zero = match mode {
                ScalarMode::Exact => m.get(best, col).is_zero_within(0.0),
                ScalarMode::Approx { .. } => pivot_abs <= threshold,
            };
            if is_zero {
                continue;
            }
            if best != row {
                for j in 0..m.cols {
                    let a = m.get(row, j).clone();
                    let b = m.get(best, j).clone();
                    m.set(row, j, b);
                    m.set(best, j, a);
                }
            }
            let pivot = m.get(row, col).clone();
            for j in 0..m.cols {
                let v = m.get(row, j) / &pivot;
                m.set(row, j, v);
            }
            for r in 0..m.rows {
                if r != row {
                    let factor = m.get(r, col).clone();
                    if !factor.is_zero_within(0.0) {
                        for j in 0..m.cols {
                            let v = m.get(r, j) - &(&factor * m.get(row, j));
                            m.set(r, j, v);
                        }
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self, mode: ScalarMode) -> usize {
        self.rref(mode).1.len()
    }

    /// Null space basis, one vector per free column of the RREF.
    pub fn kernel(&self, mode: ScalarMode) -> Subspace {
        let (rref, pivots) = self.rref(mode);
        let sc_mode = if mode.is_exact() {
            ScalarMode::Exact
        } else {
            mode
        };
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if pivots.contains(&free) {
                continue;
            }
            let mut v = Vector::zero(self.cols, sc_mode);
            v.entries[free] = Scalar::one(sc_mode);
            for (r, &pc) in pivots.iter().enumerate() {
                v.entries[pc] = -rref.get(r, free);
            }
            basis.push(v);
        }
        Subspace {
            ambient: self.cols,
            basis,
        }
    }

    pub fn determinant(&self, mode: ScalarMode) -> Result<Scalar> {
        self.require_square()?;
        let n = self.rows;
        let sc_mode = self.mode();
        let mut m = self.clone();
        let mut det = Scalar::one(sc_mode);
        let mut sign = false;
        let threshold = self.pivot_threshold(mode);
        for col in 0..n {
            let mut best = col;
            for r in col + 1..n {
                if m.get(r, col).to_f64().abs() > m.get(best, col).to_f64().abs() {
                    best = r;
                }
            }
            let pivot_zero = match mode {
                ScalarMode::Exact => m.get(best, col).is_zero_within(0.0),
                ScalarMode::Approx { .. } => m.get(best, col).to_f64().abs() <= threshold,
            };
            if pivot_zero {
                return Ok(Scalar::zero(sc_mode));
            }
            if best != col {
                sign = !sign;
                for j in 0..n {
                    let a = m.get(col, j).clone();
                    let b = m.get(best, j).clone();
                    m.set(col, j, b);
                    m.set(best, j, a);
                }
            }
            let pivot = m.get(col, col).clone();
            det = &det * &pivot;
            for r in col + 1..n {
                let factor = m.get(r, col) / &pivot;
                if !factor.is_zero_within(0.0) {
                    for j in col..n {
                        let v = m.get(r, j) - &(&factor * m.get(col, j));
                        m.set(r, j, v);
                    }
                }
            }
        }
        if sign {
            det = -det;
        }
        Ok(det)
    }

    pub fn inverse(&self, mode: ScalarMode) -> Result<Matrix> {
        self.require_square()?;
        let n = self.rows;
        let sc_mode = self.mode();
        // Gauss-Jordan on [A | I].
        let mut aug = Matrix {
            rows: n,
            cols: 2 * n,
            data: vec![Scalar::zero(sc_mode); n * 2 * n],
        };
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, self.get(i, j).clone());
            }
            aug.set(i, n + i, Scalar::one(sc_mode));
        }
        let threshold = self.pivot_threshold(mode);
        for col in 0..n {
            let mut best = col;
            for r in col + 1..n {
                if aug.get(r, col).to_f64().abs() > aug.get(best, col).to_f64().abs() {
                    best = r;
                }
            }
            let pivot_zero = match mode {
                ScalarMode::Exact => aug.get(best, col).is_zero_within(0.0),
                ScalarMode::Approx { .. } => aug.get(best, col).to_f64().abs() <= threshold,
            };
            if pivot_zero {
                return Err(Error::Singular);
            }
            if best != col {
                for j in 0..2 * n {
                    let a = aug.get(col, j).clone();
                    let b = aug.get(best, j).clone();
                    aug.set(col, j, b);
                    aug.set(best, j, a);
                }
            }
            let pivot = aug.get(col, col).clone();
            for j in 0..2 * n {
                let v = aug.get(col, j) / &pivot;
                aug.set(col, j, v);
            }
            for r in 0..n {
                if r != col {
                    let factor = aug.get(r, col).clone();
                    if !factor.is_zero_within(0.0) {
                        for j in 0..2 * n {
                            let v = aug.get(r, j) - &(&factor * aug.get(col, j));
                            aug.set(r, j, v);
                        }
                    }
                }
            }
        }
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(aug.get(i, n + j).clone());
            }
        }
        Ok(Matrix {
            rows: n,
            cols: n,
            data,
        })
    }

    /// Basis of the fixed-point space `ker(g - I)`.
    pub fn fixed_subspace(&self, mode: ScalarMode) -> Result<Subspace> {
        self.require_square()?;
        let id = Matrix::identity(self.rows, self.mode());
        Ok(self.sub(&id).kernel(mode))
    }
}

#[derive(Debug, Clone)]
pub struct Subspace {
    pub ambient: usize,
    pub basis: Vec<Vector>,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn codimension(&self) -> usize {
        self.ambient - self.dim()
    }

    /// Membership test against the span of the basis.
    pub fn contains(&self, v: &Vector, mode: ScalarMode) -> bool {
        if self.basis.is_empty() {
            let zero = Vector::zero(self.ambient, v.mode());
            return v.eq_within(&zero, mode.tolerance());
        }
        // Solve basis^T coefficients = v by elimination on [B | v].
        let cols: Vec<Vec<Scalar>> = (0..self.ambient)
            .map(|i| {
                let mut row: Vec<Scalar> =
                    self.basis.iter().map(|b| b.entries[i].clone()).collect();
                row.push(v.entries[i].clone());
                row
            })
            .collect();
        let m = Matrix::from_rows(cols);
        let rank_with = m.rank(mode);
        let without = Matrix::from_rows(
            (0..self.ambient)
                .map(|i| self.basis.iter().map(|b| b.entries[i].clone()).collect())
                .collect(),
        );
        rank_with == without.rank(mode)
    }
}

fn mode_of(entries: &[Scalar]) -> ScalarMode {
    let mut exact = 0usize;
    let mut approx = 0usize;
    for e in entries {
        if e.is_exact() {
            exact += 1;
        } else {
            approx += 1;
        }
    }
    assert!(
        exact == 0 || approx == 0,
        "mixed exact/approx entries in one object"
    );
    if exact > 0 {
        ScalarMode::Exact
    } else {
        ScalarMode::approx_default()
    }
}

/// Central-difference Jacobian: `J[i][j] = (f_i(u + h e_j) - f_i(u - h e_j)) / 2h`.
pub fn jacobian_fd<F>(f: F, u: &[f64], step: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    assert!(step > 0.0, "step must be positive");
    let base = f(u)?;
    let out_dim = base.len();
    let mut jac = vec![vec![0.0; u.len()]; out_dim];
    for j in 0..u.len() {
        let mut up = u.to_vec();
        let mut dn = u.to_vec();
        up[j] += step;
        dn[j] -= step;
        let fu = f(&up)?;
        let fd = f(&dn)?;
        if fu.len() != out_dim || fd.len() != out_dim {
            return Err(Error::Evaluation(
                "map output dimension varies across evaluations".into(),
            ));
        }
        for i in 0..out_dim {
            jac[i][j] = (fu[i] - fd[i]) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// Solve `A x = b` over f64 with partial pivoting. `None` when singular
/// at working precision.
pub fn solve_f64(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return None;
    }
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let best = (col..n).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[best][col].abs() < 1e-13 {
            return None;
        }
        m.swap(col, best);
        let pivot = m[col][col];
        for r in 0..n {
            if r != col {
                let factor = m[r][col] / pivot;
                if factor != 0.0 {
                    for j in col..=n {
                        let upd = m[col][j] * factor;
                        m[r][j] -= upd;
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

pub fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn euclid_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
