use std::collections::BTreeSet;

use rand::{CryptoRng, RngCore};

use super::{AccessPolicy, PolicyNode};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::group::Scalar;
use crate::wire::{count, Decode, Encode, Reader, Writer};

/// Share-generating matrix `M` (l x n) with row labelling `rho`.
///
/// A set of attributes is authorized iff `(1, 0, ..., 0)` lies in the span of
/// the rows it labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LsssProgram<F> {
    rows: Vec<Vec<F>>,
    rho: Vec<String>,
    cols: usize,
}

/// Shares `lambda_i = M_i . v` of the secret `v[0]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareVector<F> {
    pub lambda: Vec<F>,
    pub secret_vec: Vec<F>,
}

/// Rows `I` and coefficients `omega` with `sum omega_i M_i = (1, 0, ..., 0)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReconstructionPlan<F> {
    pub rows: Vec<usize>,
    pub omega: Vec<F>,
}

impl<F> ReconstructionPlan<F> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &F)> {
        self.rows.iter().copied().zip(self.omega.iter())
    }
}

impl<F: Field> LsssProgram<F> {
    /// Compiles a policy with the Lewko-Waters vector labelling.
    ///
    /// The root carries `(1)`. An OR gate passes its vector to every child.
    /// An AND gate with vector `v` is split as a right-leaning chain of binary
    /// gates: for each split the counter `c` grows by one, the left child gets
    /// `v` zero-padded to `c - 1` entries followed by `1`, and the remainder
    /// gets `c - 1` zeros followed by `-1`. Leaves become rows, zero-padded to
    /// the final counter value.
    pub fn compile(policy: &AccessPolicy) -> Result<Self> {
        let mut labels: Vec<(String, Vec<i64>)> = Vec::new();
        let mut counter = 1usize;
        label(policy.root(), vec![1], &mut counter, &mut labels)?;
        let cols = counter;
        let (rho, rows) = labels
            .into_iter()
            .map(|(attr, mut v)| {
                v.resize(cols, 0);
                (attr, v.into_iter().map(F::from_i64).collect())
            })
            .unzip();
        Ok(LsssProgram { rows, rho, cols })
    }

    /// Builds a program from raw parts, e.g. after decoding from the wire.
    pub fn from_parts(rows: Vec<Vec<F>>, rho: Vec<String>) -> Result<Self> {
        if rows.is_empty() || rows.len() != rho.len() {
            return Err(Error::InvalidEncoding(format!(
                "lsss program needs matching non-empty rows ({}) and labels ({})",
                rows.len(),
                rho.len()
            )));
        }
        let cols = rows[0].len();
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidEncoding("ragged or empty lsss matrix".into()));
        }
        Ok(LsssProgram { rows, rho, cols })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<F>] {
        &self.rows
    }

    pub fn rho(&self, i: usize) -> &str {
        &self.rho[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.rho
    }

    /// `lambda = M v`.
    pub fn shares_from_vector(&self, secret_vec: Vec<F>) -> ShareVector<F> {
        assert_eq!(secret_vec.len(), self.cols, "secret vector width");
        let lambda = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&secret_vec)
                    .fold(F::zero(), |acc, (m, v)| acc + m.clone() * v.clone())
            })
            .collect();
        ShareVector { lambda, secret_vec }
    }

    /// Solves `sum_{i in I} omega_i M_i = (1, 0, ..., 0)` over the rows whose
    /// label is in `attrs`.
    ///
    /// Gauss-Jordan elimination treats each candidate row as an unknown, in
    /// ascending row order, and pivots on the first equation with a nonzero
    /// coefficient. Free unknowns are set to zero and rows with a zero
    /// coefficient are dropped from the plan, so the result is deterministic.
    pub fn find_reconstruction(&self, attrs: &BTreeSet<String>) -> Result<ReconstructionPlan<F>> {
        let candidates: Vec<usize> = (0..self.rows.len())
            .filter(|&i| attrs.contains(&self.rho[i]))
            .collect();
        let m = candidates.len();
        // Augmented system: one equation per column of M, one unknown per
        // candidate row, right-hand side is the target vector.
        let mut sys: Vec<Vec<F>> = (0..self.cols)
            .map(|c| {
                let mut eq: Vec<F> = candidates.iter().map(|&i| self.rows[i][c].clone()).collect();
                eq.push(if c == 0 { F::one() } else { F::zero() });
                eq
            })
            .collect();

        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut next_eq = 0;
        for var in 0..m {
            if next_eq == sys.len() {
                break;
            }
            let Some(p) = (next_eq..sys.len()).find(|&e| !sys[e][var].is_zero()) else {
                continue;
            };
            sys.swap(next_eq, p);
            let inv = sys[next_eq][var].inverse().expect("nonzero pivot");
            for x in sys[next_eq].iter_mut() {
                *x = x.clone() * inv.clone();
            }
            let pivot = sys[next_eq].clone();
            for (e, eq) in sys.iter_mut().enumerate() {
                if e == next_eq || eq[var].is_zero() {
                    continue;
                }
                let factor = eq[var].clone();
                for (x, p) in eq.iter_mut().zip(&pivot) {
                    *x = x.clone() - factor.clone() * p.clone();
                }
            }
            pivots.push((next_eq, var));
            next_eq += 1;
        }

        if sys[next_eq..].iter().any(|eq| !eq[m].is_zero()) {
            return Err(Error::NotAuthorized);
        }

        let mut plan: Vec<(usize, F)> = pivots
            .into_iter()
            .map(|(eq, var)| (candidates[var], sys[eq][m].clone()))
            .filter(|(_, w)| !w.is_zero())
            .collect();
        plan.sort_by_key(|(i, _)| *i);
        let (rows, omega) = plan.into_iter().unzip();
        Ok(ReconstructionPlan { rows, omega })
    }

    pub fn is_authorized(&self, attrs: &BTreeSet<String>) -> bool {
        self.find_reconstruction(attrs).is_ok()
    }

    /// `sum omega_i M_i`, for checking a plan.
    pub fn combine(&self, plan: &ReconstructionPlan<F>) -> Vec<F> {
        let mut acc = vec![F::zero(); self.cols];
        for (i, w) in plan.iter() {
            for (a, m) in acc.iter_mut().zip(&self.rows[i]) {
                *a = a.clone() + w.clone() * m.clone();
            }
        }
        acc
    }
}

impl LsssProgram<Scalar> {
    /// Shares `s` with fresh uniform `y_2 .. y_n`.
    pub fn make_shares<R: RngCore + CryptoRng + ?Sized>(
        &self,
        s: Scalar,
        rng: &mut R,
    ) -> ShareVector<Scalar> {
        let mut v = Vec::with_capacity(self.cols);
        v.push(s);
        v.extend((1..self.cols).map(|_| Scalar::random(rng)));
        self.shares_from_vector(v)
    }
}

fn label(
    node: &PolicyNode,
    vec: Vec<i64>,
    counter: &mut usize,
    out: &mut Vec<(String, Vec<i64>)>,
) -> Result<()> {
    match node {
        PolicyNode::Leaf(a) => {
            out.push((a.clone(), vec));
            Ok(())
        }
        PolicyNode::Or(children) => {
            if children.is_empty() {
                return Err(Error::NonMonotonePolicy("empty OR gate".into()));
            }
            for c in children {
                label(c, vec.clone(), counter, out)?;
            }
            Ok(())
        }
        PolicyNode::And(children) => {
            let Some((last, init)) = children.split_last() else {
                return Err(Error::NonMonotonePolicy("empty AND gate".into()));
            };
            let mut rest = vec;
            for c in init {
                let mut left = rest;
                left.resize(*counter, 0);
                left.push(1);
                let mut right = vec![0; *counter];
                right.push(-1);
                *counter += 1;
                label(c, left, counter, out)?;
                rest = right;
            }
            label(last, rest, counter, out)
        }
    }
}

impl Encode for LsssProgram<Scalar> {
    /// `l`, `n`, the matrix in row-major order, then the `rho` labels.
    fn encode_records(&self, w: &mut Writer) {
        w.uint(count(self.rows.len()))
            .uint(count(self.cols));
        for x in self.rows.iter().flatten() {
            w.scalar(x);
        }
        for a in &self.rho {
            w.attr(a);
        }
    }
}

impl Decode for LsssProgram<Scalar> {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self> {
        let l = r.uint()? as usize;
        let n = r.uint()? as usize;
        if l == 0 || n == 0 || n > l {
            return Err(Error::InvalidEncoding(format!("bad lsss dimensions {l}x{n}")));
        }
        let mut rows = Vec::with_capacity(l);
        for _ in 0..l {
            rows.push((0..n).map(|_| r.scalar()).collect::<Result<Vec<_>>>()?);
        }
        let rho = (0..l).map(|_| r.attr()).collect::<Result<Vec<_>>>()?;
        Self::from_parts(rows, rho)
    }
}
