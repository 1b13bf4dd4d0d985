//! Finite-difference weights `alpha_{cl}` on the uniform `u` grid.
//!
//! With `M_{lc} = c^l` (an `L x C` matrix) and `Delta = diag(1!, .., L!)`, the
//! weights solve `M A = Delta`, so that `sum_c alpha_{cl} (x_{n+c} - x_n)`
//! approximates `y^{(l)}(u_n) / N^l`. Offsets are small integers, so the system is
//! solved in exact rational arithmetic and converted to `f64` afterwards. For
//! `C > L` the minimum-norm solution `A = M^T (M M^T)^{-1} Delta` is also exact.

use std::fmt;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distinct nonzero integer offsets `c`, in caller order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct OffsetSet(Vec<i64>);

impl OffsetSet {
    pub fn new(offsets: Vec<i64>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::Offsets("empty offset set".into()));
        }
        if offsets.contains(&0) {
            return Err(Error::Offsets("offset 0 is not allowed".into()));
        }
        for (i, c) in offsets.iter().enumerate() {
            if offsets[..i].contains(c) {
                return Err(Error::Offsets(format!("duplicate offset {c}")));
            }
        }
        Ok(Self(offsets))
    }

    /// `-r, .., -1, 1, .., r`.
    pub fn centered(half_width: usize) -> Result<Self> {
        let r = half_width as i64;
        Self::new((-r..=r).filter(|c| *c != 0).collect())
    }

    /// The narrowest symmetric set that determines `order` derivatives.
    pub fn symmetric_for_order(order: usize) -> Result<Self> {
        Self::centered(order.div_ceil(2).max(1))
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.0.iter().all(|c| self.0.contains(&-c))
    }

    pub fn max_abs(&self) -> usize {
        self.0.iter().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn min(&self) -> i64 {
        *self.0.iter().min().expect("offset set is never empty")
    }

    pub fn max(&self) -> i64 {
        *self.0.iter().max().expect("offset set is never empty")
    }
}

impl TryFrom<Vec<i64>> for OffsetSet {
    type Error = Error;

    fn try_from(v: Vec<i64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<OffsetSet> for Vec<i64> {
    fn from(s: OffsetSet) -> Self {
        s.0
    }
}

/// The `C x L` weight matrix for one offset set.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilCoefficients {
    offsets: OffsetSet,
    order: usize,
    /// Row-major, `alpha[row * order + (l - 1)]`.
    alpha: Vec<f64>,
    exact: Option<Vec<BigRational>>,
}

impl StencilCoefficients {
    /// Wraps an arbitrary matrix without solving anything; `alpha` is row-major
    /// `C x L`. Useful for residual checks of hand-entered or perturbed tables.
    pub fn from_parts(offsets: OffsetSet, order: usize, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != offsets.len() * order {
            return Err(Error::Offsets(format!(
                "expected {} x {} coefficients, got {}",
                offsets.len(),
                order,
                alpha.len()
            )));
        }
        Ok(Self { offsets, order, alpha, exact: None })
    }

    pub fn offsets(&self) -> &OffsetSet {
        &self.offsets
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `alpha_{c l}` for the offset in position `row` and derivative `l` (1-based).
    pub fn alpha(&self, row: usize, l: usize) -> f64 {
        assert!((1..=self.order).contains(&l), "derivative order {l} out of range");
        self.alpha[row * self.order + l - 1]
    }

    pub fn alpha_mut(&mut self, row: usize, l: usize) -> &mut f64 {
        assert!((1..=self.order).contains(&l), "derivative order {l} out of range");
        self.exact = None;
        &mut self.alpha[row * self.order + l - 1]
    }

    /// Weights of derivative `l` as `(offset, alpha)` pairs.
    pub fn column(&self, l: usize) -> Vec<(i64, f64)> {
        self.offsets
            .as_slice()
            .iter()
            .enumerate()
            .map(|(row, &c)| (c, self.alpha(row, l)))
            .collect()
    }

    /// Exact rational entries, when the table came from [`build_stencil`].
    pub fn exact(&self, row: usize, l: usize) -> Option<&BigRational> {
        self.exact.as_ref().map(|e| &e[row * self.order + l - 1])
    }

    /// Residual of `sum_c alpha_{cl} c^{l'} = l! delta_{ll'}`, maximised over `l, l'`.
    pub fn residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for l in 1..=self.order {
            for lp in 1..=self.order {
                let sum: f64 = self
                    .offsets
                    .as_slice()
                    .iter()
                    .enumerate()
                    .map(|(row, &c)| self.alpha(row, l) * (c as f64).powi(lp as i32))
                    .sum();
                let target = if l == lp { factorial(l) } else { 0.0 };
                worst = worst.max((sum - target).abs());
            }
        }
        worst
    }

    /// Exact residual; `Some(true)` iff the rational table solves the system exactly.
    pub fn is_exact_solution(&self) -> Option<bool> {
        let exact = self.exact.as_ref()?;
        let l_max = self.order;
        Some((1..=l_max).all(|l| {
            (1..=l_max).all(|lp| {
                let sum = self
                    .offsets
                    .as_slice()
                    .iter()
                    .enumerate()
                    .fold(BigRational::zero(), |acc, (row, &c)| {
                        acc + &exact[row * l_max + l - 1] * int_pow(c, lp)
                    });
                let target = if l == lp { factorial_exact(l) } else { BigRational::zero() };
                sum == target
            })
        }))
    }
}

impl fmt::Display for StencilCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>6}", "c")?;
        for l in 1..=self.order {
            write!(f, " {:>24}", format!("alpha[c,{l}]"))?;
        }
        writeln!(f)?;
        for (row, c) in self.offsets.as_slice().iter().enumerate() {
            write!(f, "{c:>6}")?;
            for l in 1..=self.order {
                let cell = match self.exact(row, l) {
                    Some(q) => format!("{q} ({:.12})", self.alpha(row, l)),
                    None => format!("{:.12}", self.alpha(row, l)),
                };
                write!(f, " {cell:>24}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn factorial(l: usize) -> f64 {
    (1..=l).map(|k| k as f64).product()
}

fn factorial_exact(l: usize) -> BigRational {
    (1..=l).fold(BigRational::one(), |acc, k| acc * BigRational::from_integer(BigInt::from(k)))
}

fn int_pow(c: i64, p: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(c).pow(p as u32))
}

fn check_shape(offsets: &OffsetSet, order: usize) -> Result<()> {
    if order < 2 {
        return Err(Error::Order(order));
    }
    if offsets.len() < order {
        return Err(Error::UnderDetermined { offsets: offsets.len(), order });
    }
    Ok(())
}

/// Solves `M A = Delta` exactly; minimum-norm when `C > L`.
pub fn build_stencil(offsets: &OffsetSet, order: usize) -> Result<StencilCoefficients> {
    check_shape(offsets, order)?;
    let cs = offsets.as_slice();
    let c_count = cs.len();
    // m[l][c] = c^(l+1)
    let m: Vec<Vec<BigRational>> =
        (1..=order).map(|l| cs.iter().map(|&c| int_pow(c, l)).collect()).collect();
    let delta: Vec<Vec<BigRational>> = (1..=order)
        .map(|l| {
            (1..=order)
                .map(|k| if k == l { factorial_exact(l) } else { BigRational::zero() })
                .collect()
        })
        .collect();

    let a: Vec<Vec<BigRational>> = if c_count == order {
        solve_exact(m, delta).ok_or_else(|| singular(offsets))?
    } else {
        // A = M^T Y with (M M^T) Y = Delta.
        let gram: Vec<Vec<BigRational>> = (0..order)
            .map(|i| {
                (0..order)
                    .map(|j| (0..c_count).fold(BigRational::zero(), |acc, k| acc + &m[i][k] * &m[j][k]))
                    .collect()
            })
            .collect();
        let y = solve_exact(gram, delta).ok_or_else(|| singular(offsets))?;
        (0..c_count)
            .map(|row| {
                (0..order)
                    .map(|col| (0..order).fold(BigRational::zero(), |acc, k| acc + &m[k][row] * &y[k][col]))
                    .collect()
            })
            .collect()
    };

    let exact: Vec<BigRational> = a.into_iter().flatten().collect();
    let alpha = exact
        .iter()
        .map(|q| q.to_f64().expect("stencil entries are finite rationals"))
        .collect();
    Ok(StencilCoefficients { offsets: offsets.clone(), order, alpha, exact: Some(exact) })
}

/// Floating-point route via the Moore-Penrose pseudo-inverse of `M`. Kept as an
/// independent cross-check of the exact solver.
pub fn build_stencil_float(offsets: &OffsetSet, order: usize) -> Result<StencilCoefficients> {
    check_shape(offsets, order)?;
    let cs = offsets.as_slice();
    // Rows scaled by 1/max|c|^l; row scaling leaves the (minimum-norm) solution unchanged.
    let cmax = offsets.max_abs() as f64;
    let m = DMatrix::from_fn(order, cs.len(), |l, k| (cs[k] as f64 / cmax).powi(l as i32 + 1));
    let delta = DMatrix::from_fn(order, order, |i, j| {
        if i == j { factorial(i + 1) / cmax.powi(i as i32 + 1) } else { 0.0 }
    });
    let a = if cs.len() == order {
        m.lu().solve(&delta).ok_or_else(|| singular(offsets))?
    } else {
        let svd = m.svd(true, true);
        let smax = svd.singular_values.max();
        if svd.singular_values.min() <= smax * 1e-13 {
            return Err(singular(offsets));
        }
        svd.pseudo_inverse(smax * 1e-13).map_err(|e| Error::SingularSystem(e.to_string()))? * delta
    };
    let alpha = (0..cs.len()).flat_map(|r| (0..order).map(move |c| (r, c))).map(|(r, c)| a[(r, c)]).collect();
    Ok(StencilCoefficients { offsets: offsets.clone(), order, alpha, exact: None })
}

pub fn stencil_residual(s: &StencilCoefficients) -> f64 {
    s.residual()
}

fn singular(offsets: &OffsetSet) -> Error {
    Error::SingularSystem(format!("offset matrix for {:?} is rank deficient", offsets.as_slice()))
}

/// Gauss-Jordan elimination over the rationals; `None` if `a` is singular.
fn solve_exact(mut a: Vec<Vec<BigRational>>, mut b: Vec<Vec<BigRational>>) -> Option<Vec<Vec<BigRational>>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for v in a[col].iter_mut() {
            *v = &*v * &inv;
        }
        for v in b[col].iter_mut() {
            *v = &*v * &inv;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for k in 0..n {
                let d = &factor * &a[col][k];
                a[r][k] -= d;
            }
            for k in 0..b[r].len() {
                let d = &factor * &b[col][k];
                b[r][k] -= d;
            }
        }
    }
    debug_assert!(a.iter().enumerate().all(|(i, row)| row[i].is_one() && row.iter().filter(|v| !v.is_zero()).count() == 1));
    Some(b)
}
