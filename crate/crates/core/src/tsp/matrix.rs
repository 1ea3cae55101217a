use crate::scalar::Scalar;

use super::TspError;

/// Dense symmetric distance matrix with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DistanceMatrix<T> {
    /// Builds the matrix from a pairwise distance function evaluated on the
    /// upper triangle and mirrored.
    pub fn from_fn<F>(n: usize, mut f: F) -> Result<Self, TspError>
    where
        F: FnMut(usize, usize) -> T,
    {
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                check_entry(i, j, v)?;
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Ok(Self { n, data })
    }

    /// Validates a full square table. The table must already be symmetric.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, TspError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(TspError::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                check_entry(i, j, v)?;
                if i == j && v != T::zero() {
                    return Err(TspError::NonZeroDiagonal { i });
                }
            }
            data.extend_from_slice(row);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if data[i * n + j] != data[j * n + i] {
                    return Err(TspError::Asymmetric { i, j });
                }
            }
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn max_distance(&self) -> T {
        self.data.iter().copied().fold(T::zero(), T::max)
    }

    /// Mean over the `n(n-1)` off-diagonal entries.
    pub fn mean_distance(&self) -> T {
        if self.n < 2 {
            return T::zero();
        }
        let sum: T = self.data.iter().copied().sum();
        sum / T::of((self.n * (self.n - 1)) as f64)
    }

    /// Absolute tolerance below which a length change is treated as zero.
    pub fn tolerance(&self) -> T {
        let scale = self.max_distance().max(T::one());
        scale * T::of(1e-9)
    }

    pub fn cast<U: Scalar>(&self) -> DistanceMatrix<U> {
        DistanceMatrix {
            n: self.n,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

fn check_entry<T: Scalar>(i: usize, j: usize, v: T) -> Result<(), TspError> {
    if !v.is_finite() {
        return Err(TspError::NonFinite { i, j });
    }
    if v < T::zero() {
        return Err(TspError::NegativeDistance { i, j });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_fn_mirrors_upper_triangle() {
        let d = DistanceMatrix::<f64>::from_fn(3, |i, j| (i + j) as f64).unwrap();
        assert_eq!(d.get(2, 1), 3.0);
        assert_eq!(d.get(1, 2), 3.0);
        assert_eq!(d.get(1, 1), 0.0);
        assert_eq!(d.max_distance(), 3.0);
        assert!((d.mean_distance() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_tables() {
        let asym = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(matches!(
            DistanceMatrix::<f64>::from_rows(&asym),
            Err(TspError::Asymmetric { .. })
        ));
        let neg = vec![vec![0.0, -1.0], vec![-1.0, 0.0]];
        assert!(matches!(
            DistanceMatrix::<f64>::from_rows(&neg),
            Err(TspError::NegativeDistance { .. })
        ));
        let nan = |_: usize, _: usize| f64::NAN;
        assert!(matches!(
            DistanceMatrix::<f64>::from_fn(2, nan),
            Err(TspError::NonFinite { .. })
        ));
    }
}
