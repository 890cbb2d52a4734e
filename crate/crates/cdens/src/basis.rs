//! Multi-index enumeration and polynomial basis vectors.
//!
//! The covariate basis collects `u^ν / ν!` over all multi-indices with total
//! degree at most the polynomial order, graded by degree and ordered
//! lexicographically (descending) within each degree, so index 0 is the
//! intercept and degree blocks are contiguous. With the factorial folded into
//! the basis, the fitted coefficient of a term directly estimates the
//! corresponding partial derivative.

use crate::error::{Error, Result};

/// Ordered set of multi-indices with total degree `0..=order` in `d` variables.
#[derive(Clone, Debug)]
pub struct MultiIndexSet {
    d: usize,
    order: usize,
    indices: Vec<Vec<usize>>,
}

/// Number of multi-indices in `d` variables with total degree at most `order`:
/// `(d + order)! / (order! d!)`, computed multiplicatively.
pub fn basis_dimension(d: usize, order: usize) -> usize {
    let mut num = 1usize;
    for k in 1..=order {
        num = num * (d + k) / k;
    }
    num
}

fn push_degree(d: usize, degree: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if d == 1 {
        prefix.push(degree);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=degree).rev() {
        prefix.push(first);
        push_degree(d - 1, degree - first, prefix, out);
        prefix.pop();
    }
}

impl MultiIndexSet {
    pub fn new(d: usize, order: usize) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        let mut indices = Vec::with_capacity(basis_dimension(d, order));
        let mut prefix = Vec::with_capacity(d);
        for degree in 0..=order {
            push_degree(d, degree, &mut prefix, &mut indices);
        }
        MultiIndexSet { d, order, indices }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    /// Position of `nu` in the graded ordering; index 0 is the zero index.
    pub fn unit_vector_index(&self, nu: &[usize]) -> Result<usize> {
        if nu.len() != self.d {
            return Err(Error::InvalidConfig(format!(
                "multi-index length {} does not match dimension {}",
                nu.len(),
                self.d
            )));
        }
        let total: usize = nu.iter().sum();
        if total > self.order {
            return Err(Error::InvalidConfig(format!(
                "multi-index degree {total} exceeds basis order {}",
                self.order
            )));
        }
        Ok(self
            .indices
            .iter()
            .position(|ix| ix == nu)
            .expect("complete enumeration contains every admissible index"))
    }

    /// Basis vector `q(u)` with entries `u^ν / ν!`.
    pub fn poly_vector(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.indices.len()];
        self.poly_vector_into(u, &mut out);
        out
    }

    /// Allocation-free variant for hot loops.
    pub fn poly_vector_into(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.d);
        debug_assert_eq!(out.len(), self.indices.len());
        for (slot, nu) in out.iter_mut().zip(self.indices.iter()) {
            let mut val = 1.0;
            for (k, &e) in nu.iter().enumerate() {
                for j in 1..=e {
                    val *= u[k] / j as f64;
                }
            }
            *slot = val;
        }
    }
}

/// Univariate basis vector `p(u)` of length `p + 1` with entries `u^μ / μ!`.
pub fn poly_vector_y(p: usize, u: f64) -> Vec<f64> {
    let mut out = vec![0.0; p + 1];
    poly_vector_y_into(u, &mut out);
    out
}

/// Allocation-free variant; the order is implied by `out.len() - 1`.
pub fn poly_vector_y_into(u: f64, out: &mut [f64]) {
    let mut val = 1.0;
    out[0] = val;
    for (j, slot) in out.iter_mut().enumerate().skip(1) {
        val *= u / j as f64;
        *slot = val;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dimensions() {
        assert_eq!(basis_dimension(1, 1), 2);
        assert_eq!(basis_dimension(2, 2), 6);
        assert_eq!(basis_dimension(3, 0), 1);
        assert_eq!(basis_dimension(2, 3), 10);
    }

    #[test]
    fn graded_ordering_d2() {
        let ms = MultiIndexSet::new(2, 2);
        let expected: Vec<Vec<usize>> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
        ];
        assert_eq!(ms.indices(), expected.as_slice());
    }

    #[test]
    fn poly_vector_examples() {
        let ms = MultiIndexSet::new(2, 1);
        assert_eq!(ms.poly_vector(&[0.0, 0.0]), vec![1.0, 0.0, 0.0]);

        let ms = MultiIndexSet::new(1, 2);
        assert_eq!(ms.poly_vector(&[2.0]), vec![1.0, 2.0, 2.0]);

        let ms = MultiIndexSet::new(2, 2);
        assert_eq!(
            ms.poly_vector(&[1.0, 1.0]),
            vec![1.0, 1.0, 1.0, 0.5, 1.0, 0.5]
        );
    }

    #[test]
    fn poly_vector_y_examples() {
        assert_eq!(poly_vector_y(2, 0.0), vec![1.0, 0.0, 0.0]);
        assert_eq!(poly_vector_y(3, 1.0), vec![1.0, 1.0, 0.5, 1.0 / 6.0]);
        assert_eq!(poly_vector_y(2, -2.0), vec![1.0, -2.0, 2.0]);
    }

    #[test]
    fn unit_vector_positions() {
        let ms = MultiIndexSet::new(1, 2);
        assert_eq!(ms.unit_vector_index(&[0]).unwrap(), 0);
        assert_eq!(ms.unit_vector_index(&[2]).unwrap(), 2);
        assert!(ms.unit_vector_index(&[3]).is_err());

        let ms = MultiIndexSet::new(2, 2);
        assert_eq!(ms.unit_vector_index(&[0, 0]).unwrap(), 0);
        assert_eq!(ms.unit_vector_index(&[1, 1]).unwrap(), 4);
    }

    // The coefficient of a ν term in this basis is the ν-th partial
    // derivative at the expansion point: check by central differences on a
    // random quadratic in two variables.
    #[test]
    fn coefficients_are_derivatives() {
        let ms = MultiIndexSet::new(2, 2);
        let beta = [0.7, -1.3, 0.4, 2.1, -0.6, 1.9];
        let f = |u: &[f64]| -> f64 {
            ms.poly_vector(u)
                .iter()
                .zip(beta.iter())
                .map(|(b, c)| b * c)
                .sum()
        };
        let eps = 1e-4;
        // d/du1 at 0
        let d1 = (f(&[eps, 0.0]) - f(&[-eps, 0.0])) / (2.0 * eps);
        assert!((d1 - beta[1]).abs() < 1e-6);
        // d2/du1 du2 at 0
        let d12 = (f(&[eps, eps]) - f(&[eps, -eps]) - f(&[-eps, eps]) + f(&[-eps, -eps]))
            / (4.0 * eps * eps);
        assert!((d12 - beta[4]).abs() < 1e-6);
        // d2/du1^2 at 0
        let d11 = (f(&[eps, 0.0]) - 2.0 * f(&[0.0, 0.0]) + f(&[-eps, 0.0])) / (eps * eps);
        assert!((d11 - beta[3]).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn basis_length_matches_dimension(d in 1usize..4, order in 0usize..4,
                                          u in prop::collection::vec(-2.0f64..2.0, 3)) {
            let ms = MultiIndexSet::new(d, order);
            prop_assert_eq!(ms.len(), basis_dimension(d, order));
            let v = ms.poly_vector(&u[..d]);
            prop_assert_eq!(v.len(), basis_dimension(d, order));
            prop_assert_eq!(v[0], 1.0);
        }
    }
}
