//! Bivariate polynomials in the monomial basis and tables of their partial
//! derivatives.
//!
//! Monomials `x^a y^b` with `a + b <= d` are stored graded by total degree and,
//! within one degree, by descending power of `x`. Derivative tables use the
//! same layout, indexed by the multi-index of the derivative instead.

use crate::scalar::{from_usize, Scalar};

/// Number of monomials of total degree at most `degree`.
pub const fn monomial_count(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Storage index of `x^a y^b` (equivalently of the derivative `d^a/dx^a d^b/dy^b`).
pub const fn monomial_index(a: usize, b: usize) -> usize {
    let s = a + b;
    s * (s + 1) / 2 + b
}

/// Exponent pairs `(a, b)` in storage order.
pub fn monomial_exponents(degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(monomial_count(degree));
    for s in 0..=degree {
        for b in 0..=s {
            out.push((s - b, b));
        }
    }
    out
}

fn falling<T: Scalar>(n: usize, k: usize) -> T {
    let mut acc = T::one();
    for i in 0..k {
        acc = acc * from_usize::<T>(n - i);
    }
    acc
}

fn powers<T: Scalar>(x: &T, n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(T::one());
    for i in 0..n {
        let next = out[i].clone() * x.clone();
        out.push(next);
    }
    out
}

/// Partial derivatives of one function at one point, all multi-indices of
/// total order `0..=max_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivTable<T> {
    max_order: usize,
    values: Vec<T>,
}

impl<T: Scalar> DerivTable<T> {
    pub fn zeros(max_order: usize) -> Self {
        Self {
            max_order,
            values: vec![T::zero(); monomial_count(max_order)],
        }
    }

    pub fn from_values(max_order: usize, values: Vec<T>) -> Self {
        assert_eq!(
            values.len(),
            monomial_count(max_order),
            "derivative table size"
        );
        Self { max_order, values }
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// `d^{a+b} u / dx^a dy^b`, if the table is deep enough.
    pub fn get(&self, a: usize, b: usize) -> Option<&T> {
        if a + b > self.max_order {
            None
        } else {
            Some(&self.values[monomial_index(a, b)])
        }
    }

    pub fn value(&self) -> &T {
        &self.values[0]
    }

    pub fn gradient(&self) -> [T; 2] {
        [self.values[1].clone(), self.values[2].clone()]
    }

    /// Entries of total order `s`, in descending power of `x`.
    pub fn order(&self, s: usize) -> &[T] {
        let start = monomial_index(s, 0);
        &self.values[start..start + s + 1]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Table of the partial derivative `d/dx` (`axis = 0`) or `d/dy`
    /// (`axis = 1`), one order shallower.
    pub fn partial(&self, axis: usize) -> Option<Self> {
        if self.max_order == 0 {
            return None;
        }
        let m = self.max_order - 1;
        let mut values = Vec::with_capacity(monomial_count(m));
        for (a, b) in monomial_exponents(m) {
            let (da, db) = if axis == 0 { (a + 1, b) } else { (a, b + 1) };
            values.push(self.values[monomial_index(da, db)].clone());
        }
        Some(Self {
            max_order: m,
            values,
        })
    }

    /// `self += scale * other` over the common orders.
    pub fn add_scaled(&mut self, scale: &T, other: &Self) {
        let n = self.values.len().min(other.values.len());
        for (dst, src) in self.values[..n].iter_mut().zip(&other.values[..n]) {
            *dst = dst.clone() + scale.clone() * src.clone();
        }
    }
}

/// Derivative tables of every monomial of degree `<= degree` at `p`.
///
/// Returns one table per monomial, in monomial storage order.
pub fn monomial_derivative_tables<T: Scalar>(
    p: &[T; 2],
    degree: usize,
    max_order: usize,
) -> Vec<DerivTable<T>> {
    let xs = powers(&p[0], degree);
    let ys = powers(&p[1], degree);
    monomial_exponents(degree)
        .into_iter()
        .map(|(a, b)| {
            let mut table = DerivTable::zeros(max_order);
            for (da, db) in monomial_exponents(max_order) {
                if da <= a && db <= b {
                    let c = falling::<T>(a, da) * falling::<T>(b, db);
                    table.values[monomial_index(da, db)] =
                        c * xs[a - da].clone() * ys[b - db].clone();
                }
            }
            table
        })
        .collect()
}

/// Polynomial in two variables of total degree at most `degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2<T> {
    degree: usize,
    coeffs: Vec<T>,
}

impl<T: Scalar> Poly2<T> {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            coeffs: vec![T::zero(); monomial_count(degree)],
        }
    }

    pub fn from_coeffs(degree: usize, coeffs: Vec<T>) -> Self {
        assert_eq!(coeffs.len(), monomial_count(degree), "coefficient count");
        Self { degree, coeffs }
    }

    /// Builds a polynomial from `(a, b, c)` terms `c x^a y^b`.
    pub fn from_terms(degree: usize, terms: &[(usize, usize, T)]) -> Self {
        let mut p = Self::zero(degree);
        for (a, b, c) in terms {
            assert!(a + b <= degree, "term exceeds declared degree");
            let slot = &mut p.coeffs[monomial_index(*a, *b)];
            *slot = slot.clone() + c.clone();
        }
        p
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, a: usize, b: usize) -> &T {
        &self.coeffs[monomial_index(a, b)]
    }

    pub fn eval(&self, p: &[T; 2]) -> T {
        let xs = powers(&p[0], self.degree);
        let ys = powers(&p[1], self.degree);
        let mut acc = T::zero();
        for ((a, b), c) in monomial_exponents(self.degree)
            .into_iter()
            .zip(&self.coeffs)
        {
            if !c.is_zero() {
                acc = acc + c.clone() * xs[a].clone() * ys[b].clone();
            }
        }
        acc
    }

    /// Multiplies every coefficient by `c`.
    pub fn scale(mut self, c: T) -> Self {
        for v in &mut self.coeffs {
            *v = v.clone() * c.clone();
        }
        self
    }

    /// The partial derivative `d^{dx+dy} / dx^dx dy^dy` as a new polynomial.
    pub fn derivative(&self, dx: usize, dy: usize) -> Self {
        let mut out = Self::zero(self.degree);
        for ((a, b), c) in monomial_exponents(self.degree)
            .into_iter()
            .zip(&self.coeffs)
        {
            if a >= dx && b >= dy {
                let k = falling::<T>(a, dx) * falling::<T>(b, dy);
                out.coeffs[monomial_index(a - dx, b - dy)] = k * c.clone();
            }
        }
        out
    }

    /// All partial derivatives through `max_order` at `p`.
    pub fn derivative_table(&self, p: &[T; 2], max_order: usize) -> DerivTable<T> {
        let monos = monomial_derivative_tables(p, self.degree, max_order);
        let mut table = DerivTable::zeros(max_order);
        for (c, mono) in self.coeffs.iter().zip(&monos) {
            if !c.is_zero() {
                table.add_scaled(c, mono);
            }
        }
        table
    }
}
