//! Lagrange bases of arbitrary order on the reference triangle and affine
//! element maps.
//!
//! The reference triangle has vertices `(0,0)`, `(1,0)`, `(0,1)`. Local edge
//! `e` runs from vertex `e` to vertex `(e + 1) % 3`. Nodes are the uniform
//! lattice `(i/k, j/k)`, ordered vertices first, then the interior nodes of
//! edges 0, 1, 2 (each from its first vertex to its second), then the cell
//! interior.

use crate::error::{Result, SbmError};
use crate::poly::{
    monomial_count, monomial_derivative_tables, monomial_exponents, DerivTable, Poly2,
};
use crate::scalar::{from_usize, BigRational, Real, Scalar};

/// Highest polynomial order supported by the element.
pub const MAX_ORDER: usize = 5;

/// Order-`k` Lagrange basis with monomial coefficient expansions.
#[derive(Debug, Clone)]
pub struct ReferenceBasis<T> {
    order: usize,
    nodes: Vec<[T; 2]>,
    functions: Vec<Poly2<T>>,
}

impl<T: Scalar> ReferenceBasis<T> {
    pub fn new(order: usize) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(SbmError::Argument(format!(
                "order must be in 1..{MAX_ORDER}"
            )));
        }
        // the Vandermonde inverse is computed exactly and rounded once
        let exact = lattice_nodes::<BigRational>(order);
        let n = exact.len();
        let exps = monomial_exponents(order);
        let vandermonde: Vec<Vec<BigRational>> = exact
            .iter()
            .map(|p| {
                exps.iter()
                    .map(|&(a, b)| pow(&p[0], a) * pow(&p[1], b))
                    .collect()
            })
            .collect();
        let inv = invert(vandermonde)?;
        let functions = (0..n)
            .map(|i| {
                Poly2::from_coeffs(
                    order,
                    (0..n).map(|m| T::from_rational(&inv[m][i])).collect(),
                )
            })
            .collect();
        let nodes = exact
            .iter()
            .map(|p| [T::from_rational(&p[0]), T::from_rational(&p[1])])
            .collect();
        Ok(Self {
            order,
            nodes,
            functions,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of basis functions, `(k+1)(k+2)/2`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[T; 2]] {
        &self.nodes
    }

    pub fn function(&self, i: usize) -> &Poly2<T> {
        &self.functions[i]
    }

    /// Local indices of the interior nodes of local edge `e`, ordered from
    /// the edge's first vertex to its second.
    pub fn edge_nodes(&self, e: usize) -> std::ops::Range<usize> {
        let per_edge = self.order - 1;
        let start = 3 + e * per_edge;
        start..start + per_edge
    }

    pub fn interior_nodes(&self) -> std::ops::Range<usize> {
        3 + 3 * (self.order - 1)..self.len()
    }

    pub fn eval(&self, p: &[T; 2]) -> Vec<T> {
        self.functions.iter().map(|f| f.eval(p)).collect()
    }

    /// Derivative tables through `max_order` of every basis function at the
    /// reference point `p`.
    pub fn eval_derivatives(&self, p: &[T; 2], max_order: usize) -> Result<Vec<DerivTable<T>>> {
        if max_order > self.order {
            return Err(SbmError::Argument(format!(
                "derivative order {max_order} exceeds basis order {}",
                self.order
            )));
        }
        let monos = monomial_derivative_tables(p, self.order, max_order);
        Ok(self
            .functions
            .iter()
            .map(|f| {
                let mut t = DerivTable::zeros(max_order);
                for (c, m) in f.coeffs().iter().zip(&monos) {
                    if !c.is_zero() {
                        t.add_scaled(c, m);
                    }
                }
                t
            })
            .collect())
    }

    /// Nodal interpolant of `f` given in reference coordinates.
    pub fn interpolate(&self, f: impl Fn(&[T; 2]) -> T) -> Vec<T> {
        self.nodes.iter().map(f).collect()
    }
}

fn pow<T: Scalar>(x: &T, n: usize) -> T {
    (0..n).fold(T::one(), |acc, _| acc * x.clone())
}

fn lattice_nodes<T: Scalar>(k: usize) -> Vec<[T; 2]> {
    let c = |i: usize, j: usize| {
        [
            from_usize::<T>(i) / from_usize(k),
            from_usize::<T>(j) / from_usize(k),
        ]
    };
    let mut nodes = vec![c(0, 0), c(k, 0), c(0, k)];
    for j in 1..k {
        nodes.push(c(j, 0));
    }
    for j in 1..k {
        nodes.push(c(k - j, j));
    }
    for j in 1..k {
        nodes.push(c(0, k - j));
    }
    for j in 1..k {
        for i in 1..k - j {
            nodes.push(c(i, j));
        }
    }
    debug_assert_eq!(nodes.len(), monomial_count(k));
    nodes
}

/// Gauss-Jordan inversion with partial pivoting.
fn invert<T: Scalar>(mut a: Vec<Vec<T>>) -> Result<Vec<Vec<T>>> {
    let n = a.len();
    let mut inv: Vec<Vec<T>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { T::one() } else { T::zero() })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i][col]
                    .abs()
                    .partial_cmp(&a[j][col].abs())
                    .expect("comparable")
            })
            .expect("non-empty range");
        if a[pivot][col].is_zero() {
            return Err(SbmError::Singular("Vandermonde matrix".into()));
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] = a[col][j].clone() / p.clone();
            inv[col][j] = inv[col][j].clone() / p.clone();
        }
        for i in 0..n {
            if i != col && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                for j in 0..n {
                    a[i][j] = a[i][j].clone() - f.clone() * a[col][j].clone();
                    inv[i][j] = inv[i][j].clone() - f.clone() * inv[col][j].clone();
                }
            }
        }
    }
    Ok(inv)
}

/// Affine map from the reference triangle onto a physical triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMap<T> {
    origin: [T; 2],
    /// `jacobian[r][c] = d x_r / d xi_c`
    jacobian: [[T; 2]; 2],
    /// `inverse[r][c] = d xi_r / d x_c`
    inverse: [[T; 2]; 2],
    det: T,
}

impl<T: Real> ElementMap<T> {
    pub fn new(vertices: [[T; 2]; 3]) -> Result<Self> {
        let [p0, p1, p2] = vertices;
        let jacobian = [
            [p1[0] - p0[0], p2[0] - p0[0]],
            [p1[1] - p0[1], p2[1] - p0[1]],
        ];
        let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
        if !(det > T::zero()) {
            return Err(SbmError::Argument(format!(
                "triangle is degenerate or clockwise (det = {:e})",
                det.to_f64().unwrap_or(f64::NAN)
            )));
        }
        let inverse = [
            [jacobian[1][1] / det, -jacobian[0][1] / det],
            [-jacobian[1][0] / det, jacobian[0][0] / det],
        ];
        Ok(Self {
            origin: p0,
            jacobian,
            inverse,
            det,
        })
    }

    pub fn det(&self) -> T {
        self.det
    }

    pub fn jacobian(&self) -> [[T; 2]; 2] {
        self.jacobian
    }

    pub fn inverse_jacobian(&self) -> [[T; 2]; 2] {
        self.inverse
    }

    pub fn map(&self, xi: [T; 2]) -> [T; 2] {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    pub fn inverse_map(&self, x: [T; 2]) -> [T; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let g = &self.inverse;
        [
            g[0][0] * d[0] + g[0][1] * d[1],
            g[1][0] * d[0] + g[1][1] * d[1],
        ]
    }

    /// Physical gradient from a reference gradient.
    pub fn gradient(&self, reference: [T; 2]) -> [T; 2] {
        let g = &self.inverse;
        [
            g[0][0] * reference[0] + g[1][0] * reference[1],
            g[0][1] * reference[0] + g[1][1] * reference[1],
        ]
    }

    /// Physical derivative table from a reference one, by the chain rule
    /// `d/dx_c = sum_r (d xi_r / d x_c) d/d xi_r` applied to every order.
    pub fn physical_derivatives(&self, reference: &DerivTable<T>) -> DerivTable<T> {
        let g = &self.inverse;
        let mut out = DerivTable::zeros(reference.max_order());
        let mut idx = 0;
        for s in 0..=reference.max_order() {
            let src = reference.order(s);
            for b in 0..=s {
                let a = s - b;
                // coefficients over d_xi^p d_eta^(s-p), indexed by p
                let mut poly = vec![T::one()];
                for _ in 0..a {
                    poly = mul_linear(&poly, g[0][0], g[1][0]);
                }
                for _ in 0..b {
                    poly = mul_linear(&poly, g[0][1], g[1][1]);
                }
                let mut v = T::zero();
                for (p, c) in poly.iter().enumerate() {
                    // reference entry (p, s - p) sits at position s - p
                    v = v + *c * src[s - p];
                }
                out.values_mut()[idx] = v;
                idx += 1;
            }
        }
        out
    }
}

/// Multiplies a homogeneous polynomial in `(X, Y)`, stored by power of `X`,
/// with `(cx X + cy Y)`.
fn mul_linear<T: Real>(poly: &[T], cx: T, cy: T) -> Vec<T> {
    let mut out = vec![T::zero(); poly.len() + 1];
    for (p, &c) in poly.iter().enumerate() {
        out[p + 1] = out[p + 1] + c * cx;
        out[p] = out[p] + c * cy;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::monomial_index;
    use approx::assert_relative_eq;
    use num::BigRational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_ref_point(rng: &mut impl Rng) -> [f64; 2] {
        loop {
            let p = [rng.gen::<f64>(), rng.gen::<f64>()];
            if p[0] + p[1] <= 1.0 {
                return p;
            }
        }
    }

    #[test]
    fn kronecker_and_partition_of_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 1..=MAX_ORDER {
            let basis = ReferenceBasis::<f64>::new(k).unwrap();
            assert_eq!(basis.len(), (k + 1) * (k + 2) / 2);
            for (j, node) in basis.nodes().iter().enumerate() {
                for (i, v) in basis.eval(node).iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expected).abs() < 1e-12, "k={k} i={i} j={j} v={v}");
                }
            }
            for _ in 0..20 {
                let p = random_ref_point(&mut rng);
                let sum: f64 = basis.eval(&p).iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rational_basis_is_exactly_kronecker() {
        let basis = ReferenceBasis::<BigRational>::new(4).unwrap();
        for (j, node) in basis.nodes().iter().enumerate() {
            for (i, v) in basis.eval(node).into_iter().enumerate() {
                let expected = if i == j { 1 } else { 0 };
                assert_eq!(v, BigRational::from_integer(expected.into()));
            }
        }
    }

    #[test]
    fn edge_nodes_lie_on_their_edges() {
        let basis = ReferenceBasis::<f64>::new(4).unwrap();
        let verts: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for e in 0..3 {
            let (a, b) = (verts[e], verts[(e + 1) % 3]);
            let mut last_t = 0.0;
            for n in basis.edge_nodes(e) {
                let p = basis.nodes()[n];
                let t = if (b[0] - a[0]).abs() > 0.0 {
                    (p[0] - a[0]) / (b[0] - a[0])
                } else {
                    (p[1] - a[1]) / (b[1] - a[1])
                };
                assert!(t > last_t);
                last_t = t;
                let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                assert_relative_eq!(p[0], q[0], epsilon = 1e-15);
                assert_relative_eq!(p[1], q[1], epsilon = 1e-15);
            }
        }
        assert_eq!(basis.interior_nodes().len(), 3);
    }

    #[test]
    fn high_order_derivatives_vanish() {
        let basis = ReferenceBasis::<f64>::new(3).unwrap();
        for f in 0..basis.len() {
            let d = basis.function(f).derivative(4, 0);
            assert!(d.coeffs().iter().all(|c| *c == 0.0));
            assert!(basis
                .function(f)
                .derivative(2, 2)
                .coeffs()
                .iter()
                .all(|c| *c == 0.0));
        }
        assert!(basis.eval_derivatives(&[0.2, 0.2], 4).is_err());
    }

    #[test]
    fn linear_basis_has_constant_gradients() {
        let basis = ReferenceBasis::<f64>::new(1).unwrap();
        let a = basis.eval_derivatives(&[0.1, 0.2], 1).unwrap();
        let b = basis.eval_derivatives(&[0.6, 0.3], 1).unwrap();
        for (ta, tb) in a.iter().zip(&b) {
            assert_eq!(ta.gradient(), tb.gradient());
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-6;
        for k in 1..=MAX_ORDER {
            let basis = ReferenceBasis::<f64>::new(k).unwrap();
            for _ in 0..10 {
                let p = loop {
                    let p = random_ref_point(&mut rng);
                    if p[0] > 0.01 && p[1] > 0.01 && p[0] + p[1] < 0.98 {
                        break p;
                    }
                };
                let tables = basis.eval_derivatives(&p, 1).unwrap();
                for (f, t) in tables.iter().enumerate() {
                    let phi = basis.function(f);
                    let fx =
                        (phi.eval(&[p[0] + h, p[1]]) - phi.eval(&[p[0] - h, p[1]])) / (2.0 * h);
                    let fy =
                        (phi.eval(&[p[0], p[1] + h]) - phi.eval(&[p[0], p[1] - h])) / (2.0 * h);
                    assert!((t.gradient()[0] - fx).abs() < 1e-6);
                    assert!((t.gradient()[1] - fy).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let verts = [[0.3, 0.1], [0.9, 0.4], [0.2, 0.8]];
        let map = ElementMap::new(verts).unwrap();
        for k in 1..=MAX_ORDER {
            let basis = ReferenceBasis::<f64>::new(k).unwrap();
            let coeffs: Vec<f64> = (0..monomial_count(k))
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let q = Poly2::from_coeffs(k, coeffs);
            let nodal = basis.interpolate(|xi| q.eval(&map.map(*xi)));
            for _ in 0..100 {
                let xi = random_ref_point(&mut rng);
                let approx: f64 = basis.eval(&xi).iter().zip(&nodal).map(|(a, b)| a * b).sum();
                let exact = q.eval(&map.map(xi));
                assert!((approx - exact).abs() < 1e-11, "k={k}: {approx} vs {exact}");
            }
        }
    }

    #[test]
    fn physical_second_derivatives_of_x_squared() {
        // u(x, y) = x^2 on a sheared element, expanded in the k = 2 basis
        let verts = [[0.1, 0.2], [0.5, 0.3], [0.2, 0.7]];
        let map = ElementMap::new(verts).unwrap();
        let basis = ReferenceBasis::<f64>::new(2).unwrap();
        let nodal = basis.interpolate(|xi| map.map(*xi)[0].powi(2));
        let xi = [0.25, 0.25];
        let tables = basis.eval_derivatives(&xi, 2).unwrap();
        let mut u = DerivTable::zeros(2);
        for (c, t) in nodal.iter().zip(&tables) {
            u.add_scaled(c, &map.physical_derivatives(t));
        }
        let x = map.map(xi);
        assert_relative_eq!(
            u.values()[monomial_index(1, 0)],
            2.0 * x[0],
            epsilon = 1e-12
        );
        assert_relative_eq!(u.values()[monomial_index(0, 1)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(u.values()[monomial_index(2, 0)], 2.0, epsilon = 1e-12);
        assert_relative_eq!(u.values()[monomial_index(1, 1)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(u.values()[monomial_index(0, 2)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn physical_derivatives_match_polynomial_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let verts = [[0.3, 0.1], [0.9, 0.4], [0.2, 0.8]];
        let map = ElementMap::new(verts).unwrap();
        let k = 5;
        let basis = ReferenceBasis::<f64>::new(k).unwrap();
        let q = Poly2::from_coeffs(
            k,
            (0..monomial_count(k))
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        );
        let nodal = basis.interpolate(|xi| q.eval(&map.map(*xi)));
        let xi = [0.2, 0.3];
        let mut u = DerivTable::zeros(k);
        for (c, t) in nodal
            .iter()
            .zip(basis.eval_derivatives(&xi, k).unwrap().iter())
        {
            u.add_scaled(c, &map.physical_derivatives(t));
        }
        let exact = q.derivative_table(&map.map(xi), k);
        for (a, b) in u.values().iter().zip(exact.values()) {
            assert!((a - b).abs() < 1e-7 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn element_map_round_trips() {
        let verts = [[0.3, 0.1], [0.9, 0.4], [0.2, 0.8]];
        let map = ElementMap::new(verts).unwrap();
        for (xi, v) in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]].into_iter().zip(verts) {
            let x = map.map(xi);
            assert_relative_eq!(x[0], v[0], epsilon = 1e-15);
            assert_relative_eq!(x[1], v[1], epsilon = 1e-15);
        }
        let x = [0.4, 0.4];
        let back = map.map(map.inverse_map(x));
        assert_relative_eq!(back[0], x[0], epsilon = 1e-15);
        assert_relative_eq!(back[1], x[1], epsilon = 1e-15);
        assert!(ElementMap::new([verts[0], verts[2], verts[1]]).is_err());
    }
}
