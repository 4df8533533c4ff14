//! Gauss quadrature on the unit segment and the reference triangle.

use crate::scalar::{from_f64, from_usize, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T, const D: usize> {
    pub points: Vec<[T; D]>,
    pub weights: Vec<T>,
    /// Highest total polynomial degree integrated exactly.
    pub exact_degree: usize,
}

/// Rule on the reference triangle `(0,0)`, `(1,0)`, `(0,1)` (weights sum to 1/2).
pub type TriangleRule<T> = QuadratureRule<T, 2>;
/// Rule on the unit segment `[0, 1]` (weights sum to 1).
pub type SegmentRule<T> = QuadratureRule<T, 1>;

impl<T: Real, const D: usize> QuadratureRule<T, D> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&[T; D]) -> T) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (p, w)| acc + *w * f(p))
    }
}

/// `n`-point Gauss-Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "at least one Gauss point");
    let one = T::one();
    let two = one + one;
    let half = from_f64::<T>(0.5);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = from_usize::<T>(n);
    for i in 0..n {
        let mut x = (T::PI() * (from_usize::<T>(i) + from_f64(0.75)) / (nf + half)).cos();
        let mut dp = one;
        for _ in 0..100 {
            let (mut p0, mut p1) = (one, x);
            for j in 2..=n {
                let jf = from_usize::<T>(j);
                let p2 = ((two * jf - one) * x * p1 - (jf - one) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - one);
            let dx = p1 / dp;
            x = x - dx;
            if dx.abs() <= T::epsilon() {
                break;
            }
        }
        // Newton's last step leaves dp one iterate stale; refresh it
        let (mut p0, mut p1) = (one, x);
        for j in 2..=n {
            let jf = from_usize::<T>(j);
            let p2 = ((two * jf - one) * x * p1 - (jf - one) * p0) / jf;
            p0 = p1;
            p1 = p2;
        }
        if n > 1 {
            dp = nf * (x * p1 - p0) / (x * x - one);
        }
        // ascending order on [0, 1]
        nodes[n - 1 - i] = (one + x) * half;
        weights[n - 1 - i] = one / ((one - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Gauss-Legendre rule on `[0, 1]` with `ceil((d + 1) / 2)` points.
pub fn segment_rule<T: Real>(exact_degree: usize) -> SegmentRule<T> {
    let n = exact_degree / 2 + 1;
    let (nodes, weights) = gauss_legendre::<T>(n);
    QuadratureRule {
        points: nodes.into_iter().map(|t| [t]).collect(),
        weights,
        exact_degree,
    }
}

/// Collapsed (Duffy) tensor Gauss rule on the reference triangle:
/// `x = u`, `y = v (1 - u)`, with the extra `(1 - u)` Jacobian factor
/// absorbed by one more point in `u`.
pub fn triangle_rule<T: Real>(exact_degree: usize) -> TriangleRule<T> {
    let nu = (exact_degree + 3) / 2;
    let nv = exact_degree / 2 + 1;
    let (us, wus) = gauss_legendre::<T>(nu);
    let (vs, wvs) = gauss_legendre::<T>(nv);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (u, wu) in us.iter().zip(&wus) {
        for (v, wv) in vs.iter().zip(&wvs) {
            let s = T::one() - *u;
            points.push([*u, *v * s]);
            weights.push(*wu * *wv * s);
        }
    }
    QuadratureRule {
        points,
        weights,
        exact_degree,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{monomial_exponents, Poly2};
    use crate::scalar::FACTORIALS;
    use approx::assert_relative_eq;
    use num::{BigInt, BigRational};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exact integral of `x^a y^b` over the reference triangle: `a! b! / (a + b + 2)!`.
    fn exact_monomial(a: usize, b: usize) -> BigRational {
        let f =
            |n: usize| -> BigInt { (1..=n).fold(BigInt::from(1), |acc, i| acc * BigInt::from(i)) };
        BigRational::new(f(a) * f(b), f(a + b + 2))
    }

    #[test]
    fn weights_sum_to_reference_measure() {
        for d in 0..16 {
            let s = segment_rule::<f64>(d);
            assert_relative_eq!(s.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            let t = triangle_rule::<f64>(d);
            assert_relative_eq!(t.weights.iter().sum::<f64>(), 0.5, epsilon = 1e-14);
            assert!(t.weights.iter().all(|w| *w > 0.0));
        }
    }

    #[test]
    fn segment_rule_of_degree_three() {
        let s = segment_rule::<f64>(3);
        assert_eq!(s.len(), 2);
        assert_relative_eq!(s.integrate(|p| p[0].powi(3)), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn triangle_rule_of_degree_two() {
        let t = triangle_rule::<f64>(2);
        assert_relative_eq!(t.integrate(|p| p[0] * p[1]), 1.0 / 24.0, epsilon = 1e-15);
    }

    #[test]
    fn monomials_integrated_to_exact_degree() {
        for d in 0..=16 {
            let t = triangle_rule::<f64>(d);
            for (a, b) in monomial_exponents(d) {
                let exact =
                    FACTORIALS[a] as f64 * FACTORIALS[b] as f64 / FACTORIALS[a + b + 2] as f64;
                let got = t.integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32));
                assert!(((got - exact) / exact).abs() <= 1e-13, "d={d} a={a} b={b}");
            }
            let s = segment_rule::<f64>(d);
            for a in 0..=d {
                let got = s.integrate(|p| p[0].powi(a as i32));
                assert!((got * (a + 1) as f64 - 1.0).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn degree_thirteen_polynomial_against_rational_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let d = 2 * 5 + 3;
        let terms: Vec<(usize, usize, i64)> = monomial_exponents(d)
            .into_iter()
            .map(|(a, b)| (a, b, rng.gen_range(-50..=50)))
            .collect();
        let exact: BigRational = terms
            .iter()
            .map(|&(a, b, c)| exact_monomial(a, b) * BigRational::from_integer(c.into()))
            .fold(BigRational::from_integer(0.into()), |acc, x| acc + x);
        let exact = num::ToPrimitive::to_f64(&exact).unwrap();
        let q = Poly2::from_terms(
            d,
            &terms
                .iter()
                .map(|&(a, b, c)| (a, b, c as f64))
                .collect::<Vec<_>>(),
        );
        let got = triangle_rule::<f64>(d).integrate(|p| q.eval(p));
        assert!(((got - exact) / exact).abs() <= 1e-12, "{got} vs {exact}");
    }

    #[test]
    fn single_precision_rules() {
        let t = triangle_rule::<f32>(4);
        assert!((t.integrate(|p| p[0] * p[0] * p[1] * p[1]) - 1.0 / 180.0).abs() < 1e-6);
    }
}
