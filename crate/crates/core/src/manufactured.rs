//! Exact solutions and the data manufactured from them.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::assembly::MaterialParams;
use crate::poly::Poly2;

pub type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
/// Traction as a function of the boundary point and the outward normal there.
pub type TractionFn = Arc<dyn Fn([f64; 2], [f64; 2]) -> [f64; 2] + Send + Sync>;

/// Scalar field with analytic first and second derivatives.
#[derive(Clone)]
pub struct ExactScalar {
    pub value: ScalarFn,
    pub gradient: VectorFn,
    /// `[u_xx, u_xy, u_yy]`
    pub hessian: Arc<dyn Fn([f64; 2]) -> [f64; 3] + Send + Sync>,
}

impl ExactScalar {
    /// `sin(w x) sin(w y)`.
    pub fn sine_product(w: f64) -> Self {
        Self {
            value: Arc::new(move |p| (w * p[0]).sin() * (w * p[1]).sin()),
            gradient: Arc::new(move |p| {
                let (sx, cx) = (w * p[0]).sin_cos();
                let (sy, cy) = (w * p[1]).sin_cos();
                [w * cx * sy, w * sx * cy]
            }),
            hessian: Arc::new(move |p| {
                let (sx, cx) = (w * p[0]).sin_cos();
                let (sy, cy) = (w * p[1]).sin_cos();
                [-w * w * sx * sy, w * w * cx * cy, -w * w * sx * sy]
            }),
        }
    }

    /// The Poisson benchmark solution `sin(15 pi x) sin(15 pi y)`.
    pub fn poisson_benchmark() -> Self {
        Self::sine_product(15.0 * PI)
    }

    pub fn polynomial(p: Poly2<f64>) -> Self {
        let p = Arc::new(p);
        let (dx, dy) = (Arc::new(p.derivative(1, 0)), Arc::new(p.derivative(0, 1)));
        let (dxx, dxy, dyy) = (
            Arc::new(p.derivative(2, 0)),
            Arc::new(p.derivative(1, 1)),
            Arc::new(p.derivative(0, 2)),
        );
        Self {
            value: Arc::new(move |x| p.eval(&x)),
            gradient: Arc::new(move |x| [dx.eval(&x), dy.eval(&x)]),
            hessian: Arc::new(move |x| [dxx.eval(&x), dxy.eval(&x), dyy.eval(&x)]),
        }
    }

    fn scaled(self, c: f64) -> Self {
        let (v, g, h) = (self.value, self.gradient, self.hessian);
        Self {
            value: Arc::new(move |p| c * v(p)),
            gradient: Arc::new(move |p| {
                let d = g(p);
                [c * d[0], c * d[1]]
            }),
            hessian: Arc::new(move |p| {
                let d = h(p);
                [c * d[0], c * d[1], c * d[2]]
            }),
        }
    }
}

/// Two-component field, each component an [`ExactScalar`].
#[derive(Clone)]
pub struct ExactVector {
    pub components: [ExactScalar; 2],
}

impl ExactVector {
    /// The elasticity benchmark displacement
    /// `u_x = 10 pi sin(10 pi x) sin(10 pi y)`, `u_y = 10 pi cos(10 pi x) cos(10 pi y)`.
    pub fn elasticity_benchmark() -> Self {
        let w = 10.0 * PI;
        let amp = 10.0 * PI;
        let uy = ExactScalar {
            value: Arc::new(move |p| (w * p[0]).cos() * (w * p[1]).cos()),
            gradient: Arc::new(move |p| {
                let (sx, cx) = (w * p[0]).sin_cos();
                let (sy, cy) = (w * p[1]).sin_cos();
                [-w * sx * cy, -w * cx * sy]
            }),
            hessian: Arc::new(move |p| {
                let (sx, cx) = (w * p[0]).sin_cos();
                let (sy, cy) = (w * p[1]).sin_cos();
                [-w * w * cx * cy, w * w * sx * sy, -w * w * cx * cy]
            }),
        };
        Self {
            components: [ExactScalar::sine_product(w).scaled(amp), uy.scaled(amp)],
        }
    }

    pub fn polynomial(ux: Poly2<f64>, uy: Poly2<f64>) -> Self {
        Self {
            components: [ExactScalar::polynomial(ux), ExactScalar::polynomial(uy)],
        }
    }

    pub fn value(&self, p: [f64; 2]) -> [f64; 2] {
        [(self.components[0].value)(p), (self.components[1].value)(p)]
    }

    /// `g[i][j] = d u_i / d x_j`.
    pub fn gradient(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        [
            (self.components[0].gradient)(p),
            (self.components[1].gradient)(p),
        ]
    }
}

/// Isotropic stress from a displacement gradient `g[i][j] = d u_i / d x_j`.
pub fn stress(g: [[f64; 2]; 2], mat: &MaterialParams) -> [[f64; 2]; 2] {
    let div = g[0][0] + g[1][1];
    let off = mat.mu * (g[0][1] + g[1][0]);
    [
        [2.0 * mat.mu * g[0][0] + mat.lambda * div, off],
        [off, 2.0 * mat.mu * g[1][1] + mat.lambda * div],
    ]
}

pub fn mat_vec(s: [[f64; 2]; 2], n: [f64; 2]) -> [f64; 2] {
    [
        s[0][0] * n[0] + s[0][1] * n[1],
        s[1][0] * n[0] + s[1][1] * n[1],
    ]
}

/// Forcing and boundary data of a Poisson problem.
#[derive(Clone)]
pub struct PoissonData {
    pub f: ScalarFn,
    pub u_d: ScalarFn,
}

/// Body force and boundary data of an elasticity problem.
#[derive(Clone)]
pub struct ElasticityData {
    pub b: VectorFn,
    pub u_d: VectorFn,
    pub t_n: TractionFn,
}

/// `f = -laplace(u)`, `u_D = u`.
pub fn manufacture_poisson(u: &ExactScalar) -> PoissonData {
    let h = u.hessian.clone();
    PoissonData {
        f: Arc::new(move |p| {
            let d = h(p);
            -(d[0] + d[2])
        }),
        u_d: u.value.clone(),
    }
}

/// `b = -div(sigma(u)) = -mu laplace(u) - (mu + lambda) grad(div u)`,
/// `u_D = u`, `t_N = sigma(u) n`.
pub fn manufacture_elasticity(u: &ExactVector, mat: &MaterialParams) -> ElasticityData {
    let (mu, lambda) = (mat.mu, mat.lambda);
    let (hx, hy) = (
        u.components[0].hessian.clone(),
        u.components[1].hessian.clone(),
    );
    let b: VectorFn = Arc::new(move |p| {
        let (a, c) = (hx(p), hy(p));
        // grad(div u) = (u_x,xx + u_y,xy, u_x,xy + u_y,yy)
        let gd = [a[0] + c[1], a[1] + c[2]];
        [
            -mu * (a[0] + a[2]) - (mu + lambda) * gd[0],
            -mu * (c[0] + c[2]) - (mu + lambda) * gd[1],
        ]
    });
    let field = u.clone();
    let m = *mat;
    let t_n: TractionFn = Arc::new(move |p, n| mat_vec(stress(field.gradient(p), &m), n));
    let field = u.clone();
    ElasticityData {
        b,
        u_d: Arc::new(move |p| field.value(p)),
        t_n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn poisson_benchmark_forcing() {
        let data = manufacture_poisson(&ExactScalar::poisson_benchmark());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let p = [rng.gen::<f64>(), rng.gen::<f64>()];
            let expected = 450.0 * PI * PI * (15.0 * PI * p[0]).sin() * (15.0 * PI * p[1]).sin();
            assert!(((data.f)(p) - expected).abs() <= 1e-10 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn poisson_of_x_squared() {
        let data = manufacture_poisson(&ExactScalar::polynomial(Poly2::from_terms(
            2,
            &[(2, 0, 1.0)],
        )));
        assert_eq!((data.f)([0.3, 0.9]), -2.0);
        assert_eq!((data.u_d)([0.5, 0.1]), 0.25);
    }

    #[test]
    fn elasticity_forcing_matches_finite_differences_of_stress() {
        let mat = MaterialParams::new(10e9, 0.3).unwrap();
        let u = ExactVector::elasticity_benchmark();
        let data = manufacture_elasticity(&u, &mat);
        let h = 1e-5;
        let sigma = |p: [f64; 2]| stress(u.gradient(p), &mat);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = [rng.gen::<f64>(), rng.gen::<f64>()];
            let (sxp, sxm) = (sigma([p[0] + h, p[1]]), sigma([p[0] - h, p[1]]));
            let (syp, sym) = (sigma([p[0], p[1] + h]), sigma([p[0], p[1] - h]));
            let fd = [
                -((sxp[0][0] - sxm[0][0]) + (syp[0][1] - sym[0][1])) / (2.0 * h),
                -((sxp[1][0] - sxm[1][0]) + (syp[1][1] - sym[1][1])) / (2.0 * h),
            ];
            let b = (data.b)(p);
            let scale = b[0].abs().max(b[1].abs());
            for c in 0..2 {
                assert!((b[c] - fd[c]).abs() <= 1e-5 * scale, "{b:?} vs {fd:?}");
            }
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let u = ExactVector::elasticity_benchmark();
        let h = 1e-6;
        let p = [0.37, 0.61];
        let g = u.gradient(p);
        for i in 0..2 {
            let v = &u.components[i].value;
            let fx = (v([p[0] + h, p[1]]) - v([p[0] - h, p[1]])) / (2.0 * h);
            let fy = (v([p[0], p[1] + h]) - v([p[0], p[1] - h])) / (2.0 * h);
            assert!((g[i][0] - fx).abs() < 1e-4 * (1.0 + fx.abs()));
            assert!((g[i][1] - fy).abs() < 1e-4 * (1.0 + fy.abs()));
        }
    }

    #[test]
    fn traction_is_stress_times_normal() {
        let mat = MaterialParams::new(10.0, 0.25).unwrap();
        // u = (x, 0): eps_xx = 1
        let u = ExactVector::polynomial(Poly2::from_terms(1, &[(1, 0, 1.0)]), Poly2::zero(1));
        let data = manufacture_elasticity(&u, &mat);
        let t = (data.t_n)([0.5, 0.5], [1.0, 0.0]);
        assert!((t[0] - (2.0 * mat.mu + mat.lambda)).abs() < 1e-12);
        assert_eq!(t[1], 0.0);
        let b = (data.b)([0.2, 0.2]);
        assert_eq!(b, [0.0, 0.0]);
    }
}
