//! True-domain description: signed distance, closest-point map onto the
//! boundary, distance vectors, and the Dirichlet/Neumann partition.

use std::fmt;
use std::sync::Arc;

use crate::error::{Result, SbmError};
use crate::scalar::{dot, from_f64, norm, sub, Real};

/// Boundary-condition kind of a boundary point or surrogate facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

/// Faces of an axis-aligned square, in tie-break priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    Left = 0,
    Right = 1,
    Bottom = 2,
    Top = 3,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::Left, Face::Right, Face::Bottom, Face::Top];

    pub fn normal<T: Real>(self) -> [T; 2] {
        let (o, z) = (T::one(), T::zero());
        match self {
            Face::Left => [-o, z],
            Face::Right => [o, z],
            Face::Bottom => [z, -o],
            Face::Top => [z, o],
        }
    }
}

/// Axis-aligned square with per-face boundary-condition tags.
#[derive(Debug, Clone, PartialEq)]
pub struct Square<T> {
    pub center: [T; 2],
    pub side: T,
    /// Indexed by [`Face`].
    pub face_bc: [BcKind; 4],
}

impl<T: Real> Square<T> {
    pub fn new(center: [T; 2], side: T) -> Result<Self> {
        if !(side > T::zero()) {
            return Err(SbmError::Argument(
                "square side length must be positive".into(),
            ));
        }
        Ok(Self {
            center,
            side,
            face_bc: [BcKind::Dirichlet; 4],
        })
    }

    pub fn with_face_bc(mut self, face: Face, bc: BcKind) -> Self {
        self.face_bc[face as usize] = bc;
        self
    }

    pub fn min(&self) -> [T; 2] {
        let h = self.side / (T::one() + T::one());
        [self.center[0] - h, self.center[1] - h]
    }

    pub fn max(&self) -> [T; 2] {
        let h = self.side / (T::one() + T::one());
        [self.center[0] + h, self.center[1] + h]
    }

    pub fn corners(&self) -> [[T; 2]; 4] {
        let (lo, hi) = (self.min(), self.max());
        [
            [lo[0], lo[1]],
            [hi[0], lo[1]],
            [hi[0], hi[1]],
            [lo[0], hi[1]],
        ]
    }

    fn signed_distance(&self, p: [T; 2]) -> T {
        let h = self.side / (T::one() + T::one());
        let q = [
            (p[0] - self.center[0]).abs() - h,
            (p[1] - self.center[1]).abs() - h,
        ];
        let outside = norm([q[0].max(T::zero()), q[1].max(T::zero())]);
        let inside = q[0].max(q[1]).min(T::zero());
        outside + inside
    }

    fn closest_point(&self, p: [T; 2]) -> Projection<T> {
        let (lo, hi) = (self.min(), self.max());
        let gaps = [p[0] - lo[0], hi[0] - p[0], p[1] - lo[1], hi[1] - p[1]];
        // strict comparison keeps the earliest face on ties
        let mut face = Face::Left;
        for f in Face::ALL {
            if gaps[f as usize] < gaps[face as usize] {
                face = f;
            }
        }
        let clamp = |v: T, a: T, b: T| v.max(a).min(b);
        let x = match face {
            Face::Left => [lo[0], clamp(p[1], lo[1], hi[1])],
            Face::Right => [hi[0], clamp(p[1], lo[1], hi[1])],
            Face::Bottom => [clamp(p[0], lo[0], hi[0]), lo[1]],
            Face::Top => [clamp(p[0], lo[0], hi[0]), hi[1]],
        };
        let tol = from_f64::<T>(1e-12) * self.side;
        let on_x = if (x[0] - lo[0]).abs() <= tol {
            Some(Face::Left)
        } else if (x[0] - hi[0]).abs() <= tol {
            Some(Face::Right)
        } else {
            None
        };
        let on_y = if (x[1] - lo[1]).abs() <= tol {
            Some(Face::Bottom)
        } else if (x[1] - hi[1]).abs() <= tol {
            Some(Face::Top)
        } else {
            None
        };
        match (on_x, on_y) {
            (Some(fx), Some(fy)) => {
                let (a, b) = (fx.normal::<T>(), fy.normal::<T>());
                let m = [a[0] + b[0], a[1] + b[1]];
                let l = norm(m);
                let corner = [
                    if fx == Face::Left { lo[0] } else { hi[0] },
                    if fy == Face::Bottom { lo[1] } else { hi[1] },
                ];
                Projection {
                    point: corner,
                    normal: [m[0] / l, m[1] / l],
                }
            }
            _ => Projection {
                point: x,
                normal: face.normal(),
            },
        }
    }

    fn bc_at(&self, x: [T; 2]) -> BcKind {
        let (lo, hi) = (self.min(), self.max());
        let tol = from_f64::<T>(1e-10) * self.side;
        let within = |v: T, a: T, b: T| v >= a - tol && v <= b + tol;
        let on_face = |f: Face| match f {
            Face::Left => (x[0] - lo[0]).abs() <= tol && within(x[1], lo[1], hi[1]),
            Face::Right => (x[0] - hi[0]).abs() <= tol && within(x[1], lo[1], hi[1]),
            Face::Bottom => (x[1] - lo[1]).abs() <= tol && within(x[0], lo[0], hi[0]),
            Face::Top => (x[1] - hi[1]).abs() <= tol && within(x[0], lo[0], hi[0]),
        };
        if Face::ALL
            .iter()
            .any(|&f| self.face_bc[f as usize] == BcKind::Dirichlet && on_face(f))
        {
            BcKind::Dirichlet
        } else {
            BcKind::Neumann
        }
    }
}

pub type SdfFn<T> = Arc<dyn Fn([T; 2]) -> T + Send + Sync>;
pub type BcFn<T> = Arc<dyn Fn([T; 2]) -> BcKind + Send + Sync>;

/// Convex domain described by a user-supplied signed-distance function.
#[derive(Clone)]
pub struct SdfDomain<T> {
    pub sdf: SdfFn<T>,
    /// Characteristic length used to scale tolerances.
    pub length_scale: T,
    pub bc: BcFn<T>,
}

impl<T: fmt::Debug> fmt::Debug for SdfDomain<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdfDomain")
            .field("length_scale", &self.length_scale)
            .finish()
    }
}

impl<T: Real> SdfDomain<T> {
    const MAX_ITERATIONS: usize = 50;

    fn gradient(&self, p: [T; 2]) -> [T; 2] {
        let h = T::epsilon().cbrt() * self.length_scale;
        let two = T::one() + T::one();
        let f = &self.sdf;
        [
            (f([p[0] + h, p[1]]) - f([p[0] - h, p[1]])) / (two * h),
            (f([p[0], p[1] + h]) - f([p[0], p[1] - h])) / (two * h),
        ]
    }

    /// Damped Newton-type projection onto the zero level set.
    fn closest_point(&self, p: [T; 2]) -> Result<Projection<T>> {
        let tol = from_f64::<T>(1e-12) * self.length_scale;
        let mut x = p;
        let mut d = (self.sdf)(x);
        for _ in 0..Self::MAX_ITERATIONS {
            if d.abs() <= tol {
                let g = self.gradient(x);
                let l = norm(g);
                return Ok(Projection {
                    point: x,
                    normal: [g[0] / l, g[1] / l],
                });
            }
            let g = self.gradient(x);
            let g2 = dot(g, g);
            if !(g2 > T::zero()) {
                break;
            }
            let mut step = T::one();
            let mut accepted = false;
            for _ in 0..20 {
                let trial = [x[0] - step * d * g[0] / g2, x[1] - step * d * g[1] / g2];
                let dt = (self.sdf)(trial);
                if dt.abs() < d.abs() {
                    x = trial;
                    d = dt;
                    accepted = true;
                    break;
                }
                step = step / (T::one() + T::one());
            }
            if !accepted {
                break;
            }
        }
        Err(SbmError::ProjectionFailed {
            iterations: Self::MAX_ITERATIONS,
        })
    }
}

/// Closest boundary point and the outward unit normal there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection<T> {
    pub point: [T; 2],
    pub normal: [T; 2],
}

/// The physical domain the surrogate approximates.
#[derive(Debug, Clone)]
pub enum TrueDomain<T> {
    Square(Square<T>),
    Sdf(SdfDomain<T>),
}

impl<T: Real> TrueDomain<T> {
    pub fn square(center: [T; 2], side: T) -> Result<Self> {
        Ok(Self::Square(Square::new(center, side)?))
    }

    /// Characteristic length `l` used for every relative tolerance.
    pub fn length_scale(&self) -> T {
        match self {
            Self::Square(s) => s.side,
            Self::Sdf(s) => s.length_scale,
        }
    }

    /// Negative inside, zero on the boundary, positive outside.
    pub fn signed_distance(&self, p: [T; 2]) -> T {
        match self {
            Self::Square(s) => s.signed_distance(p),
            Self::Sdf(s) => (s.sdf)(p),
        }
    }

    /// Whether `p` lies in the closed domain within `1e-12 l`.
    pub fn contains(&self, p: [T; 2]) -> bool {
        self.signed_distance(p) <= from_f64::<T>(1e-12) * self.length_scale()
    }

    /// Closest-point map onto the boundary. Points more than `1e-10 l`
    /// outside the closed domain are rejected.
    pub fn closest_point(&self, p: [T; 2]) -> Result<Projection<T>> {
        let d = self.signed_distance(p);
        if d > from_f64::<T>(1e-10) * self.length_scale() {
            return Err(SbmError::OutsideDomain {
                x: p[0].to_f64().unwrap_or(f64::NAN),
                y: p[1].to_f64().unwrap_or(f64::NAN),
                distance: d.to_f64().unwrap_or(f64::NAN),
            });
        }
        match self {
            Self::Square(s) => Ok(s.closest_point(p)),
            Self::Sdf(s) => s.closest_point(p),
        }
    }

    /// `closest_point(p) - p`.
    pub fn distance_vector(&self, p: [T; 2]) -> Result<[T; 2]> {
        Ok(sub(self.closest_point(p)?.point, p))
    }

    /// Boundary-condition kind of a point on the boundary. For the square,
    /// corners belong to both adjacent faces, so a corner next to a Dirichlet
    /// face is Dirichlet.
    pub fn bc_at(&self, x: [T; 2]) -> BcKind {
        match self {
            Self::Square(s) => s.bc_at(x),
            Self::Sdf(s) => (s.bc)(x),
        }
    }

    /// Tags a surrogate facet from the images of its sample points: Dirichlet
    /// only when every image lies on the Dirichlet boundary.
    pub fn classify_bc(&self, mapped_samples: &[[T; 2]]) -> Result<BcKind> {
        if mapped_samples.is_empty() {
            return Err(SbmError::Argument(
                "facet classification needs sample points".into(),
            ));
        }
        if mapped_samples
            .iter()
            .all(|&x| self.bc_at(x) == BcKind::Dirichlet)
        {
            Ok(BcKind::Dirichlet)
        } else {
            Ok(BcKind::Neumann)
        }
    }
}

/// Geometric data at one surrogate-boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample<T> {
    pub x_tilde: [T; 2],
    pub x_true: [T; 2],
    pub delta: [T; 2],
    /// `delta / |delta|`, or the surrogate normal when `delta` vanishes.
    pub nu: [T; 2],
    pub n_true: [T; 2],
    pub n_surr: [T; 2],
    pub bc: BcKind,
}

impl<T: Real> BoundarySample<T> {
    pub fn new(
        domain: &TrueDomain<T>,
        x_tilde: [T; 2],
        n_surr: [T; 2],
        bc: BcKind,
    ) -> Result<Self> {
        let proj = domain.closest_point(x_tilde)?;
        let delta = sub(proj.point, x_tilde);
        let len = norm(delta);
        let nu = if len < from_f64::<T>(1e-14) * domain.length_scale() {
            n_surr
        } else {
            [delta[0] / len, delta[1] / len]
        };
        Ok(Self {
            x_tilde,
            x_true: proj.point,
            delta,
            nu,
            n_true: proj.normal,
            n_surr,
            bc,
        })
    }

    pub fn delta_norm(&self) -> T {
        norm(self.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn benchmark_square() -> TrueDomain<f64> {
        TrueDomain::square([0.5, 0.5], 0.43).unwrap()
    }

    #[test]
    fn projection_to_nearest_face() {
        let d = benchmark_square();
        let p = d.closest_point([0.3, 0.5]).unwrap();
        assert_relative_eq!(p.point[0], 0.285, epsilon = 1e-15);
        assert_eq!(p.point[1], 0.5);
        assert_eq!(p.normal, [-1.0, 0.0]);
        let delta = d.distance_vector([0.3, 0.5]).unwrap();
        assert_relative_eq!(delta[0], -0.015, epsilon = 1e-15);
        assert_eq!(delta[1], 0.0);
    }

    #[test]
    fn ties_follow_face_priority() {
        let d = benchmark_square();
        let c = d.closest_point([0.5, 0.5]).unwrap();
        assert_relative_eq!(c.point[0], 0.285, epsilon = 1e-15);
        assert_eq!(c.point[1], 0.5);
        // equidistant from right and top: right wins
        let delta = d.distance_vector([0.7, 0.7]).unwrap();
        assert_relative_eq!(delta[0], 0.015, epsilon = 1e-14);
        assert_eq!(delta[1], 0.0);
    }

    #[test]
    fn boundary_points_map_to_themselves() {
        let d = benchmark_square();
        assert!(norm(d.distance_vector([0.285, 0.4]).unwrap()) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sq = match &d {
            TrueDomain::Square(s) => s.clone(),
            _ => unreachable!(),
        };
        for _ in 0..200 {
            let t: f64 = rng.gen();
            let f = rng.gen_range(0..4);
            let (lo, hi) = (sq.min(), sq.max());
            let x = match f {
                0 => [lo[0], lo[1] + t * 0.43],
                1 => [hi[0], lo[1] + t * 0.43],
                2 => [lo[0] + t * 0.43, lo[1]],
                _ => [lo[0] + t * 0.43, hi[1]],
            };
            let p = d.closest_point(x).unwrap();
            assert!(norm(sub(p.point, x)) <= 1e-12 * 0.43);
        }
    }

    #[test]
    fn corners_get_averaged_normals() {
        let d = benchmark_square();
        let p = d.closest_point([0.285, 0.285]).unwrap();
        assert!(norm(sub(p.point, [0.285, 0.285])) < 1e-15);
        let s = 0.5f64.sqrt();
        assert_relative_eq!(p.normal[0], -s, epsilon = 1e-15);
        assert_relative_eq!(p.normal[1], -s, epsilon = 1e-15);
        // slightly outside, diagonal from the corner
        let q = d.closest_point([0.715 + 1e-12, 0.715 + 1e-12]).unwrap();
        assert!(norm(sub(q.point, [0.715, 0.715])) < 1e-15);
        assert_relative_eq!(q.normal[0], s, epsilon = 1e-15);
    }

    #[test]
    fn points_outside_are_rejected() {
        let d = benchmark_square();
        assert!(matches!(
            d.closest_point([0.9, 0.5]),
            Err(SbmError::OutsideDomain { .. })
        ));
        assert!(d.closest_point([0.715 + 1e-12, 0.5]).is_ok());
    }

    #[test]
    fn away_from_diagonals_nu_equals_normal() {
        let d = benchmark_square();
        let s = BoundarySample::new(&d, [0.6, 0.3], [0.0, -1.0], BcKind::Dirichlet).unwrap();
        assert_eq!(s.nu, s.n_true);
        assert_eq!(s.delta, [s.x_true[0] - 0.6, s.x_true[1] - 0.3]);
        let on = BoundarySample::new(&d, [0.4, 0.285], [0.0, -1.0], BcKind::Dirichlet).unwrap();
        assert!(on.delta_norm() < 1e-15);
        assert_eq!(on.nu, on.n_surr);
    }

    #[test]
    fn facet_classification() {
        let all_d = benchmark_square();
        assert_eq!(
            all_d.classify_bc(&[[0.285, 0.3], [0.285, 0.4]]).unwrap(),
            BcKind::Dirichlet
        );
        let mixed = match benchmark_square() {
            TrueDomain::Square(s) => TrueDomain::Square(s.with_face_bc(Face::Top, BcKind::Neumann)),
            _ => unreachable!(),
        };
        assert_eq!(
            mixed
                .classify_bc(&[[0.4, 0.715], [0.5, 0.715], [0.6, 0.715]])
                .unwrap(),
            BcKind::Neumann
        );
        // samples on the left (Dirichlet) and top (Neumann) faces
        let samples = [[0.285, 0.70], [0.285, 0.715], [0.30, 0.715]];
        let memberships: Vec<BcKind> = samples.iter().map(|&x| mixed.bc_at(x)).collect();
        assert_eq!(
            memberships,
            vec![BcKind::Dirichlet, BcKind::Dirichlet, BcKind::Neumann]
        );
        assert_eq!(mixed.classify_bc(&samples).unwrap(), BcKind::Neumann);
        assert!(mixed.classify_bc(&[]).is_err());
    }

    #[test]
    fn disk_by_signed_distance() {
        let disk = TrueDomain::Sdf(SdfDomain {
            sdf: Arc::new(|p: [f64; 2]| p[0].hypot(p[1]) - 1.0),
            length_scale: 1.0,
            bc: Arc::new(|_| BcKind::Dirichlet),
        });
        let p = disk.closest_point([0.3, 0.0]).unwrap();
        assert_relative_eq!(p.point[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.point[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.normal[0], 1.0, epsilon = 1e-8);
        let q = disk.closest_point([0.2, -0.5]).unwrap();
        let r = 0.2f64.hypot(0.5);
        assert_relative_eq!(q.point[0], 0.2 / r, epsilon = 1e-10);
        assert_relative_eq!(q.point[1], -0.5 / r, epsilon = 1e-10);
        assert!(disk.closest_point([2.0, 0.0]).is_err());
    }
}
