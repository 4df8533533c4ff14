//! Property suites run by the `selftest` command and the acceptance tests.
//! Each check returns a [`CheckOutcome`] instead of panicking.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble_elasticity, assemble_poisson, operator_degree, DofMap};
use crate::basis::MAX_ORDER;
use crate::error::Result;
use crate::geometry::{BcKind, Face, Square};
use crate::harness::{benchmark_domain, benchmark_material, error_norms, Exact, Problem};
use crate::manufactured::{
    manufacture_elasticity, manufacture_poisson, ExactScalar, ExactVector, PoissonData,
};
use crate::mesh::{extract_surrogate, generate_grid, Rect};
use crate::quadrature::{segment_rule, triangle_rule};
use crate::shift::{shift_gradient, shift_value};
use crate::solve::solve;
use crate::sparse::CsrMatrix;
use crate::{ElementMap, Poly2, ReferenceBasis, SurrogateMesh, TrueDomain};

pub const PATCH_ROTATIONS: [f64; 4] = [0.0, 13.5, 31.5, 45.0];
const PATCH_LEVEL: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{verdict} {} ({:.2?}): {}",
            self.name, self.elapsed, self.detail
        )
    }
}

fn timed(name: &'static str, check: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckOutcome {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        taylor_exactness(),
        patch_tests(),
        galerkin_consistency(),
        geometry_oracle(),
        body_fitted_reduction(),
        mesh_consistency(),
    ]
}

fn random_poly(rng: &mut ChaCha8Rng, degree: usize) -> Poly2 {
    let n = crate::poly::monomial_count(degree);
    Poly2::from_coeffs(degree, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Shifting a degree-k polynomial with order k reproduces its value (and its
/// gradient with order k-1) at the shifted point.
pub fn taylor_exactness() -> CheckOutcome {
    timed("taylor-shift exactness", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5b1f);
        let mut worst: f64 = 0.0;
        for k in 1..=MAX_ORDER {
            for _ in 0..200 {
                let p = random_poly(&mut rng, k);
                let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                let r = rng.gen_range(0.0..0.2);
                let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let d = [r * a.cos(), r * a.sin()];
                let y = [x[0] + d[0], x[1] + d[1]];
                let table = p.derivative_table(&x, k);
                let scale = p.coeffs().iter().fold(1.0f64, |m, c| m.max(c.abs()));
                worst = worst.max((shift_value(&table, &d, k)? - p.eval(&y)).abs() / scale);
                let g = shift_gradient(&table, &d, k - 1)?;
                worst = worst.max((g[0] - p.derivative(1, 0).eval(&y)).abs() / scale);
                worst = worst.max((g[1] - p.derivative(0, 1).eval(&y)).abs() / scale);
            }
        }
        Ok((
            worst <= 1e-10,
            format!("1000 polynomials, worst relative deviation {worst:.2e} (limit 1e-10)"),
        ))
    })
}

fn surrogate(domain: &TrueDomain, n: usize, rotation: f64) -> Result<SurrogateMesh> {
    let mesh = generate_grid(Rect::unit(), n, rotation, [0.5, 0.5])?;
    extract_surrogate(Arc::new(mesh), domain)
}

/// Complete polynomial of degree `k` with O(1) coefficients.
fn patch_poly(k: usize, shift: f64) -> Poly2 {
    let terms: Vec<(usize, usize, f64)> = (0..=k)
        .flat_map(|a| {
            (0..=k - a).map(move |b| (a, b, 0.5 + shift + 0.25 * a as f64 - 0.2 * b as f64))
        })
        .collect();
    Poly2::from_terms(k, &terms)
}

fn patch_exact(problem: Problem, k: usize) -> Exact {
    match problem {
        Problem::Poisson => Exact::Scalar(ExactScalar::polynomial(patch_poly(k, 0.0))),
        // millimetre-scale displacements keep the traction data O(10^7)
        Problem::Elasticity => Exact::Vector(ExactVector::polynomial(
            patch_poly(k, 0.1).scale(1e-3),
            patch_poly(k, -0.3).scale(-1e-3),
        )),
    }
}

fn patch_system(
    problem: Problem,
    k: usize,
    s: &SurrogateMesh,
    basis: &ReferenceBasis,
) -> Result<(crate::assembly::LinearSystem, Exact)> {
    let domain = benchmark_domain(problem);
    let exact = patch_exact(problem, k);
    let sys = match &exact {
        Exact::Scalar(u) => assemble_poisson(s, basis, &domain, &manufacture_poisson(u))?,
        Exact::Vector(u) => {
            let mat = benchmark_material();
            assemble_elasticity(s, basis, &domain, &mat, &manufacture_elasticity(u, &mat))?
        }
    };
    Ok((sys, exact))
}

fn l2_norm(exact: &Exact, s: &SurrogateMesh, basis: &ReferenceBasis, dofs: &DofMap) -> Result<f64> {
    error_norms(&vec![0.0; dofs.len()], exact, s, basis, dofs).map(|e| e.0)
}

/// Relative L2 error of one patch-test solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchCase {
    pub problem: Problem,
    pub order: usize,
    pub rotation: f64,
    pub relative_l2: f64,
}

/// Solves every patch problem: all orders, both problems, [`PATCH_ROTATIONS`].
pub fn patch_cases() -> Result<Vec<PatchCase>> {
    let mut out = Vec::new();
    for problem in [Problem::Poisson, Problem::Elasticity] {
        let domain = benchmark_domain(problem);
        for rotation in PATCH_ROTATIONS {
            let s = surrogate(&domain, PATCH_LEVEL, rotation)?;
            for order in 1..=MAX_ORDER {
                let basis = ReferenceBasis::new(order)?;
                let (sys, exact) = patch_system(problem, order, &s, &basis)?;
                let x = solve(&sys)?;
                let (l2, _) = error_norms(&x, &exact, &s, &basis, &sys.dofs)?;
                let relative_l2 = l2 / l2_norm(&exact, &s, &basis, &sys.dofs)?;
                out.push(PatchCase {
                    problem,
                    order,
                    rotation,
                    relative_l2,
                });
            }
        }
    }
    Ok(out)
}

/// Degree-k manufactured polynomials are reproduced by the discrete
/// solution, for every order, both problems and several rotations.
pub fn patch_tests() -> CheckOutcome {
    timed("patch tests", || {
        let cases = patch_cases()?;
        let failing: Vec<String> = cases
            .iter()
            .filter(|c| c.relative_l2 > 1e-9)
            .map(|c| {
                format!(
                    "{} k={} rotation={} ({:.2e})",
                    c.problem, c.order, c.rotation, c.relative_l2
                )
            })
            .collect();
        let worst = cases.iter().map(|c| c.relative_l2).fold(0.0, f64::max);
        let mut detail = format!(
            "{} cases, worst relative L2 error {worst:.2e} (limit 1e-9)",
            cases.len()
        );
        if !failing.is_empty() {
            detail.push_str(&format!("; over the limit: {}", failing.join(", ")));
        }
        Ok((failing.is_empty(), detail))
    })
}

/// The interpolated exact polynomial satisfies the discrete equations.
pub fn galerkin_consistency() -> CheckOutcome {
    timed("galerkin consistency", || {
        let mut worst: f64 = 0.0;
        for problem in [Problem::Poisson, Problem::Elasticity] {
            let domain = benchmark_domain(problem);
            for rotation in PATCH_ROTATIONS {
                let s = surrogate(&domain, PATCH_LEVEL, rotation)?;
                for k in 1..=MAX_ORDER {
                    let basis = ReferenceBasis::new(k)?;
                    let (sys, exact) = patch_system(problem, k, &s, &basis)?;
                    let u = match &exact {
                        Exact::Scalar(u) => sys.dofs.interpolate_scalar(|p| (u.value)(p)),
                        Exact::Vector(u) => sys.dofs.interpolate_vector(|p| u.value(p)),
                    };
                    let au = sys.matrix.matvec(&u);
                    let res = au
                        .iter()
                        .zip(&sys.rhs)
                        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                    let scale = sys.rhs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
                    worst = worst.max(res / scale);
                }
            }
        }
        Ok((
            worst <= 1e-9,
            format!("worst relative residual {worst:.2e} (limit 1e-9)"),
        ))
    })
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / (d[0] * d[0] + d[1] * d[1]))
        .clamp(0.0, 1.0);
    (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
}

/// Distance-vector magnitudes against brute-force distance to a densely
/// sampled boundary polyline, for the benchmark square and a disk.
pub fn geometry_oracle() -> CheckOutcome {
    timed("geometry oracle", || {
        const POLYLINE: usize = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(0x6e0);
        let sq = Square::new([0.5, 0.5], 0.43)?;
        let corners = sq.corners();
        let mut square_line: Vec<[f64; 2]> = Vec::with_capacity(POLYLINE + 1);
        for c in 0..4 {
            let (a, b) = (corners[c], corners[(c + 1) % 4]);
            for i in 0..POLYLINE / 4 {
                let t = i as f64 / (POLYLINE / 4) as f64;
                square_line.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        square_line.push(corners[0]);
        let (cx, cy, r) = (0.5, 0.5, 0.3);
        let disk_line: Vec<[f64; 2]> = (0..=POLYLINE)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / POLYLINE as f64;
                [cx + r * a.cos(), cy + r * a.sin()]
            })
            .collect();
        let disk = TrueDomain::Sdf(crate::geometry::SdfDomain {
            sdf: Arc::new(move |p: [f64; 2]| (p[0] - cx).hypot(p[1] - cy) - r),
            length_scale: 2.0 * r,
            bc: Arc::new(|_| BcKind::Dirichlet),
        });
        let mut worst: f64 = 0.0;
        for (domain, line, l) in [
            (TrueDomain::Square(sq.clone()), &square_line, 0.43),
            (disk, &disk_line, 0.6),
        ] {
            for _ in 0..1000 {
                let p = loop {
                    let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                    if domain.contains(p) {
                        break p;
                    }
                };
                let brute = line
                    .windows(2)
                    .map(|w| point_segment_distance(p, w[0], w[1]))
                    .fold(f64::INFINITY, f64::min);
                let d = domain.distance_vector(p)?;
                worst = worst.max((d[0].hypot(d[1]) - brute).abs() / l);
            }
        }
        Ok((
            worst <= 1e-6,
            format!("2000 points, worst |delta| deviation {worst:.2e} l (limit 1e-6 l)"),
        ))
    })
}

/// Classical body-fitted asymmetric Nitsche matrix, built directly from the
/// basis and the square's faces without the shift machinery.
fn classical_nitsche(
    s: &SurrogateMesh,
    basis: &ReferenceBasis,
    dofs: &DofMap,
    sq: &Square<f64>,
) -> Result<CsrMatrix> {
    let k = basis.order();
    let (lo, hi) = (sq.min(), sq.max());
    let on_face = |p: [f64; 2], face: Face| -> bool {
        let tol = 1e-12;
        match face {
            Face::Left => (p[0] - lo[0]).abs() < tol,
            Face::Right => (p[0] - hi[0]).abs() < tol,
            Face::Bottom => (p[1] - lo[1]).abs() < tol,
            Face::Top => (p[1] - hi[1]).abs() < tol,
        }
    };
    let tri = triangle_rule::<f64>(operator_degree(k));
    let seg = segment_rule::<f64>(2 * k);
    let mut triplets = Vec::new();
    for (pos, &t) in s.active.iter().enumerate() {
        let verts = s.parent.triangle_vertices(t);
        let map = ElementMap::new(verts)?;
        let cell = dofs.cell(pos);
        for (p, w) in tri.points.iter().zip(&tri.weights) {
            let g: Vec<[f64; 2]> = basis
                .eval_derivatives(p, 1)?
                .iter()
                .map(|t| map.gradient(t.gradient()))
                .collect();
            for (i, gi) in g.iter().enumerate() {
                for (j, gj) in g.iter().enumerate() {
                    triplets.push((
                        cell[i],
                        cell[j],
                        w * map.det() * (gi[0] * gj[0] + gi[1] * gj[1]),
                    ));
                }
            }
        }
        for e in 0..3 {
            let (a, b) = (verts[e], verts[(e + 1) % 3]);
            let Some(face) = Face::ALL
                .into_iter()
                .find(|&f| on_face(a, f) && on_face(b, f))
            else {
                continue;
            };
            let n: [f64; 2] = face.normal();
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            for (p, w) in seg.points.iter().zip(&seg.weights) {
                let x = [a[0] + p[0] * (b[0] - a[0]), a[1] + p[0] * (b[1] - a[1])];
                let tables = basis.eval_derivatives(&map.inverse_map(x), 1)?;
                let phi: Vec<f64> = tables.iter().map(|t| *t.value()).collect();
                let dn: Vec<f64> = tables
                    .iter()
                    .map(|t| {
                        let g = map.gradient(t.gradient());
                        g[0] * n[0] + g[1] * n[1]
                    })
                    .collect();
                for i in 0..phi.len() {
                    for j in 0..phi.len() {
                        triplets.push((
                            cell[i],
                            cell[j],
                            w * len * (phi[j] * dn[i] - dn[j] * phi[i]),
                        ));
                    }
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(dofs.len(), triplets))
}

/// With the true boundary on grid lines the distance vector vanishes and the
/// assembled matrix is the classical one.
pub fn body_fitted_reduction() -> CheckOutcome {
    timed("body-fitted reduction", || {
        let sq = Square::new([0.5, 0.5], 0.5)?;
        let domain = TrueDomain::Square(sq.clone());
        let s = surrogate(&domain, 8, 0.0)?;
        let data = PoissonData {
            f: Arc::new(|_| 0.0),
            u_d: Arc::new(|_| 0.0),
        };
        let mut worst: f64 = 0.0;
        for k in 1..=MAX_ORDER {
            let basis = ReferenceBasis::new(k)?;
            let sys = assemble_poisson(&s, &basis, &domain, &data)?;
            let classic = classical_nitsche(&s, &basis, &sys.dofs, &sq)?;
            let scale = classic.max_abs();
            let (a, c) = (sys.matrix.to_dense(), classic.to_dense());
            for (ra, rc) in a.iter().zip(&c) {
                for (x, y) in ra.iter().zip(rc) {
                    worst = worst.max((x - y).abs() / scale);
                }
            }
        }
        Ok((
            worst <= 1e-13,
            format!("k=1..5, worst entrywise deviation {worst:.2e} of max |A| (limit 1e-13)"),
        ))
    })
}

/// Divergence-theorem area and closed boundary loops over the default
/// rotation sweep and four levels.
pub fn mesh_consistency() -> CheckOutcome {
    timed("mesh consistency", || {
        let domain = benchmark_domain(Problem::Elasticity);
        let mut worst: f64 = 0.0;
        let mut open = 0;
        let mut count = 0;
        for rotation in crate::harness::default_rotations() {
            for n in [8, 16, 32, 64] {
                let s = surrogate(&domain, n, rotation)?;
                worst = worst.max((s.boundary_area() - s.area()).abs() / s.area());
                open += usize::from(!s.boundary_is_closed());
                count += 1;
            }
        }
        Ok((
            worst <= 1e-12 && open == 0,
            format!("{count} surrogates, worst area mismatch {worst:.2e} (limit 1e-12), {open} open boundaries"),
        ))
    })
}
