//! Degree-of-freedom numbering and assembly of the penalty-free shifted
//! boundary systems.
//!
//! Poisson, pure Dirichlet:
//!
//! ```text
//! a(u, w) = (grad u, grad w) - <grad u . n~, w> + <S^k u, grad w . n~>
//! l(w)    = (f, w) + <u_D o M, grad w . n~>
//! ```
//!
//! Elasticity adds `-<sigma(u) n~, w>` on the whole surrogate boundary, the
//! shifted Dirichlet term `<S^k u, sigma(w) n~>` on Dirichlet facets and the
//! shifted Neumann term `<w, (n . n~) sigma(S^(k-1) grad u) n>` on Neumann
//! facets. Every boundary integral uses the owning element's basis, extended
//! as a polynomial to the shifted points.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Result, SbmError};
use crate::geometry::BcKind;
use crate::manufactured::{mat_vec, stress, ElasticityData, PoissonData};
use crate::quadrature::{segment_rule, triangle_rule};
use crate::scalar::dot;
use crate::shift::ShiftStencil;
use crate::sparse::CsrMatrix;
use crate::{BoundarySample, ElementMap, ReferenceBasis, SurrogateMesh, TriangleRule, TrueDomain};

/// Global numbering of the continuous order-`k` Lagrange space on the active
/// mesh. Scalar DOFs come vertices first, then edge interiors, then cell
/// interiors; vector problems interleave components (`2 s + c`).
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    order: usize,
    components: usize,
    n_scalar: usize,
    n_vertices: usize,
    n_edges: usize,
    cell_dofs: Vec<Vec<usize>>,
    coords: Vec<[f64; 2]>,
}

impl DofMap {
    pub fn new(s: &SurrogateMesh, basis: &ReferenceBasis, components: usize) -> Result<Self> {
        if !(1..=2).contains(&components) {
            return Err(SbmError::Argument("components must be 1 or 2".into()));
        }
        let k = basis.order();
        let mesh = &s.parent;
        let mut vertex_id: BTreeMap<usize, usize> = BTreeMap::new();
        let mut edge_id: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for &t in &s.active {
            let tri = mesh.triangles[t];
            for e in 0..3 {
                vertex_id.insert(tri[e], 0);
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                edge_id.insert((a.min(b), a.max(b)), 0);
            }
        }
        for (i, v) in vertex_id.values_mut().enumerate() {
            *v = i;
        }
        for (i, v) in edge_id.values_mut().enumerate() {
            *v = i;
        }
        let (nv, ne, nc) = (vertex_id.len(), edge_id.len(), s.active.len());
        let per_edge = k - 1;
        let per_cell = basis.interior_nodes().len();
        let n_scalar = nv + per_edge * ne + per_cell * nc;
        let edge_base = nv;
        let cell_base = nv + per_edge * ne;
        let mut coords = vec![[f64::NAN; 2]; n_scalar];
        let mut cell_dofs = Vec::with_capacity(nc);
        for (pos, &t) in s.active.iter().enumerate() {
            let tri = mesh.triangles[t];
            let mut dofs = vec![0usize; basis.len()];
            for (local, v) in tri.iter().enumerate() {
                dofs[local] = vertex_id[v];
            }
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let base = edge_base + per_edge * edge_id[&(a.min(b), a.max(b))];
                // global edge nodes run from the lower to the higher vertex id
                for (j, local) in basis.edge_nodes(e).enumerate() {
                    dofs[local] = if a < b {
                        base + j
                    } else {
                        base + per_edge - 1 - j
                    };
                }
            }
            for (j, local) in basis.interior_nodes().enumerate() {
                dofs[local] = cell_base + per_cell * pos + j;
            }
            let map = ElementMap::new(mesh.triangle_vertices(t))?;
            for (local, &g) in dofs.iter().enumerate() {
                if coords[g][0].is_nan() {
                    coords[g] = map.map(basis.nodes()[local]);
                }
            }
            cell_dofs.push(dofs);
        }
        Ok(Self {
            order: k,
            components,
            n_scalar,
            n_vertices: nv,
            n_edges: ne,
            cell_dofs,
            coords,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Total number of unknowns.
    pub fn len(&self) -> usize {
        self.n_scalar * self.components
    }

    pub fn is_empty(&self) -> bool {
        self.n_scalar == 0
    }

    pub fn scalar_len(&self) -> usize {
        self.n_scalar
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// Scalar DOFs of the `pos`-th active element, in reference-node order.
    pub fn cell(&self, pos: usize) -> &[usize] {
        &self.cell_dofs[pos]
    }

    /// Physical location of every scalar DOF.
    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn global(&self, scalar: usize, component: usize) -> usize {
        scalar * self.components + component
    }

    /// Nodal interpolant of a scalar field.
    pub fn interpolate_scalar(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.coords.iter().map(|&p| f(p)).collect()
    }

    /// Nodal interpolant of a vector field, interleaved.
    pub fn interpolate_vector(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        self.coords.iter().flat_map(|&p| f(p)).collect()
    }
}

/// Assembled operator and load vector.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
}

/// Isotropic material: Young's modulus, Poisson ratio and the derived Lame
/// parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub young: f64,
    pub poisson: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl MaterialParams {
    pub fn new(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0) {
            return Err(SbmError::Argument(
                "Young's modulus must be positive".into(),
            ));
        }
        if !(0.0..0.5).contains(&poisson) {
            return Err(SbmError::Argument(
                "Poisson ratio must lie in [0, 0.5); the incompressible limit is not supported"
                    .into(),
            ));
        }
        let mu = young / (2.0 * (1.0 + poisson));
        let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
        Ok(Self {
            young,
            poisson,
            lambda,
            mu,
        })
    }
}

/// Switches for partial assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssemblyOptions {
    /// Include the surrogate-boundary terms. Off gives the bare volume operator.
    pub boundary_terms: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            boundary_terms: true,
        }
    }
}

/// Basis values and reference gradients at the points of a triangle rule.
struct Tabulation {
    rule: TriangleRule,
    values: Vec<Vec<f64>>,
    grads: Vec<Vec<[f64; 2]>>,
}

impl Tabulation {
    fn new(basis: &ReferenceBasis, rule: TriangleRule) -> Result<Self> {
        let mut values = Vec::with_capacity(rule.len());
        let mut grads = Vec::with_capacity(rule.len());
        for p in &rule.points {
            let tables = basis.eval_derivatives(p, 1)?;
            values.push(tables.iter().map(|t| *t.value()).collect());
            grads.push(tables.iter().map(|t| t.gradient()).collect());
        }
        Ok(Self {
            rule,
            values,
            grads,
        })
    }
}

/// Quadrature degree for polynomial integrands (stiffness, boundary operator).
pub fn operator_degree(k: usize) -> usize {
    2 * k + 3
}

/// Quadrature degree for integrals against non-polynomial data.
pub fn data_degree(k: usize) -> usize {
    2 * k + 6
}

/// Dense local block and its DOFs; `matrix[i * n + j]` couples test `i` with
/// trial `j`.
struct Local {
    dofs: Vec<usize>,
    matrix: Vec<f64>,
    rhs: Vec<f64>,
}

impl Local {
    fn zeros(dofs: Vec<usize>) -> Self {
        let n = dofs.len();
        Self {
            dofs,
            matrix: vec![0.0; n * n],
            rhs: vec![0.0; n],
        }
    }
}

fn finish(n: usize, locals: Vec<Local>, dofs: DofMap) -> LinearSystem {
    let mut triplets = Vec::with_capacity(locals.iter().map(|l| l.matrix.len()).sum());
    let mut rhs = vec![0.0; n];
    for l in &locals {
        let m = l.dofs.len();
        for (i, &gi) in l.dofs.iter().enumerate() {
            rhs[gi] += l.rhs[i];
            for (j, &gj) in l.dofs.iter().enumerate() {
                triplets.push((gi, gj, l.matrix[i * m + j]));
            }
        }
    }
    LinearSystem {
        matrix: CsrMatrix::from_triplets(n, triplets),
        rhs,
        dofs,
    }
}

/// Physical derivative tables of all basis functions at the physical point `x`.
fn physical_tables(
    basis: &ReferenceBasis,
    map: &ElementMap,
    x: [f64; 2],
) -> Result<Vec<crate::DerivTable>> {
    let xi = map.inverse_map(x);
    Ok(basis
        .eval_derivatives(&xi, basis.order())?
        .iter()
        .map(|t| map.physical_derivatives(t))
        .collect())
}

pub fn assemble_poisson(
    s: &SurrogateMesh,
    basis: &ReferenceBasis,
    domain: &TrueDomain,
    data: &PoissonData,
) -> Result<LinearSystem> {
    assemble_poisson_with(s, basis, domain, data, AssemblyOptions::default())
}

pub fn assemble_poisson_with(
    s: &SurrogateMesh,
    basis: &ReferenceBasis,
    domain: &TrueDomain,
    data: &PoissonData,
    options: AssemblyOptions,
) -> Result<LinearSystem> {
    if let Some(f) = s.boundary_facets.iter().find(|f| f.bc == BcKind::Neumann) {
        return Err(SbmError::Unsupported(format!(
            "Poisson requires pure Dirichlet (facet on triangle {} is Neumann)",
            f.triangle
        )));
    }
    let k = basis.order();
    let dofs = DofMap::new(s, basis, 1)?;
    let stiff = Tabulation::new(basis, triangle_rule(operator_degree(k)))?;
    let load = Tabulation::new(basis, triangle_rule(data_degree(k)))?;
    let nb = basis.len();

    let mut locals: Vec<Local> = s
        .active
        .par_iter()
        .enumerate()
        .map(|(pos, &t)| -> Result<Local> {
            let map = ElementMap::new(s.parent.triangle_vertices(t))?;
            let mut local = Local::zeros(dofs.cell(pos).to_vec());
            for (q, w) in stiff.rule.weights.iter().enumerate() {
                let w = w * map.det();
                let g: Vec<[f64; 2]> = stiff.grads[q].iter().map(|&r| map.gradient(r)).collect();
                for i in 0..nb {
                    for j in 0..nb {
                        local.matrix[i * nb + j] += w * dot(g[i], g[j]);
                    }
                }
            }
            for (q, (p, w)) in load.rule.points.iter().zip(&load.rule.weights).enumerate() {
                let fx = (data.f)(map.map(*p)) * w * map.det();
                for i in 0..nb {
                    local.rhs[i] += fx * load.values[q][i];
                }
            }
            Ok(local)
        })
        .collect::<Result<_>>()?;

    if options.boundary_terms {
        let seg = segment_rule::<f64>(data_degree(k));
        let boundary: Vec<Local> = s
            .boundary_facets
            .par_iter()
            .map(|f| -> Result<Local> {
                let pos = s
                    .active_position(f.triangle)
                    .expect("facet owner is active");
                let map = ElementMap::new(s.parent.triangle_vertices(f.triangle))?;
                let mut local = Local::zeros(dofs.cell(pos).to_vec());
                for (p, w) in seg.points.iter().zip(&seg.weights) {
                    let w = w * f.length;
                    let x = f.point(p[0]);
                    let tables = physical_tables(basis, &map, x)?;
                    let sample = BoundarySample::new(domain, x, f.normal, f.bc)?;
                    let shifted = ShiftStencil::build(&tables, &sample.delta, k, None)?;
                    let dn: Vec<f64> = tables.iter().map(|t| dot(t.gradient(), f.normal)).collect();
                    let ud = (data.u_d)(sample.x_true);
                    for i in 0..nb {
                        let phi_i = *tables[i].value();
                        for j in 0..nb {
                            local.matrix[i * nb + j] +=
                                w * (-dn[j] * phi_i + shifted.values[j] * dn[i]);
                        }
                        local.rhs[i] += w * ud * dn[i];
                    }
                }
                Ok(local)
            })
            .collect::<Result<_>>()?;
        locals.extend(boundary);
    }
    Ok(finish(dofs.len(), locals, dofs))
}

/// Displacement gradient of basis function `phi` (physical gradient `g`)
/// placed in component `c`.
fn unit_gradient(g: [f64; 2], c: usize) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    out[c] = g;
    out
}

pub fn assemble_elasticity(
    s: &SurrogateMesh,
    basis: &ReferenceBasis,
    domain: &TrueDomain,
    mat: &MaterialParams,
    data: &ElasticityData,
) -> Result<LinearSystem> {
    assemble_elasticity_with(s, basis, domain, mat, data, AssemblyOptions::default())
}

pub fn assemble_elasticity_with(
    s: &SurrogateMesh,
    basis: &ReferenceBasis,
    domain: &TrueDomain,
    mat: &MaterialParams,
    data: &ElasticityData,
    options: AssemblyOptions,
) -> Result<LinearSystem> {
    let mat = MaterialParams::new(mat.young, mat.poisson)?;
    let k = basis.order();
    let dofs = DofMap::new(s, basis, 2)?;
    let stiff = Tabulation::new(basis, triangle_rule(operator_degree(k)))?;
    let load = Tabulation::new(basis, triangle_rule(data_degree(k)))?;
    let nb = basis.len();
    let nl = 2 * nb;
    let element_dofs = |pos: usize| -> Vec<usize> {
        dofs.cell(pos)
            .iter()
            .flat_map(|&g| [dofs.global(g, 0), dofs.global(g, 1)])
            .collect()
    };

    let mut locals: Vec<Local> = s
        .active
        .par_iter()
        .enumerate()
        .map(|(pos, &t)| -> Result<Local> {
            let map = ElementMap::new(s.parent.triangle_vertices(t))?;
            let mut local = Local::zeros(element_dofs(pos));
            for (q, w) in stiff.rule.weights.iter().enumerate() {
                let w = w * map.det();
                let g: Vec<[f64; 2]> = stiff.grads[q].iter().map(|&r| map.gradient(r)).collect();
                for a in 0..nb {
                    for c in 0..2 {
                        let sig = stress(unit_gradient(g[a], c), &mat);
                        // sigma(u) : grad(w) for w = phi_b e_d
                        for b in 0..nb {
                            for d in 0..2 {
                                let v = sig[d][0] * g[b][0] + sig[d][1] * g[b][1];
                                local.matrix[(2 * b + d) * nl + 2 * a + c] += w * v;
                            }
                        }
                    }
                }
            }
            for (q, (p, w)) in load.rule.points.iter().zip(&load.rule.weights).enumerate() {
                let bx = (data.b)(map.map(*p));
                let w = w * map.det();
                for b in 0..nb {
                    for d in 0..2 {
                        local.rhs[2 * b + d] += w * bx[d] * load.values[q][b];
                    }
                }
            }
            Ok(local)
        })
        .collect::<Result<_>>()?;

    if options.boundary_terms {
        let seg = segment_rule::<f64>(data_degree(k));
        let boundary: Vec<Local> = s
            .boundary_facets
            .par_iter()
            .map(|f| -> Result<Local> {
                let pos = s
                    .active_position(f.triangle)
                    .expect("facet owner is active");
                let map = ElementMap::new(s.parent.triangle_vertices(f.triangle))?;
                let mut local = Local::zeros(element_dofs(pos));
                let nt = f.normal;
                for (p, w) in seg.points.iter().zip(&seg.weights) {
                    let w = w * f.length;
                    let x = f.point(p[0]);
                    let tables = physical_tables(basis, &map, x)?;
                    let sample = BoundarySample::new(domain, x, nt, f.bc)?;
                    let phi: Vec<f64> = tables.iter().map(|t| *t.value()).collect();
                    let g: Vec<[f64; 2]> = tables.iter().map(|t| t.gradient()).collect();
                    // sigma(phi_a e_c) n~ for every (a, c)
                    let traction: Vec<[f64; 2]> = (0..nl)
                        .map(|ac| mat_vec(stress(unit_gradient(g[ac / 2], ac % 2), &mat), nt))
                        .collect();
                    for (ac, tr) in traction.iter().enumerate() {
                        for b in 0..nb {
                            for d in 0..2 {
                                local.matrix[(2 * b + d) * nl + ac] -= w * tr[d] * phi[b];
                            }
                        }
                    }
                    match f.bc {
                        BcKind::Dirichlet => {
                            let shifted = ShiftStencil::build(&tables, &sample.delta, k, None)?;
                            let ud = (data.u_d)(sample.x_true);
                            for bd in 0..nl {
                                let test = traction[bd];
                                for a in 0..nb {
                                    for c in 0..2 {
                                        local.matrix[bd * nl + 2 * a + c] +=
                                            w * shifted.values[a] * test[c];
                                    }
                                }
                                local.rhs[bd] += w * (ud[0] * test[0] + ud[1] * test[1]);
                            }
                        }
                        BcKind::Neumann => {
                            let shifted =
                                ShiftStencil::build(&tables, &sample.delta, k, Some(k - 1))?;
                            let sg = shifted.gradients.expect("gradients requested");
                            let n = sample.n_true;
                            let proj = dot(n, nt);
                            let tn = (data.t_n)(sample.x_true, n);
                            for a in 0..nb {
                                for c in 0..2 {
                                    let tr = mat_vec(stress(unit_gradient(sg[a], c), &mat), n);
                                    for b in 0..nb {
                                        for d in 0..2 {
                                            local.matrix[(2 * b + d) * nl + 2 * a + c] +=
                                                w * proj * tr[d] * phi[b];
                                        }
                                    }
                                }
                            }
                            for b in 0..nb {
                                for d in 0..2 {
                                    local.rhs[2 * b + d] += w * proj * tn[d] * phi[b];
                                }
                            }
                        }
                    }
                }
                Ok(local)
            })
            .collect::<Result<_>>()?;
        locals.extend(boundary);
    }
    Ok(finish(dofs.len(), locals, dofs))
}
