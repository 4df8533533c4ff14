//! Structured background triangulations and surrogate-domain extraction.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::Arc;

use crate::error::{Result, SbmError};
use crate::geometry::{BcKind, BoundarySample, TrueDomain};
use crate::quadrature::SegmentRule;
use crate::scalar::{from_f64, from_usize, norm, sub, Real};

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub min: [T; 2],
    pub max: [T; 2],
}

impl<T: Real> Rect<T> {
    pub fn unit() -> Self {
        Self {
            min: [T::zero(); 2],
            max: [T::one(); 2],
        }
    }

    pub fn center(&self) -> [T; 2] {
        let two = T::one() + T::one();
        [
            (self.min[0] + self.max[0]) / two,
            (self.min[1] + self.max[1]) / two,
        ]
    }
}

/// Conforming triangulation of the bounding box, counter-clockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundMesh<T> {
    pub vertices: Vec<[T; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub h_nominal: T,
    pub rotation_deg: T,
}

impl<T: Real> BackgroundMesh<T> {
    pub fn triangle_vertices(&self, t: usize) -> [[T; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangle_vertices(t);
        let two = T::one() + T::one();
        ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])) / two
    }

    /// Longest edge of triangle `t`.
    pub fn diameter(&self, t: usize) -> T {
        let [a, b, c] = self.triangle_vertices(t);
        norm(sub(b, a)).max(norm(sub(c, b))).max(norm(sub(a, c)))
    }

    /// Ratio of the largest to the smallest element diameter.
    pub fn quasi_uniformity(&self) -> T {
        let (mut lo, mut hi) = (T::infinity(), T::zero());
        for t in 0..self.triangles.len() {
            let d = self.diameter(t);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        hi / lo
    }
}

/// Splits `rect` into `n x n` cells, each cut along its lower-left to
/// upper-right diagonal, then rotates every vertex by `rotation_deg` about
/// `pivot`.
pub fn generate_grid<T: Real>(
    rect: Rect<T>,
    n_per_side: usize,
    rotation_deg: T,
    pivot: [T; 2],
) -> Result<BackgroundMesh<T>> {
    if n_per_side == 0 {
        return Err(SbmError::Argument("n_per_side must be at least 1".into()));
    }
    let w = rect.max[0] - rect.min[0];
    let h = rect.max[1] - rect.min[1];
    if !(w > T::zero() && h > T::zero()) {
        return Err(SbmError::Argument("bounding box is degenerate".into()));
    }
    let n = n_per_side;
    let nf = from_usize::<T>(n);
    let theta = rotation_deg.to_radians();
    let (s, c) = theta.sin_cos();
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = rect.min[0] + w * from_usize::<T>(i) / nf;
            let y = rect.min[1] + h * from_usize::<T>(j) / nf;
            let (dx, dy) = (x - pivot[0], y - pivot[1]);
            vertices.push([pivot[0] + c * dx - s * dy, pivot[1] + s * dx + c * dy]);
        }
    }
    let v = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
            triangles.push([v(i, j), v(i + 1, j + 1), v(i, j + 1)]);
        }
    }
    Ok(BackgroundMesh {
        vertices,
        triangles,
        h_nominal: w.max(h) / nf,
        rotation_deg,
    })
}

/// Edge of the surrogate boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFacet<T> {
    /// Background triangle index of the owning active triangle.
    pub triangle: usize,
    /// Local edge `e`: from local vertex `e` to `(e + 1) % 3`.
    pub local_edge: usize,
    pub vertices: [usize; 2],
    pub endpoints: [[T; 2]; 2],
    pub length: T,
    /// Outward unit normal of the surrogate domain.
    pub normal: [T; 2],
    pub bc: BcKind,
}

impl<T: Real> BoundaryFacet<T> {
    pub fn point(&self, t: T) -> [T; 2] {
        let [a, b] = self.endpoints;
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementClass {
    /// No side on the surrogate boundary.
    Interior,
    /// Boundary triangle with a vertex off the surrogate boundary.
    Normal,
    /// Boundary triangle with all three vertices on the surrogate boundary.
    Abnormal,
}

/// Active part of a background mesh lying inside the true domain.
#[derive(Debug, Clone)]
pub struct SurrogateMesh<T> {
    pub parent: Arc<BackgroundMesh<T>>,
    /// Background indices of active triangles, ascending.
    pub active: Vec<usize>,
    pub boundary_facets: Vec<BoundaryFacet<T>>,
    /// Per active triangle, aligned with `active`.
    pub element_class: Vec<ElementClass>,
    /// Diameter per active triangle, aligned with `active`.
    pub h_per_element: Vec<T>,
    /// Per background vertex: lies on the surrogate boundary.
    pub on_boundary: Vec<bool>,
}

/// Keeps the triangles whose three vertices lie in the closed domain and
/// builds the surrogate boundary with outward normals and facet tags.
pub fn extract_surrogate<T: Real>(
    mesh: Arc<BackgroundMesh<T>>,
    domain: &TrueDomain<T>,
) -> Result<SurrogateMesh<T>> {
    let inside: Vec<bool> = mesh.vertices.iter().map(|&p| domain.contains(p)).collect();
    let active: Vec<usize> = (0..mesh.triangles.len())
        .filter(|&t| mesh.triangles[t].iter().all(|&v| inside[v]))
        .collect();
    if active.is_empty() {
        return Err(SbmError::EmptySurrogate);
    }
    let mut edge_owners: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for &t in &active {
        let tri = mesh.triangles[t];
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            edge_owners
                .entry((a.min(b), a.max(b)))
                .or_default()
                .push((t, e));
        }
    }
    let half = from_f64::<T>(0.5);
    let mut facets = Vec::new();
    let mut on_boundary = vec![false; mesh.vertices.len()];
    for owners in edge_owners.values() {
        if owners.len() != 1 {
            continue;
        }
        let (t, e) = owners[0];
        let tri = mesh.triangles[t];
        let (a, b) = (tri[e], tri[(e + 1) % 3]);
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let d = sub(pb, pa);
        let length = norm(d);
        // counter-clockwise triangle: the outward normal is the edge rotated clockwise
        let normal = [d[1] / length, -d[0] / length];
        let mid = [(pa[0] + pb[0]) * half, (pa[1] + pb[1]) * half];
        let mapped = [
            domain.closest_point(pa)?.point,
            domain.closest_point(mid)?.point,
            domain.closest_point(pb)?.point,
        ];
        let bc = domain.classify_bc(&mapped)?;
        on_boundary[a] = true;
        on_boundary[b] = true;
        facets.push(BoundaryFacet {
            triangle: t,
            local_edge: e,
            vertices: [a, b],
            endpoints: [pa, pb],
            length,
            normal,
            bc,
        });
    }
    facets.sort_by_key(|f| (f.triangle, f.local_edge));
    let mut has_facet: HashMap<usize, ()> = HashMap::new();
    for f in &facets {
        has_facet.insert(f.triangle, ());
    }
    let element_class = active
        .iter()
        .map(|t| {
            if !has_facet.contains_key(t) {
                ElementClass::Interior
            } else if mesh.triangles[*t].iter().all(|&v| on_boundary[v]) {
                ElementClass::Abnormal
            } else {
                ElementClass::Normal
            }
        })
        .collect();
    let h_per_element = active.iter().map(|&t| mesh.diameter(t)).collect();
    Ok(SurrogateMesh {
        parent: mesh,
        active,
        boundary_facets: facets,
        element_class,
        h_per_element,
        on_boundary,
    })
}

/// Assumption diagnostics of a surrogate mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionDiagnostics<T> {
    /// Max of `|delta| / h_T` over facet quadrature points.
    pub max_delta_over_h: T,
    pub n_abnormal: usize,
    /// Facet count of the largest vertex-connected group of facets owned by
    /// abnormal triangles.
    pub max_abnormal_chain: usize,
    /// Max over facets of `|e| / |M(e)|`, the image length taken as a sampled
    /// chord sum (infinite when a facet maps onto a single point).
    pub facet_measure_ratio: T,
}

impl<T: Real> SurrogateMesh<T> {
    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    /// Position of background triangle `t` within `active`.
    pub fn active_position(&self, t: usize) -> Option<usize> {
        self.active.binary_search(&t).ok()
    }

    pub fn area(&self) -> T {
        self.active
            .iter()
            .fold(T::zero(), |acc, &t| acc + self.parent.signed_area(t))
    }

    /// Area recovered from the facets by the divergence theorem with the
    /// field `x / 2`.
    pub fn boundary_area(&self) -> T {
        let half = from_f64::<T>(0.5);
        self.boundary_facets.iter().fold(T::zero(), |acc, f| {
            let m = f.point(half);
            acc + half * f.length * (m[0] * f.normal[0] + m[1] * f.normal[1])
        })
    }

    /// Every surrogate-boundary vertex has an even number of incident facets.
    pub fn boundary_is_closed(&self) -> bool {
        let mut degree: HashMap<usize, usize> = HashMap::new();
        for f in &self.boundary_facets {
            for v in f.vertices {
                *degree.entry(v).or_default() += 1;
            }
        }
        degree.values().all(|d| d % 2 == 0)
    }

    pub fn n_abnormal(&self) -> usize {
        self.element_class
            .iter()
            .filter(|c| **c == ElementClass::Abnormal)
            .count()
    }

    pub fn diagnostics(
        &self,
        domain: &TrueDomain<T>,
        rule: &SegmentRule<T>,
    ) -> Result<AssumptionDiagnostics<T>> {
        let mut max_ratio = T::zero();
        let mut measure_ratio = T::zero();
        let samples = 16usize;
        for f in &self.boundary_facets {
            let pos = self
                .active_position(f.triangle)
                .expect("facet owner is active");
            let h = self.h_per_element[pos];
            for p in &rule.points {
                let s = BoundarySample::new(domain, f.point(p[0]), f.normal, f.bc)?;
                max_ratio = max_ratio.max(s.delta_norm() / h);
            }
            let mut image = T::zero();
            let mut prev = domain.closest_point(f.endpoints[0])?.point;
            for i in 1..=samples {
                let q = domain
                    .closest_point(f.point(from_usize::<T>(i) / from_usize(samples)))?
                    .point;
                image = image + norm(sub(q, prev));
                prev = q;
            }
            let ratio = if image > T::zero() {
                f.length / image
            } else {
                T::infinity()
            };
            measure_ratio = measure_ratio.max(ratio);
        }
        Ok(AssumptionDiagnostics {
            max_delta_over_h: max_ratio,
            n_abnormal: self.n_abnormal(),
            max_abnormal_chain: self.max_abnormal_chain(),
            facet_measure_ratio: measure_ratio,
        })
    }

    fn max_abnormal_chain(&self) -> usize {
        let abnormal: Vec<&BoundaryFacet<T>> = self
            .boundary_facets
            .iter()
            .filter(|f| {
                let pos = self
                    .active_position(f.triangle)
                    .expect("facet owner is active");
                self.element_class[pos] == ElementClass::Abnormal
            })
            .collect();
        // union-find over facets sharing a vertex
        let mut parent: Vec<usize> = (0..abnormal.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let mut by_vertex: HashMap<usize, usize> = HashMap::new();
        for (i, f) in abnormal.iter().enumerate() {
            for v in f.vertices {
                if let Some(&j) = by_vertex.get(&v) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri] = rj;
                } else {
                    by_vertex.insert(v, i);
                }
            }
        }
        let mut sizes: HashMap<usize, usize> = HashMap::new();
        for i in 0..abnormal.len() {
            *sizes.entry(find(&mut parent, i)).or_default() += 1;
        }
        sizes.values().copied().max().unwrap_or(0)
    }

    /// Plain-text dump: `v x y` per vertex, `t i j k` per active triangle,
    /// `f tri edge bc` per boundary facet (`bc` is `D` or `N`).
    pub fn write_dump(&self, mut out: impl Write) -> std::io::Result<()> {
        for v in &self.parent.vertices {
            writeln!(
                out,
                "v {:.17e} {:.17e}",
                v[0].to_f64().unwrap_or(f64::NAN),
                v[1].to_f64().unwrap_or(f64::NAN)
            )?;
        }
        for &t in &self.active {
            let [a, b, c] = self.parent.triangles[t];
            writeln!(out, "t {a} {b} {c}")?;
        }
        for f in &self.boundary_facets {
            let bc = match f.bc {
                BcKind::Dirichlet => 'D',
                BcKind::Neumann => 'N',
            };
            writeln!(out, "f {} {} {bc}", f.triangle, f.local_edge)?;
        }
        Ok(())
    }
}
