//! Manufactured-solution convergence studies over refinement levels and grid
//! rotations.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::assembly::{
    assemble_elasticity, assemble_poisson, data_degree, DofMap, LinearSystem, MaterialParams,
};
use crate::basis::MAX_ORDER;
use crate::error::{Result, SbmError};
use crate::geometry::{BcKind, Face, Square};
use crate::manufactured::{manufacture_elasticity, manufacture_poisson, ExactScalar, ExactVector};
use crate::mesh::{extract_surrogate, generate_grid, AssumptionDiagnostics, Rect};
use crate::quadrature::{segment_rule, triangle_rule};
use crate::solve::{condition_number, solve, ConditionEstimate, ConditionMode};
use crate::{ElementMap, ReferenceBasis, SurrogateMesh, TrueDomain};

/// Errors at or below this level count as exact reproduction.
pub const EXACT_THRESHOLD: f64 = 1e-9;
/// Number of finest levels used for rate fits.
pub const FIT_LEVELS: usize = 3;

pub const CSV_HEADER: &str =
    "problem,order,rotation_deg,level,n_per_side,h_nominal,n_dofs,err_l2,err_h1semi,cond,max_delta_over_h,n_abnormal";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Problem {
    Poisson,
    Elasticity,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::Poisson => "poisson",
            Problem::Elasticity => "elasticity",
        })
    }
}

impl FromStr for Problem {
    type Err = SbmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(Problem::Poisson),
            "elasticity" => Ok(Problem::Elasticity),
            other => Err(SbmError::Argument(format!("unknown problem '{other}'"))),
        }
    }
}

/// Exact solution of a study, scalar for Poisson and vector for elasticity.
#[derive(Clone)]
pub enum Exact {
    Scalar(ExactScalar),
    Vector(ExactVector),
}

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Exact::Scalar(_) => "Exact::Scalar",
            Exact::Vector(_) => "Exact::Vector",
        })
    }
}

impl Exact {
    pub fn components(&self) -> usize {
        match self {
            Exact::Scalar(_) => 1,
            Exact::Vector(_) => 2,
        }
    }

    fn component(&self, c: usize) -> &ExactScalar {
        match self {
            Exact::Scalar(u) => u,
            Exact::Vector(u) => &u.components[c],
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudySpec {
    pub problem: Problem,
    pub order: usize,
    /// Background cells per side, strictly increasing powers of two.
    pub levels: Vec<usize>,
    /// Grid rotations in degrees, within `[0, 45]`.
    pub rotations: Vec<f64>,
    pub domain: TrueDomain,
    /// Unrotated background box; rotation pivots about its centre.
    pub background: Rect<f64>,
    pub material: MaterialParams,
    pub exact: Exact,
    pub compute_condition: bool,
    pub condition_mode: ConditionMode,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

pub fn default_levels(order: usize) -> Vec<usize> {
    let finest = if order <= 3 { 128 } else { 64 };
    std::iter::successors(Some(8), |n| Some(n * 2))
        .take_while(|&n| n <= finest)
        .collect()
}

pub fn default_rotations() -> Vec<f64> {
    (0..=10).map(|i| 4.5 * i as f64).collect()
}

/// The benchmark square: side 0.43 centred at (0.5, 0.5), with a Neumann top
/// face for elasticity.
pub fn benchmark_domain(problem: Problem) -> TrueDomain {
    let sq = Square::new([0.5, 0.5], 0.43).expect("valid square");
    TrueDomain::Square(match problem {
        Problem::Poisson => sq,
        Problem::Elasticity => sq.with_face_bc(Face::Top, BcKind::Neumann),
    })
}

pub fn benchmark_material() -> MaterialParams {
    MaterialParams::new(10e9, 0.3).expect("valid material")
}

impl StudySpec {
    /// Benchmark setup for `problem` at order `order` with default levels and
    /// rotations.
    pub fn benchmark(problem: Problem, order: usize) -> Self {
        let exact = match problem {
            Problem::Poisson => Exact::Scalar(ExactScalar::poisson_benchmark()),
            Problem::Elasticity => Exact::Vector(ExactVector::elasticity_benchmark()),
        };
        Self {
            problem,
            order,
            levels: default_levels(order),
            rotations: default_rotations(),
            domain: benchmark_domain(problem),
            background: Rect::unit(),
            material: benchmark_material(),
            exact,
            compute_condition: false,
            condition_mode: ConditionMode::Auto,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_ORDER).contains(&self.order) {
            return Err(SbmError::Argument(format!(
                "order must be in 1..{MAX_ORDER}"
            )));
        }
        if self.levels.is_empty() || self.rotations.is_empty() {
            return Err(SbmError::Argument(
                "at least one level and one rotation are required".into(),
            ));
        }
        if let Some(n) = self.levels.iter().find(|n| !n.is_power_of_two()) {
            return Err(SbmError::Argument(format!(
                "level {n} is not a power of two"
            )));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SbmError::Argument(
                "levels must be strictly increasing".into(),
            ));
        }
        if let Some(r) = self.rotations.iter().find(|r| !(0.0..=45.0).contains(*r)) {
            return Err(SbmError::Argument(format!(
                "rotation {r} is outside [0, 45] degrees"
            )));
        }
        let expected = match self.problem {
            Problem::Poisson => 1,
            Problem::Elasticity => 2,
        };
        if self.exact.components() != expected {
            return Err(SbmError::Argument(format!(
                "{} needs a {expected}-component exact solution",
                self.problem
            )));
        }
        if self.threads == Some(0) {
            return Err(SbmError::Argument("threads must be positive".into()));
        }
        Ok(())
    }

    pub fn h_nominal(&self, n: usize) -> f64 {
        let w = self.background.max[0] - self.background.min[0];
        let h = self.background.max[1] - self.background.min[1];
        w.max(h) / n as f64
    }
}

/// `(||u - u_h||_0, |u - u_h|_1)` over the surrogate domain; vector fields sum
/// the squared component errors.
pub fn error_norms(
    coeffs: &[f64],
    exact: &Exact,
    s: &SurrogateMesh,
    basis: &ReferenceBasis,
    dofs: &DofMap,
) -> Result<(f64, f64)> {
    let nc = exact.components();
    if dofs.components() != nc || coeffs.len() != dofs.len() {
        return Err(SbmError::Argument(
            "coefficient vector does not match the DOF map".into(),
        ));
    }
    let rule = triangle_rule::<f64>(data_degree(basis.order()));
    let tab: Vec<_> = rule
        .points
        .iter()
        .map(|p| basis.eval_derivatives(p, 1))
        .collect::<Result<_>>()?;
    let parts: Vec<(f64, f64)> = s
        .active
        .par_iter()
        .enumerate()
        .map(|(pos, &t)| -> Result<(f64, f64)> {
            let map = ElementMap::new(s.parent.triangle_vertices(t))?;
            let cell = dofs.cell(pos);
            let (mut l2, mut h1) = (0.0, 0.0);
            for ((p, w), tables) in rule.points.iter().zip(&rule.weights).zip(&tab) {
                let x = map.map(*p);
                let w = w * map.det();
                for c in 0..nc {
                    let (mut v, mut g) = (0.0, [0.0; 2]);
                    for (tbl, &d) in tables.iter().zip(cell) {
                        let coef = coeffs[dofs.global(d, c)];
                        let gr = map.gradient(tbl.gradient());
                        v += coef * tbl.value();
                        g[0] += coef * gr[0];
                        g[1] += coef * gr[1];
                    }
                    let u = exact.component(c);
                    let gu = (u.gradient)(x);
                    l2 += w * ((u.value)(x) - v).powi(2);
                    h1 += w * ((gu[0] - g[0]).powi(2) + (gu[1] - g[1]).powi(2));
                }
            }
            Ok((l2, h1))
        })
        .collect::<Result<_>>()?;
    let (l2, h1) = parts
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    Ok((l2.sqrt(), h1.sqrt()))
}

/// Least-squares slope of `log(err)` against `log(h)` plus the rates between
/// consecutive pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub pairwise: Vec<f64>,
}

pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 2 {
        return Err(SbmError::Argument(
            "a rate needs at least two (h, error) pairs".into(),
        ));
    }
    if let Some(&(h, e)) = pairs
        .iter()
        .find(|(h, e)| !(*h > 0.0 && *e > 0.0) || !h.is_finite() || !e.is_finite())
    {
        return Err(SbmError::Argument(format!(
            "nonpositive or non-finite pair (h={h}, err={e})"
        )));
    }
    let logs: Vec<(f64, f64)> = pairs.iter().map(|(h, e)| (h.ln(), e.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(SbmError::Argument("all h values coincide".into()));
    }
    let pairwise = logs
        .windows(2)
        .map(|w| (w[0].1 - w[1].1) / (w[0].0 - w[1].0))
        .collect();
    Ok(RateFit {
        slope: sxy / sxx,
        pairwise,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rate {
    Fitted(RateFit),
    /// Every error is at round-off level.
    Exact,
    Unavailable(String),
}

impl Rate {
    /// Rate over the [`FIT_LEVELS`] finest pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        let tail = &pairs[pairs.len().saturating_sub(FIT_LEVELS)..];
        if !tail.is_empty() && tail.iter().all(|p| p.1 <= EXACT_THRESHOLD) {
            return Rate::Exact;
        }
        match fit_rate(tail) {
            Ok(f) => Rate::Fitted(f),
            Err(e) => Rate::Unavailable(e.to_string()),
        }
    }

    pub fn slope(&self) -> Option<f64> {
        match self {
            Rate::Fitted(f) => Some(f.slope),
            _ => None,
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Fitted(r) => write!(f, "{:.3}", r.slope),
            Rate::Exact => f.write_str("exact"),
            Rate::Unavailable(why) => write!(f, "n/a ({why})"),
        }
    }
}

/// Everything produced by one solve.
#[derive(Debug, Clone)]
pub struct SolvedCase {
    pub surrogate: SurrogateMesh,
    pub basis: ReferenceBasis,
    pub system: LinearSystem,
    pub coefficients: Vec<f64>,
    pub diagnostics: AssumptionDiagnostics<f64>,
}

/// Builds the grid, extracts the surrogate and computes its diagnostics.
pub fn build_surrogate(
    spec: &StudySpec,
    rotation: f64,
    n: usize,
) -> Result<(SurrogateMesh, AssumptionDiagnostics<f64>)> {
    let mesh = generate_grid(spec.background, n, rotation, spec.background.center())?;
    let s = extract_surrogate(Arc::new(mesh), &spec.domain)?;
    let diag = s.diagnostics(&spec.domain, &segment_rule(data_degree(spec.order)))?;
    Ok((s, diag))
}

pub fn assemble_case(
    spec: &StudySpec,
    s: &SurrogateMesh,
    basis: &ReferenceBasis,
) -> Result<LinearSystem> {
    match &spec.exact {
        Exact::Scalar(u) => assemble_poisson(s, basis, &spec.domain, &manufacture_poisson(u)),
        Exact::Vector(u) => {
            let data = manufacture_elasticity(u, &spec.material);
            assemble_elasticity(s, basis, &spec.domain, &spec.material, &data)
        }
    }
}

pub fn solve_case(spec: &StudySpec, rotation: f64, n: usize) -> Result<SolvedCase> {
    spec.validate()?;
    let basis = ReferenceBasis::new(spec.order)?;
    let (surrogate, diagnostics) = build_surrogate(spec, rotation, n)?;
    let system = assemble_case(spec, &surrogate, &basis)?;
    let coefficients = solve(&system)?;
    Ok(SolvedCase {
        surrogate,
        basis,
        system,
        coefficients,
        diagnostics,
    })
}

/// Measured quantities of one (rotation, level) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub n_dofs: usize,
    pub err_l2: f64,
    pub err_h1: f64,
    pub cond: Option<ConditionEstimate>,
    pub diagnostics: AssumptionDiagnostics<f64>,
}

pub fn run_case(spec: &StudySpec, rotation: f64, n: usize) -> Result<CaseResult> {
    let case = solve_case(spec, rotation, n)?;
    let (err_l2, err_h1) = error_norms(
        &case.coefficients,
        &spec.exact,
        &case.surrogate,
        &case.basis,
        &case.system.dofs,
    )?;
    let cond = if spec.compute_condition {
        let c = condition_number(&case.system.matrix, spec.condition_mode)?;
        if !c.converged {
            log::warn!("condition estimate at n={n}, rotation={rotation} did not converge");
        }
        Some(c)
    } else {
        None
    };
    Ok(CaseResult {
        n_dofs: case.system.dofs.len(),
        err_l2,
        err_h1,
        cond,
        diagnostics: case.diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub rotation: f64,
    /// Index into the study's level list.
    pub level: usize,
    pub n_per_side: usize,
    pub h_nominal: f64,
    pub outcome: std::result::Result<CaseResult, String>,
}

/// Rotation-mean quantities at one level; `None` when any rotation failed.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelMean {
    pub n_per_side: usize,
    pub h_nominal: f64,
    pub err_l2: Option<f64>,
    pub err_h1: Option<f64>,
    pub cond: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationRates {
    pub rotation: f64,
    pub l2: Rate,
    pub h1: Rate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub problem: Problem,
    pub order: usize,
    pub rows: Vec<Row>,
    pub per_rotation: Vec<RotationRates>,
    pub means: Vec<LevelMean>,
    pub mean_l2: Rate,
    pub mean_h1: Rate,
    /// Slope of `log(kappa)` against `log(h)` over every level with a mean κ.
    pub cond_slope: Option<f64>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty())
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

impl ConvergenceReport {
    fn assemble(spec: &StudySpec, rows: Vec<Row>) -> Self {
        let per_rotation = spec
            .rotations
            .iter()
            .map(|&rot| {
                let ok: Vec<&CaseResult> = rows
                    .iter()
                    .filter(|r| r.rotation == rot)
                    .filter_map(|r| r.outcome.as_ref().ok())
                    .collect();
                let hs: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.rotation == rot && r.outcome.is_ok())
                    .map(|r| r.h_nominal)
                    .collect();
                let l2: Vec<(f64, f64)> = hs.iter().zip(&ok).map(|(h, c)| (*h, c.err_l2)).collect();
                let h1: Vec<(f64, f64)> = hs.iter().zip(&ok).map(|(h, c)| (*h, c.err_h1)).collect();
                RotationRates {
                    rotation: rot,
                    l2: Rate::from_pairs(&l2),
                    h1: Rate::from_pairs(&h1),
                }
            })
            .collect();
        let means: Vec<LevelMean> = spec
            .levels
            .iter()
            .enumerate()
            .map(|(li, &n)| {
                let at: Vec<&Row> = rows.iter().filter(|r| r.level == li).collect();
                let get = |f: &dyn Fn(&CaseResult) -> Option<f64>| {
                    mean(at.iter().map(|r| r.outcome.as_ref().ok().and_then(&f)))
                };
                LevelMean {
                    n_per_side: n,
                    h_nominal: spec.h_nominal(n),
                    err_l2: get(&|c| Some(c.err_l2)),
                    err_h1: get(&|c| Some(c.err_h1)),
                    cond: get(&|c| c.cond.map(|k| k.value)),
                }
            })
            .collect();
        let pairs = |f: fn(&LevelMean) -> Option<f64>| -> Vec<(f64, f64)> {
            means
                .iter()
                .filter_map(|m| f(m).map(|e| (m.h_nominal, e)))
                .collect()
        };
        let mean_l2 = Rate::from_pairs(&pairs(|m| m.err_l2));
        let mean_h1 = Rate::from_pairs(&pairs(|m| m.err_h1));
        let cond_pairs = pairs(|m| m.cond);
        let cond_slope = fit_rate(&cond_pairs).ok().map(|f| f.slope);
        Self {
            problem: spec.problem,
            order: spec.order,
            rows,
            per_rotation,
            means,
            mean_l2,
            mean_h1,
            cond_slope,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = (&Row, &str)> {
        self.rows
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| (r, e.as_str())))
    }

    pub fn has_failures(&self) -> bool {
        self.failures().next().is_some()
    }

    pub fn to_csv(&self) -> String {
        let f = |v: f64| format!("{v:.16e}");
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let mut fields = vec![
                self.problem.to_string(),
                self.order.to_string(),
                f(r.rotation),
                r.level.to_string(),
                r.n_per_side.to_string(),
                f(r.h_nominal),
            ];
            match &r.outcome {
                Ok(c) => fields.extend([
                    c.n_dofs.to_string(),
                    f(c.err_l2),
                    f(c.err_h1),
                    c.cond.map(|k| f(k.value)).unwrap_or_default(),
                    f(c.diagnostics.max_delta_over_h),
                    c.diagnostics.n_abnormal.to_string(),
                ]),
                Err(_) => fields.extend(std::iter::repeat_n(String::new(), 6)),
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes `{problem}_k{order}_l2.dat` and `..._h1.dat` with `h error`
    /// lines of the rotation-mean errors; returns the paths written.
    pub fn write_gnuplot(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (tag, pick) in [
            (
                "l2",
                (|m: &LevelMean| m.err_l2) as fn(&LevelMean) -> Option<f64>,
            ),
            ("h1", |m| m.err_h1),
        ] {
            let path = dir.join(format!("{}_k{}_{tag}.dat", self.problem, self.order));
            let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
            writeln!(file, "# h error")?;
            for m in &self.means {
                if let Some(e) = pick(m) {
                    writeln!(file, "{:.16e} {:.16e}", m.h_nominal, e)?;
                }
            }
            file.flush()?;
            written.push(path);
        }
        Ok(written)
    }

    /// Human-readable rate table.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} k={}: mean L2 rate {}, mean H1 rate {}",
            self.problem, self.order, self.mean_l2, self.mean_h1
        );
        if let Some(c) = self.cond_slope {
            s.push_str(&format!(", cond slope {c:.3}"));
        }
        for r in &self.per_rotation {
            s.push_str(&format!(
                "\n  rotation {:>5.1}: L2 {}, H1 {}",
                r.rotation, r.l2, r.h1
            ));
        }
        s
    }
}

/// Runs every (rotation, level) cell. Cell failures are recorded in their row
/// and do not stop the study.
pub fn run_study(spec: &StudySpec) -> Result<ConvergenceReport> {
    spec.validate()?;
    let cells: Vec<(f64, usize, usize)> = spec
        .rotations
        .iter()
        .flat_map(|&r| {
            spec.levels
                .iter()
                .enumerate()
                .map(move |(li, &n)| (r, li, n))
        })
        .collect();
    let work = || -> Vec<Row> {
        cells
            .par_iter()
            .map(|&(rotation, level, n)| {
                let outcome = run_case(spec, rotation, n).map_err(|e| e.to_string());
                if let Err(e) = &outcome {
                    log::warn!(
                        "{} k={} rotation={rotation} n={n}: {e}",
                        spec.problem,
                        spec.order
                    );
                }
                Row {
                    rotation,
                    level,
                    n_per_side: n,
                    h_nominal: spec.h_nominal(n),
                    outcome,
                }
            })
            .collect()
    };
    let rows = match spec.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| SbmError::Argument(e.to_string()))?
            .install(work),
        None => work(),
    };
    Ok(ConvergenceReport::assemble(spec, rows))
}
