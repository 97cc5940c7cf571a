//! Browser demo: operator sparsity, convergence curves and solution fields
//! for small Poisson and elasticity problems on the unit square.

use std::sync::Arc;

use wasm_bindgen::prelude::*;

use elliptic_dg::analysis::{convergence_study, export_sparsity, l2_error};
use elliptic_dg::mesh::{build_rectilinear_mesh, Mesh, RefinementMode};
use elliptic_dg::operators::{BoundaryConditions, DgOperator, Form, OperatorConfig};
use elliptic_dg::solver::{assemble_explicit, solve_linear, LinearSolverConfig, PreconditionerKind, DEFAULT_ASSEMBLY_CAP};
use elliptic_dg::systems::{AnalyticField, AnalyticSolution, Elasticity, EllipticSystem, FlatPoisson, Wave};

const MAX_LEVEL: u32 = 4;
const MAX_DEGREE: usize = 8;

fn check_size(levels: u32, degree: usize) -> Result<(), String> {
    if levels > MAX_LEVEL {
        return Err(format!("at most {MAX_LEVEL} refinement levels in the demo"));
    }
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(format!("degree must be between 1 and {MAX_DEGREE}"));
    }
    Ok(())
}

fn unit_square(levels: u32, degree: usize) -> Result<Mesh, String> {
    build_rectilinear_mesh(&[(0.0, 1.0), (0.0, 1.0)], &[levels, levels], &[degree, degree]).map_err(|e| e.to_string())
}

struct Demo {
    system: Arc<dyn EllipticSystem>,
    solution: AnalyticSolution,
}

fn problem(system: &str) -> Result<Demo, String> {
    let (sys, field): (Arc<dyn EllipticSystem>, AnalyticField) = match system {
        "poisson" => (Arc::new(FlatPoisson::new(2).unwrap()), AnalyticField::sine_product(2)),
        "elasticity" => {
            let waves = |k: f64| vec![Wave { wavenumber: k, phase: 0.3 }, Wave { wavenumber: k + 0.4, phase: 0.5 }];
            (
                Arc::new(Elasticity::new(2, 1.0, 1.0).unwrap()),
                AnalyticField::separable(2, vec![(1.0, waves(1.3)), (1.5, waves(1.5))]),
            )
        }
        other => return Err(format!("unknown system {other:?}, expected poisson or elasticity")),
    };
    let solution = AnalyticSolution::manufactured(system, sys.clone(), field, None).map_err(|e| e.to_string())?;
    Ok(Demo { system: sys, solution })
}

fn operator(demo: &Demo, mesh: &Mesh, config: OperatorConfig) -> Result<DgOperator, String> {
    let bcs = BoundaryConditions::uniform(&mesh.boundary_tags(), demo.solution.dirichlet());
    DgOperator::new(mesh.clone(), demo.system.clone(), None, bcs, config).map_err(|e| e.to_string())
}

fn solve(op: &DgOperator, solution: &AnalyticSolution) -> Result<(Vec<f64>, usize), String> {
    let b = op.build_rhs(|x| solution.fixed_source(x)).map_err(|e| e.to_string())?;
    let config = LinearSolverConfig {
        tol: 1e-12,
        max_iter: 20_000,
        preconditioner: PreconditionerKind::BlockJacobi,
        ..LinearSolverConfig::default()
    };
    let (u, report) = solve_linear(op, &b, &config).map_err(|e| e.to_string())?;
    if !report.converged && report.residual > 1e-10 {
        return Err(format!("solver stalled at relative residual {:.2e}", report.residual));
    }
    Ok((u, report.iterations))
}

#[wasm_bindgen]
#[derive(Debug)]
pub struct Sparsity {
    size: usize,
    rows: Vec<u32>,
    cols: Vec<u32>,
    magnitudes: Vec<f64>,
}

#[wasm_bindgen]
impl Sparsity {
    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.size
    }

    #[wasm_bindgen(getter)]
    pub fn nnz(&self) -> usize {
        self.rows.len()
    }

    /// 0-based row indices of the nonzero entries.
    pub fn rows(&self) -> Vec<u32> {
        self.rows.clone()
    }

    pub fn cols(&self) -> Vec<u32> {
        self.cols.clone()
    }

    /// `|A_ij| / max |A|` of each entry.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.magnitudes.clone()
    }
}

pub fn compute_sparsity(system: &str, levels: u32, degree: usize, with_auxiliary: bool) -> Result<Sparsity, String> {
    check_size(levels, degree)?;
    let demo = problem(system)?;
    let mesh = unit_square(levels, degree)?;
    let op = operator(&demo, &mesh, OperatorConfig::default())?;
    let a = assemble_explicit(&op, with_auxiliary, DEFAULT_ASSEMBLY_CAP).map_err(|e| e.to_string())?;
    let scale = a.max_abs();
    let entries = export_sparsity(&a, 0.0);
    Ok(Sparsity {
        size: a.rows,
        rows: entries.iter().map(|e| e.0 as u32).collect(),
        cols: entries.iter().map(|e| e.1 as u32).collect(),
        magnitudes: entries.iter().map(|e| if scale > 0.0 { e.2.abs() / scale } else { 0.0 }).collect(),
    })
}

#[wasm_bindgen]
#[derive(Debug)]
pub struct Convergence {
    resolution: Vec<f64>,
    n_points: Vec<u32>,
    errors: Vec<f64>,
    rates: Vec<f64>,
}

#[wasm_bindgen]
impl Convergence {
    /// Element size in h mode, polynomial degree in p mode.
    pub fn resolution(&self) -> Vec<f64> {
        self.resolution.clone()
    }

    pub fn n_points(&self) -> Vec<u32> {
        self.n_points.clone()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.errors.clone()
    }

    /// Rates between adjacent levels, one fewer than the levels.
    pub fn rates(&self) -> Vec<f64> {
        self.rates.clone()
    }
}

/// h mode refines the 1×1 mesh of degree `degree`; p mode starts from 2×2
/// elements of degree `degree` and raises it by one per level.
pub fn compute_convergence(system: &str, mode: &str, degree: usize, levels: usize) -> Result<Convergence, String> {
    let (mode, base) = match mode {
        "h" => {
            check_size(levels.saturating_sub(1) as u32, degree)?;
            (RefinementMode::H, unit_square(0, degree)?)
        }
        "p" => {
            check_size(1, degree + levels.saturating_sub(1))?;
            (RefinementMode::P, unit_square(1, degree)?)
        }
        other => return Err(format!("unknown mode {other:?}, expected h or p")),
    };
    let demo = problem(system)?;
    let solution = &demo.solution;
    let ncomp = solution.field().components();
    let mut failure = None;
    let series = convergence_study(mode, &base, levels, |mesh| {
        let result = operator(&demo, mesh, OperatorConfig::default())
            .and_then(|op| solve(&op, solution))
            .and_then(|(u, _)| l2_error(mesh, None, ncomp, &u, |x| solution.value(x)).map_err(|e| e.to_string()));
        result.map_err(|e| {
            failure = Some(e);
            elliptic_dg::DgError::Sequencing("level failed".into())
        })
    });
    let series = match (series, failure) {
        (_, Some(f)) => return Err(f),
        (s, None) => s.map_err(|e| e.to_string())?,
    };
    Ok(Convergence {
        resolution: series.levels.iter().map(|l| l.h_or_p).collect(),
        n_points: series.levels.iter().map(|l| l.n_points as u32).collect(),
        errors: series.errors(),
        rates: series.rates().map_err(|e| e.to_string())?,
    })
}

#[wasm_bindgen]
#[derive(Debug)]
pub struct Field {
    x: Vec<f64>,
    y: Vec<f64>,
    u: Vec<f64>,
    exact: Vec<f64>,
    error: f64,
    iterations: usize,
}

#[wasm_bindgen]
impl Field {
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    /// First solution component at each collocation point.
    pub fn u(&self) -> Vec<f64> {
        self.u.clone()
    }

    pub fn exact(&self) -> Vec<f64> {
        self.exact.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn error(&self) -> f64 {
        self.error
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

pub fn compute_field(system: &str, levels: u32, degree: usize, strong_weak: bool, penalty: f64) -> Result<Field, String> {
    check_size(levels, degree)?;
    if !(penalty >= 1.0 && penalty.is_finite()) {
        return Err("the penalty must be at least 1".into());
    }
    let demo = problem(system)?;
    let solution = &demo.solution;
    let mesh = unit_square(levels, degree)?;
    let config = OperatorConfig {
        form: if strong_weak { Form::StrongWeak } else { Form::Strong },
        penalty,
        ..OperatorConfig::default()
    };
    let op = operator(&demo, &mesh, config)?;
    let (u, iterations) = solve(&op, solution)?;
    let ncomp = solution.field().components();
    let error = l2_error(&mesh, None, ncomp, &u, |x| solution.value(x)).map_err(|e| e.to_string())?;
    let points = op.collocation_points();
    Ok(Field {
        x: points.iter().map(|p| p[0]).collect(),
        y: points.iter().map(|p| p[1]).collect(),
        exact: points.iter().map(|p| solution.value(p)[0]).collect(),
        u: u[..points.len()].to_vec(),
        error,
        iterations,
    })
}

fn js(e: String) -> JsValue {
    JsValue::from_str(&e)
}

#[wasm_bindgen(js_name = sparsityPattern)]
pub fn sparsity_pattern(system: &str, levels: u32, degree: usize, with_auxiliary: bool) -> Result<Sparsity, JsValue> {
    compute_sparsity(system, levels, degree, with_auxiliary).map_err(js)
}

#[wasm_bindgen(js_name = convergenceCurve)]
pub fn convergence_curve(system: &str, mode: &str, degree: usize, levels: usize) -> Result<Convergence, JsValue> {
    compute_convergence(system, mode, degree, levels).map_err(js)
}

#[wasm_bindgen(js_name = solutionField)]
pub fn solution_field(system: &str, levels: u32, degree: usize, strong_weak: bool, penalty: f64) -> Result<Field, JsValue> {
    compute_field(system, levels, degree, strong_weak, penalty).map_err(js)
}
