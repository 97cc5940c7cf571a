use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use elliptic_dg::analysis::{convergence_study, l2_error, ConvergenceSeries};
use elliptic_dg::background::{Background, ConformalFactor};
use elliptic_dg::mesh::{build_annulus_mesh, build_rectilinear_mesh, Mesh, RefinementMode};
use elliptic_dg::operators::{BoundaryCondition, BoundaryConditions, DgOperator, Form, OperatorConfig};
use elliptic_dg::solver::{
    assemble_explicit, solve_linear, solve_newton, LinearMethod, LinearSolverConfig, NewtonConfig,
    PreconditionerKind, SolveReport,
};
use elliptic_dg::systems::{
    system_by_name, AnalyticField, AnalyticSolution, EllipticSystem, Puncture, PunctureBackground, Wave,
};
use elliptic_dg::DgError;

use crate::config::{
    self, BackgroundSpec, BcData, BcKindSpec, Diagnostic, DomainSpec, FieldSpec, Method, Precond, RunConfig,
};

/// Overrides `output.directory` from the configuration.
pub const OUTPUT_DIR_ENV: &str = "DG_ELLIPTIC_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(Diagnostic),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{0}")]
    Cap(DgError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Io { .. } => 1,
            Self::Config(_) => 2,
            Self::Solver(_) => 3,
            Self::Cap(_) => 4,
        }
    }
}

/// Errors while turning a validated configuration into a discretization.
fn setup(field: &str) -> impl Fn(DgError) -> CliError + '_ {
    move |e| {
        CliError::Config(Diagnostic {
            line: None,
            field: field.into(),
            message: e.to_string(),
        })
    }
}

/// Errors while solving or assembling.
fn runtime(e: DgError) -> CliError {
    match e {
        DgError::ResourceGuard { .. } => CliError::Cap(e),
        DgError::Configuration(m) => CliError::Config(Diagnostic {
            line: None,
            field: "solver".into(),
            message: m,
        }),
        other => CliError::Solver(other.to_string()),
    }
}

fn io_error(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Config(Diagnostic {
            line: None,
            field: "<file>".into(),
            message: format!("cannot read {}: {e}", path.display()),
        })
    })?;
    config::parse(&text).map_err(CliError::Config)
}

/// A configured problem, ready to be discretized on any refinement of its
/// base mesh.
pub struct Problem {
    pub config: RunConfig,
    system: Arc<dyn EllipticSystem>,
    background: Option<Background>,
    solution: Option<AnalyticSolution>,
}

pub struct Solved {
    pub operator: DgOperator,
    pub u: Vec<f64>,
    pub report: SolveReport,
}

impl Problem {
    pub fn new(config: RunConfig) -> Result<Self, CliError> {
        let dim = config.domain.dim();
        let punctures = if config.punctures.is_empty() {
            None
        } else {
            let list = config
                .punctures
                .iter()
                .map(|p| Puncture {
                    mass: p.mass,
                    position: p.position,
                    momentum: p.momentum,
                    spin: p.spin,
                })
                .collect();
            Some(PunctureBackground::new(list).map_err(setup("punctures"))?)
        };
        let system = system_by_name(config.system.as_str(), dim, Some(config.elasticity), punctures)
            .map_err(setup("system"))?;
        let background = match config.background {
            BackgroundSpec::Flat => None,
            BackgroundSpec::ConformallyFlat { slope, offset } => {
                Some(Background::conformally_flat(dim, ConformalFactor::linear(slope, offset)))
            }
        };
        let solution = match &config.solution {
            None => None,
            Some(spec) => {
                let field = match &spec.field {
                    FieldSpec::SineProduct => AnalyticField::sine_product(dim),
                    FieldSpec::Waves(components) => AnalyticField::separable(
                        dim,
                        components
                            .iter()
                            .map(|(amplitude, waves)| {
                                let waves = waves
                                    .iter()
                                    .map(|&(wavenumber, phase)| Wave { wavenumber, phase })
                                    .collect();
                                (*amplitude, waves)
                            })
                            .collect(),
                    ),
                };
                Some(
                    AnalyticSolution::manufactured("configured", system.clone(), field, background.clone())
                        .map_err(setup("solution"))?,
                )
            }
        };
        Ok(Self {
            config,
            system,
            background,
            solution,
        })
    }

    pub fn base_mesh(&self) -> Result<Mesh, CliError> {
        let c = &self.config;
        match &c.domain {
            DomainSpec::Rectilinear { bounds } => build_rectilinear_mesh(bounds, &c.levels, &c.degrees),
            DomainSpec::Annulus {
                inner_radius,
                outer_radius,
                wedges,
            } => build_annulus_mesh(
                *inner_radius,
                *outer_radius,
                *wedges,
                [c.levels[0], c.levels[1]],
                [c.degrees[0], c.degrees[1]],
            ),
        }
        .map_err(setup("domain"))
    }

    fn boundary_conditions(&self) -> BoundaryConditions {
        let n = self.system.n_primal();
        let mut bcs = BoundaryConditions::new();
        for (tag, spec) in &self.config.boundary {
            let zero = move |_: &_, _: &_| vec![0.0; n];
            let bc = match (spec.data, &self.solution) {
                (BcData::Analytic, Some(s)) => match spec.kind {
                    BcKindSpec::Dirichlet => s.dirichlet(),
                    BcKindSpec::Neumann => s.neumann(),
                    BcKindSpec::Robin => s.robin(spec.a, spec.b),
                },
                _ => match spec.kind {
                    BcKindSpec::Dirichlet => BoundaryCondition::dirichlet(zero),
                    BcKindSpec::Neumann => BoundaryCondition::neumann(zero),
                    BcKindSpec::Robin => BoundaryCondition::robin(spec.a, spec.b, zero),
                },
            };
            bcs.insert(tag.clone(), bc);
        }
        bcs
    }

    pub fn operator(&self, mesh: &Mesh) -> Result<DgOperator, CliError> {
        let o = self.config.operator;
        let config = OperatorConfig {
            form: if o.strong_weak { Form::StrongWeak } else { Form::Strong },
            massive: o.massive,
            penalty: o.penalty,
        };
        DgOperator::new(
            mesh.clone(),
            self.system.clone(),
            self.background.clone(),
            self.boundary_conditions(),
            config,
        )
        .map_err(setup("operator"))
    }

    fn linear_config(&self) -> LinearSolverConfig {
        let s = self.config.solver;
        LinearSolverConfig {
            method: match s.method {
                Method::Gmres => LinearMethod::Gmres,
                Method::Cg => LinearMethod::Cg,
            },
            tol: s.tol,
            max_iter: s.max_iter,
            restart: s.restart,
            preconditioner: match s.preconditioner {
                Precond::Identity => PreconditionerKind::Identity,
                Precond::BlockJacobi => PreconditionerKind::BlockJacobi,
            },
        }
    }

    fn fixed_source(&self, x: &[f64; 3]) -> elliptic_dg::Result<Vec<f64>> {
        match &self.solution {
            Some(s) if self.config.solution.as_ref().is_some_and(|c| c.manufacture_source) => s.fixed_source(x),
            _ => Ok(vec![0.0; self.system.n_primal()]),
        }
    }

    /// Solves on `mesh`. A report that did not converge is returned as is.
    pub fn solve(&self, mesh: &Mesh) -> Result<Solved, CliError> {
        let mut op = self.operator(mesh)?;
        let n = op.n_primal_dofs();
        let (u, report) = if self.system.is_linear() {
            let b = op.build_rhs(|x| self.fixed_source(x)).map_err(runtime)?;
            solve_linear(&op, &b, &self.linear_config()).map_err(runtime)?
        } else {
            let b = op.fixed_source_term(|x| self.fixed_source(x)).map_err(runtime)?;
            let newton = NewtonConfig {
                tol: self.config.newton_tol,
                max_iter: self.config.newton_max_iter,
                linear: LinearSolverConfig {
                    tol: self.config.solver.tol.min(1e-12),
                    ..self.linear_config()
                },
            };
            solve_newton(&mut op, &b, &vec![0.0; n], &newton).map_err(runtime)?
        };
        Ok(Solved {
            operator: op,
            u,
            report,
        })
    }

    pub fn error(&self, mesh: &Mesh, u: &[f64]) -> Result<Option<f64>, CliError> {
        let Some(s) = &self.solution else { return Ok(None) };
        l2_error(mesh, self.background.as_ref(), self.system.n_primal(), u, |x| s.value(x))
            .map(Some)
            .map_err(runtime)
    }

    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.config.output_dir.clone())
    }

    fn output_path(&self, suffix: &str) -> PathBuf {
        self.output_dir().join(format!("{}_{suffix}", self.config.prefix))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_error(format!("cannot create {}", parent.display())))?;
    }
    fs::write(path, contents).map_err(io_error(format!("cannot write {}", path.display())))
}

fn solve_csv(problem: &Problem, mesh: &Mesh, solved: &Solved, error: Option<f64>) -> String {
    let r = &solved.report;
    let mut s = String::from("system,n_elements,n_dofs,iterations,residual,converged,error\n");
    let error = error.map(|e| format!("{e:.16e}")).unwrap_or_default();
    let _ = writeln!(
        s,
        "{},{},{},{},{:.16e},{},{error}",
        problem.config.system.as_str(),
        mesh.elements().len(),
        solved.u.len(),
        r.iterations,
        r.residual,
        r.converged,
    );
    s
}

fn solution_csv(solved: &Solved, dim: usize, ncomp: usize) -> String {
    let points = solved.operator.collocation_points();
    let axes = ["x", "y", "z"];
    let mut header: Vec<String> = axes[..dim].iter().map(|a| a.to_string()).collect();
    header.extend((0..ncomp).map(|c| if ncomp == 1 { "u".to_string() } else { format!("u{c}") }));
    let mut s = header.join(",");
    s.push('\n');
    for (p, x) in points.iter().enumerate() {
        let mut row: Vec<String> = x[..dim].iter().map(|v| format!("{v:.16e}")).collect();
        row.extend((0..ncomp).map(|c| format!("{:.16e}", solved.u[c * points.len() + p])));
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn cmd_solve(config: &Path) -> Result<(), CliError> {
    let problem = Problem::new(load_config(config)?)?;
    let mesh = problem.base_mesh()?;
    let solved = problem.solve(&mesh)?;
    let error = problem.error(&mesh, &solved.u)?;
    let ncomp = solved.operator.system().n_primal();
    write_file(&problem.output_path("solve.csv"), &solve_csv(&problem, &mesh, &solved, error))?;
    write_file(&problem.output_path("solution.csv"), &solution_csv(&solved, mesh.dim(), ncomp))?;
    write_file(&problem.output_path("mesh.csv"), &mesh.summary_csv().map_err(runtime)?)?;

    let r = &solved.report;
    println!(
        "{} dofs, {} iterations, residual {:.3e}, converged {}, {:.3} s",
        solved.u.len(),
        r.iterations,
        r.residual,
        r.converged,
        r.wall_time.as_secs_f64()
    );
    if let Some(e) = error {
        println!("l2 error {e:.6e}");
    }
    if !r.converged {
        return Err(CliError::Solver(format!(
            "no convergence after {} iterations (residual {:.3e})",
            r.iterations, r.residual
        )));
    }
    Ok(())
}

pub fn run_convergence(problem: &Problem, mode: RefinementMode, levels: usize) -> Result<ConvergenceSeries, CliError> {
    if levels < 2 {
        return Err(CliError::Config(Diagnostic {
            line: None,
            field: "--levels".into(),
            message: format!("a convergence study needs at least 2 levels, got {levels}"),
        }));
    }
    if problem.solution.is_none() {
        return Err(CliError::Config(Diagnostic {
            line: None,
            field: "solution".into(),
            message: "a convergence study needs a [solution] section".into(),
        }));
    }
    let base = problem.base_mesh()?;
    let mut failure = None;
    let series = convergence_study(mode, &base, levels, |mesh| {
        let solved = match problem.solve(mesh) {
            Ok(s) => s,
            Err(e) => {
                failure = Some(e);
                return Err(DgError::Sequencing("solve failed".into()));
            }
        };
        if !solved.report.converged {
            failure = Some(CliError::Solver(format!(
                "no convergence at {} points (residual {:.3e})",
                mesh.num_points(),
                solved.report.residual
            )));
            return Err(DgError::Sequencing("solve failed".into()));
        }
        match problem.error(mesh, &solved.u) {
            Ok(e) => Ok(e.unwrap_or(f64::NAN)),
            Err(e) => {
                failure = Some(e);
                Err(DgError::Sequencing("error evaluation failed".into()))
            }
        }
    });
    match (series, failure) {
        (_, Some(f)) => Err(f),
        (Ok(s), None) => Ok(s),
        (Err(e), None) => Err(runtime(e)),
    }
}

pub fn cmd_convergence(config: &Path, mode: RefinementMode, levels: usize) -> Result<(), CliError> {
    let problem = Problem::new(load_config(config)?)?;
    let series = run_convergence(&problem, mode, levels)?;
    write_file(&problem.output_path("convergence.csv"), &series.to_csv())?;
    write_file(&problem.output_path("mesh.csv"), &problem.base_mesh()?.summary_csv().map_err(runtime)?)?;
    print!("{}", series.to_csv());
    Ok(())
}

pub fn cmd_assemble(config: &Path, with_auxiliary: bool, out: &Path) -> Result<(), CliError> {
    let problem = Problem::new(load_config(config)?)?;
    let mesh = problem.base_mesh()?;
    let mut op = problem.operator(&mesh)?;
    if !op.system().is_linear() {
        // nonlinear systems are assembled about the zero initial guess
        op.set_linearization_point(&vec![0.0; op.n_primal_dofs()]).map_err(runtime)?;
    }
    let matrix = assemble_explicit(&op, with_auxiliary, problem.config.cap).map_err(runtime)?;
    let path = if out.is_absolute() {
        out.to_path_buf()
    } else {
        problem.output_dir().join(out)
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_error(format!("cannot create {}", parent.display())))?;
    }
    let mut file = fs::File::create(&path).map_err(io_error(format!("cannot write {}", path.display())))?;
    matrix
        .write_coordinate(&mut file)
        .map_err(io_error(format!("cannot write {}", path.display())))?;
    write_file(&problem.output_path("mesh.csv"), &mesh.summary_csv().map_err(runtime)?)?;
    println!("{}x{} matrix, {} nonzeros -> {}", matrix.rows, matrix.cols, matrix.nnz(), path.display());
    Ok(())
}
