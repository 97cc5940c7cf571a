use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use serde::Deserialize;
use toml::Spanned;

use elliptic_dg::solver::DEFAULT_ASSEMBLY_CAP;

/// Where a configuration problem was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: field `{}`: {}", self.field, self.message),
            None => write!(f, "field `{}`: {}", self.field, self.message),
        }
    }
}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

struct Ctx<'a> {
    source: &'a str,
}

impl Ctx<'_> {
    fn at(&self, span: Range<usize>, field: &str, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            line: Some(line_of(self.source, span.start)),
            field: field.into(),
            message: message.into(),
        }
    }
}

fn missing(field: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        line: None,
        field: field.into(),
        message: message.into(),
    }
}

// Raw schema. Every section rejects unknown keys.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: Spanned<String>,
    domain: Spanned<RawDomain>,
    refinement: Spanned<RawRefinement>,
    #[serde(default)]
    background: Option<Spanned<RawBackground>>,
    #[serde(default)]
    elasticity: Option<Spanned<RawElasticity>>,
    #[serde(default)]
    punctures: Vec<Spanned<RawPuncture>>,
    #[serde(default)]
    boundary: BTreeMap<Spanned<String>, Spanned<RawBoundary>>,
    #[serde(default)]
    operator: Option<Spanned<RawOperator>>,
    #[serde(default)]
    solver: Option<Spanned<RawSolver>>,
    #[serde(default)]
    newton: Option<Spanned<RawNewton>>,
    #[serde(default)]
    solution: Option<Spanned<RawSolution>>,
    #[serde(default)]
    assembly: Option<RawAssembly>,
    #[serde(default)]
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    kind: Spanned<String>,
    bounds: Option<Spanned<Vec<[f64; 2]>>>,
    inner_radius: Option<Spanned<f64>>,
    outer_radius: Option<Spanned<f64>>,
    wedges: Option<Spanned<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRefinement {
    levels: Spanned<Vec<u32>>,
    degrees: Spanned<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBackground {
    kind: Spanned<String>,
    slope: Option<Spanned<Vec<f64>>>,
    offset: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawElasticity {
    lambda: f64,
    mu: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPuncture {
    mass: f64,
    position: [f64; 3],
    #[serde(default)]
    momentum: [f64; 3],
    #[serde(default)]
    spin: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    kind: Spanned<String>,
    data: Option<Spanned<String>>,
    a: Option<f64>,
    b: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperator {
    penalty: Option<Spanned<f64>>,
    form: Option<Spanned<String>>,
    massive: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    method: Option<Spanned<String>>,
    tol: Option<Spanned<f64>>,
    max_iter: Option<Spanned<usize>>,
    restart: Option<Spanned<usize>>,
    preconditioner: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNewton {
    tol: Option<Spanned<f64>>,
    max_iter: Option<Spanned<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolution {
    kind: Spanned<String>,
    #[serde(default)]
    components: Vec<RawComponent>,
    manufacture_source: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    amplitude: f64,
    waves: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAssembly {
    cap: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<PathBuf>,
    prefix: Option<String>,
}

// Validated configuration.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemName {
    PoissonFlat,
    PoissonCurved,
    Elasticity,
    Puncture,
}

impl SystemName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PoissonFlat => "poisson-flat",
            Self::PoissonCurved => "poisson-curved",
            Self::Elasticity => "elasticity",
            Self::Puncture => "puncture",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Rectilinear { bounds: Vec<(f64, f64)> },
    Annulus { inner_radius: f64, outer_radius: f64, wedges: usize },
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Rectilinear { bounds } => bounds.len(),
            Self::Annulus { .. } => 2,
        }
    }

    pub fn boundary_tags(&self) -> Vec<String> {
        match self {
            Self::Rectilinear { bounds } => (0..bounds.len())
                .flat_map(|d| ["lower", "upper"].map(|s| format!("{s}-{}", ["x", "y", "z"][d])))
                .collect(),
            Self::Annulus { .. } => vec!["inner".into(), "outer".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundSpec {
    Flat,
    ConformallyFlat { slope: [f64; 3], offset: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKindSpec {
    Dirichlet,
    Neumann,
    Robin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcData {
    Analytic,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    pub kind: BcKindSpec,
    pub data: BcData,
    /// Robin coefficients `a u + b n·F = g`.
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    SineProduct,
    /// Components of `amplitude ∏ sin(k_i x_i + phase_i)`.
    Waves(Vec<(f64, Vec<(f64, f64)>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSpec {
    pub field: FieldSpec,
    pub manufacture_source: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PunctureSpec {
    pub mass: f64,
    pub position: [f64; 3],
    pub momentum: [f64; 3],
    pub spin: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Gmres,
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precond {
    Identity,
    BlockJacobi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSpec {
    pub method: Method,
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    pub preconditioner: Precond,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSpec {
    pub penalty: f64,
    pub strong_weak: bool,
    pub massive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemName,
    pub domain: DomainSpec,
    pub levels: Vec<u32>,
    pub degrees: Vec<usize>,
    pub background: BackgroundSpec,
    pub elasticity: (f64, f64),
    pub punctures: Vec<PunctureSpec>,
    /// Condition for every boundary tag of the domain.
    pub boundary: BTreeMap<String, BoundarySpec>,
    pub operator: OperatorSpec,
    pub solver: SolverSpec,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub solution: Option<SolutionSpec>,
    pub cap: usize,
    pub output_dir: PathBuf,
    pub prefix: String,
}

fn choice<T: Copy>(ctx: &Ctx, value: &Spanned<String>, field: &str, options: &[(&str, T)]) -> Result<T, Diagnostic> {
    options
        .iter()
        .find(|(name, _)| *name == value.get_ref())
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            ctx.at(
                value.span(),
                field,
                format!("unknown value {:?}, expected one of {}", value.get_ref(), names.join(", ")),
            )
        })
}

fn positive(ctx: &Ctx, value: &Spanned<f64>, field: &str) -> Result<f64, Diagnostic> {
    let v = *value.get_ref();
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ctx.at(value.span(), field, format!("must be a positive number, got {v}")))
    }
}

fn at_least(ctx: &Ctx, value: &Spanned<usize>, field: &str, min: usize) -> Result<usize, Diagnostic> {
    let v = *value.get_ref();
    if v >= min {
        Ok(v)
    } else {
        Err(ctx.at(value.span(), field, format!("must be at least {min}, got {v}")))
    }
}

fn unexpected<T>(ctx: &Ctx, value: &Option<Spanned<T>>, field: &str, kind: &str) -> Result<(), Diagnostic> {
    match value {
        Some(v) => Err(ctx.at(v.span(), field, format!("not used by a {kind} domain"))),
        None => Ok(()),
    }
}

/// Parses and validates a configuration file's text.
pub fn parse(source: &str) -> Result<RunConfig, Diagnostic> {
    let raw: RawConfig = toml::from_str(source).map_err(|e| {
        let span = e.span();
        let field = span
            .clone()
            .and_then(|s| source.get(s))
            .map(|s| s.trim().trim_matches('"').to_string())
            .filter(|s| !s.is_empty() && !s.contains('\n'))
            .unwrap_or_else(|| "<document>".into());
        Diagnostic {
            line: span.map(|s| line_of(source, s.start)),
            field,
            message: e.message().to_string(),
        }
    })?;
    let ctx = Ctx { source };

    let system = choice(
        &ctx,
        &raw.system,
        "system",
        &[
            ("poisson-flat", SystemName::PoissonFlat),
            ("poisson-curved", SystemName::PoissonCurved),
            ("elasticity", SystemName::Elasticity),
            ("puncture", SystemName::Puncture),
        ],
    )?;

    let d = raw.domain.get_ref();
    let domain = match choice(&ctx, &d.kind, "domain.kind", &[("rectilinear", 0), ("annulus", 1)])? {
        0 => {
            for (v, f) in [
                (&d.inner_radius, "domain.inner_radius"),
                (&d.outer_radius, "domain.outer_radius"),
            ] {
                unexpected(&ctx, v, f, "rectilinear")?;
            }
            unexpected(&ctx, &d.wedges, "domain.wedges", "rectilinear")?;
            let bounds = d
                .bounds
                .as_ref()
                .ok_or_else(|| ctx.at(raw.domain.span(), "domain.bounds", "required for a rectilinear domain"))?;
            let list = bounds.get_ref();
            if list.is_empty() || list.len() > 3 {
                return Err(ctx.at(bounds.span(), "domain.bounds", "needs one [lower, upper] pair per dimension (1 to 3)"));
            }
            if let Some(bad) = list.iter().find(|[lo, hi]| !(lo < hi && lo.is_finite() && hi.is_finite())) {
                return Err(ctx.at(bounds.span(), "domain.bounds", format!("empty interval [{}, {}]", bad[0], bad[1])));
            }
            DomainSpec::Rectilinear {
                bounds: list.iter().map(|b| (b[0], b[1])).collect(),
            }
        }
        _ => {
            unexpected(&ctx, &d.bounds, "domain.bounds", "annulus")?;
            let need = |v: &Option<Spanned<f64>>, f: &str| {
                v.as_ref()
                    .ok_or_else(|| ctx.at(raw.domain.span(), f, "required for an annulus domain"))
                    .and_then(|v| positive(&ctx, v, f))
            };
            let inner_radius = need(&d.inner_radius, "domain.inner_radius")?;
            let outer_radius = need(&d.outer_radius, "domain.outer_radius")?;
            if outer_radius <= inner_radius {
                let span = d.outer_radius.as_ref().map(|v| v.span()).unwrap_or(raw.domain.span());
                return Err(ctx.at(span, "domain.outer_radius", "must exceed the inner radius"));
            }
            let wedges = match &d.wedges {
                Some(w) => at_least(&ctx, w, "domain.wedges", 2)?,
                None => 4,
            };
            DomainSpec::Annulus {
                inner_radius,
                outer_radius,
                wedges,
            }
        }
    };
    let dim = domain.dim();

    let r = raw.refinement.get_ref();
    if r.levels.get_ref().len() != dim {
        return Err(ctx.at(r.levels.span(), "refinement.levels", format!("needs {dim} entries")));
    }
    if let Some(l) = r.levels.get_ref().iter().find(|&&l| l > 12) {
        return Err(ctx.at(r.levels.span(), "refinement.levels", format!("level {l} is beyond the supported 12")));
    }
    if r.degrees.get_ref().len() != dim {
        return Err(ctx.at(r.degrees.span(), "refinement.degrees", format!("needs {dim} entries")));
    }
    if let Some(p) = r.degrees.get_ref().iter().find(|&&p| !(1..=12).contains(&p)) {
        return Err(ctx.at(r.degrees.span(), "refinement.degrees", format!("degree {p} is outside 1..=12")));
    }

    let background = match &raw.background {
        None => BackgroundSpec::Flat,
        Some(bg) => {
            let b = bg.get_ref();
            match choice(&ctx, &b.kind, "background.kind", &[("flat", 0), ("conformally-flat", 1)])? {
                0 => {
                    if b.slope.is_some() || b.offset.is_some() {
                        return Err(ctx.at(bg.span(), "background", "a flat background takes no parameters"));
                    }
                    BackgroundSpec::Flat
                }
                _ => {
                    let mut slope = [0.0; 3];
                    if let Some(s) = &b.slope {
                        if s.get_ref().len() != dim {
                            return Err(ctx.at(s.span(), "background.slope", format!("needs {dim} entries")));
                        }
                        slope[..dim].copy_from_slice(s.get_ref());
                    }
                    BackgroundSpec::ConformallyFlat {
                        slope,
                        offset: b.offset.unwrap_or(0.0),
                    }
                }
            }
        }
    };
    if background != BackgroundSpec::Flat && system != SystemName::PoissonCurved {
        let span = raw.background.as_ref().map(|b| b.span()).unwrap_or(0..0);
        return Err(ctx.at(span, "background", format!("system {} needs a flat background", system.as_str())));
    }

    let elasticity = match &raw.elasticity {
        Some(e) if system != SystemName::Elasticity => {
            return Err(ctx.at(e.span(), "elasticity", "only used by the elasticity system"));
        }
        Some(e) => (e.get_ref().lambda, e.get_ref().mu),
        None => (1.0, 1.0),
    };

    if system != SystemName::Puncture {
        if let Some(p) = raw.punctures.first() {
            return Err(ctx.at(p.span(), "punctures", "only used by the puncture system"));
        }
    } else {
        if dim != 3 {
            return Err(ctx.at(raw.system.span(), "system", "the puncture system is three-dimensional"));
        }
        if raw.punctures.is_empty() {
            return Err(ctx.at(raw.system.span(), "punctures", "the puncture system needs at least one [[punctures]] entry"));
        }
        for p in &raw.punctures {
            if !(p.get_ref().mass > 0.0) {
                return Err(ctx.at(p.span(), "punctures.mass", "must be positive"));
            }
        }
    }
    let punctures = raw
        .punctures
        .iter()
        .map(|p| {
            let p = p.get_ref();
            PunctureSpec {
                mass: p.mass,
                position: p.position,
                momentum: p.momentum,
                spin: p.spin,
            }
        })
        .collect();

    let solution = match &raw.solution {
        None => None,
        Some(s) => {
            let sv = s.get_ref();
            let field = match choice(&ctx, &sv.kind, "solution.kind", &[("sine-product", 0), ("waves", 1)])? {
                0 => {
                    if !sv.components.is_empty() {
                        return Err(ctx.at(s.span(), "solution.components", "not used by sine-product"));
                    }
                    FieldSpec::SineProduct
                }
                _ => {
                    if sv.components.is_empty() {
                        return Err(ctx.at(s.span(), "solution.components", "waves need at least one component"));
                    }
                    if let Some(c) = sv.components.iter().find(|c| c.waves.len() != dim) {
                        return Err(ctx.at(
                            s.span(),
                            "solution.components.waves",
                            format!("each component needs {dim} [wavenumber, phase] pairs, got {}", c.waves.len()),
                        ));
                    }
                    FieldSpec::Waves(
                        sv.components
                            .iter()
                            .map(|c| (c.amplitude, c.waves.iter().map(|w| (w[0], w[1])).collect()))
                            .collect(),
                    )
                }
            };
            let components = match &field {
                FieldSpec::SineProduct => 1,
                FieldSpec::Waves(c) => c.len(),
            };
            let expected = if system == SystemName::Elasticity { dim } else { 1 };
            if components != expected {
                return Err(ctx.at(
                    s.span(),
                    "solution",
                    format!("system {} needs {expected} solution components, got {components}", system.as_str()),
                ));
            }
            Some(SolutionSpec {
                field,
                manufacture_source: sv.manufacture_source.unwrap_or(true),
            })
        }
    };

    let tags = domain.boundary_tags();
    let mut boundary = BTreeMap::new();
    let mut default = None;
    for (tag, spec) in &raw.boundary {
        let name = tag.get_ref().as_str();
        let field = format!("boundary.{name}");
        if name != "default" && !tags.iter().any(|t| t == name) {
            return Err(ctx.at(
                tag.span(),
                &field,
                format!("unknown boundary tag, the domain has {}", tags.join(", ")),
            ));
        }
        let b = spec.get_ref();
        let kind = choice(
            &ctx,
            &b.kind,
            &format!("{field}.kind"),
            &[
                ("dirichlet", BcKindSpec::Dirichlet),
                ("neumann", BcKindSpec::Neumann),
                ("robin", BcKindSpec::Robin),
            ],
        )?;
        let data = match &b.data {
            Some(d) => choice(&ctx, d, &format!("{field}.data"), &[("analytic", BcData::Analytic), ("zero", BcData::Zero)])?,
            None if solution.is_some() => BcData::Analytic,
            None => BcData::Zero,
        };
        if data == BcData::Analytic && solution.is_none() {
            return Err(ctx.at(spec.span(), &format!("{field}.data"), "analytic data needs a [solution] section"));
        }
        let (a, bb) = match kind {
            BcKindSpec::Robin => {
                let a = b.a.ok_or_else(|| ctx.at(spec.span(), &format!("{field}.a"), "required for robin"))?;
                let bb = b.b.ok_or_else(|| ctx.at(spec.span(), &format!("{field}.b"), "required for robin"))?;
                if a == 0.0 && bb == 0.0 {
                    return Err(ctx.at(spec.span(), &field, "robin coefficients a and b cannot both vanish"));
                }
                (a, bb)
            }
            _ => {
                if b.a.is_some() || b.b.is_some() {
                    return Err(ctx.at(spec.span(), &field, "coefficients a and b are only used by robin"));
                }
                (0.0, 0.0)
            }
        };
        let bc = BoundarySpec { kind, data, a, b: bb };
        if name == "default" {
            default = Some(bc);
        } else {
            boundary.insert(name.to_string(), bc);
        }
    }
    for tag in &tags {
        if !boundary.contains_key(tag) {
            let bc = default.ok_or_else(|| {
                missing(&format!("boundary.{tag}"), "no condition for this tag and no [boundary.default]")
            })?;
            boundary.insert(tag.clone(), bc);
        }
    }

    let mut operator = OperatorSpec {
        penalty: 1.0,
        strong_weak: false,
        massive: true,
    };
    if let Some(o) = &raw.operator {
        let o = o.get_ref();
        if let Some(p) = &o.penalty {
            if *p.get_ref() < 1.0 || !p.get_ref().is_finite() {
                return Err(ctx.at(p.span(), "operator.penalty", format!("must be at least 1, got {}", p.get_ref())));
            }
            operator.penalty = *p.get_ref();
        }
        if let Some(f) = &o.form {
            operator.strong_weak = choice(&ctx, f, "operator.form", &[("strong", false), ("strong-weak", true)])?;
        }
        if let Some(m) = o.massive {
            operator.massive = m;
        }
    }

    let mut solver = SolverSpec {
        method: Method::Gmres,
        tol: 1e-10,
        max_iter: 5000,
        restart: 50,
        preconditioner: Precond::Identity,
    };
    if let Some(s) = &raw.solver {
        let s = s.get_ref();
        if let Some(m) = &s.method {
            solver.method = choice(&ctx, m, "solver.method", &[("gmres", Method::Gmres), ("cg", Method::Cg)])?;
        }
        if let Some(t) = &s.tol {
            solver.tol = positive(&ctx, t, "solver.tol")?;
        }
        if let Some(m) = &s.max_iter {
            solver.max_iter = at_least(&ctx, m, "solver.max_iter", 1)?;
        }
        if let Some(r) = &s.restart {
            solver.restart = at_least(&ctx, r, "solver.restart", 1)?;
        }
        if let Some(p) = &s.preconditioner {
            solver.preconditioner = choice(
                &ctx,
                p,
                "solver.preconditioner",
                &[("identity", Precond::Identity), ("block-jacobi", Precond::BlockJacobi)],
            )?;
        }
        if solver.method == Method::Cg {
            let span = s.method.as_ref().map(|m| m.span()).unwrap_or(0..0);
            if !operator.strong_weak {
                return Err(ctx.at(span, "solver.method", "cg needs operator.form = \"strong-weak\""));
            }
            if system == SystemName::Puncture {
                return Err(ctx.at(span, "solver.method", "cg needs a symmetric linear system"));
            }
        }
    }

    let (mut newton_tol, mut newton_max_iter) = (1e-10, 20);
    if let Some(n) = &raw.newton {
        if system != SystemName::Puncture {
            return Err(ctx.at(n.span(), "newton", "only used by the nonlinear puncture system"));
        }
        let n = n.get_ref();
        if let Some(t) = &n.tol {
            newton_tol = positive(&ctx, t, "newton.tol")?;
        }
        if let Some(m) = &n.max_iter {
            newton_max_iter = at_least(&ctx, m, "newton.max_iter", 1)?;
        }
    }

    let cap = raw.assembly.as_ref().and_then(|a| a.cap).unwrap_or(DEFAULT_ASSEMBLY_CAP);
    let output = raw.output.unwrap_or(RawOutput {
        directory: None,
        prefix: None,
    });
    let prefix = output.prefix.unwrap_or_else(|| "run".into());
    if prefix.is_empty() || prefix.contains(['/', '\\']) {
        return Err(missing("output.prefix", "must be a non-empty file name prefix"));
    }

    Ok(RunConfig {
        system,
        domain,
        levels: raw.refinement.get_ref().levels.get_ref().clone(),
        degrees: raw.refinement.get_ref().degrees.get_ref().clone(),
        background,
        elasticity,
        punctures,
        boundary,
        operator,
        solver,
        newton_tol,
        newton_max_iter,
        solution,
        cap,
        output_dir: output.directory.unwrap_or_else(|| PathBuf::from("output")),
        prefix,
    })
}
