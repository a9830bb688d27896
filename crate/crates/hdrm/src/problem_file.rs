//! Sectioned `key = value` problem files.
//!
//! ```text
//! [domain]
//! rectangle = 0 0 1 1
//!
//! [operator]
//! source = manufactured
//!
//! [exact]
//! solution = sinsin 1 1
//!
//! [boundary]
//! segment.0 = dirichlet exact
//! segment.1 = power 1 4 exact
//! segment.2 = neumann constant 0
//! segment.3 = dirichlet linear 0 1 0
//! ```
//!
//! Every key other than the domain and the boundary conditions has a
//! default; [`ProblemFile::to_text`] writes all of them out. Parsing
//! reports every problem it finds, each with its line number.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hdrm_core::baselines::RelaxationScheme;
use hdrm_core::field::ScalarField;
use hdrm_core::hybrid::HdrmConfig;
use hdrm_core::newton::{JacobianMode, KrylovMethod};
use hdrm_core::problem::{BcData, BoundaryCondition, Diffusion, Domain, NonlinearBc, PowerLaw, Reaction, Source};
use hdrm_core::ProblemSpec;

use crate::driver::Method;
use crate::error::{DriverError, Issue, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    /// Uniform triangulation of the rectangle domain.
    Structured { nx: usize, ny: usize },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub spec: ProblemSpec,
    pub mesh: MeshSource,
    pub methods: Vec<Method>,
    /// Iteration budget of the Gauss-Seidel and dynamic relaxation runs.
    pub budget: usize,
    pub relaxation: RelaxationScheme,
    pub config: HdrmConfig,
}

const SECTIONS: [&str; 8] = ["domain", "mesh", "operator", "exact", "boundary", "methods", "solver", "adapt"];
const DEFAULT_MESH: usize = 16;
const DEFAULT_BUDGET: usize = 1000;

struct Entry {
    value: String,
    line: usize,
}

type Parsed<T> = std::result::Result<T, String>;

struct Reader {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
    issues: Vec<Issue>,
}

impl Reader {
    fn new(text: &str) -> Reader {
        let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut issues = Vec::new();
        // Outer `None`: no section header yet. Inner `None`: an unknown section.
        let mut current: Option<Option<String>> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                let name = name.trim();
                if SECTIONS.contains(&name) {
                    current = Some(Some(name.to_string()));
                } else {
                    issues.push(Issue::at(line, format!("unknown section [{name}]")));
                    current = Some(None);
                }
                continue;
            }
            let Some((key, value)) = t.split_once('=') else {
                issues.push(Issue::at(line, format!("expected `key = value`, found `{t}`")));
                continue;
            };
            let key = key.trim().to_string();
            let section = match &current {
                None => {
                    issues.push(Issue::at(line, format!("`{key}` appears before any section")));
                    continue;
                }
                Some(None) => continue,
                Some(Some(s)) => s,
            };
            let map = sections.entry(section.clone()).or_default();
            if let Some(prev) = map.get(&key) {
                issues.push(Issue::at(line, format!("duplicate key `{key}` in [{section}] (first on line {})", prev.line)));
                continue;
            }
            map.insert(key, Entry { value: value.trim().to_string(), line });
        }
        Reader { sections, issues }
    }

    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.sections.get_mut(section).and_then(|m| m.remove(key))
    }

    fn get<T>(&mut self, section: &str, key: &str, default: T, parse: impl Fn(&str) -> Parsed<T>) -> T {
        self.get_opt(section, key, parse).unwrap_or(default)
    }

    fn get_opt<T>(&mut self, section: &str, key: &str, parse: impl Fn(&str) -> Parsed<T>) -> Option<T> {
        let e = self.take(section, key)?;
        match parse(&e.value) {
            Ok(v) => Some(v),
            Err(msg) => {
                self.issues.push(Issue::at(e.line, format!("[{section}] {key}: {msg}")));
                None
            }
        }
    }

    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        self.sections.get(section).and_then(|m| m.get(key)).map(|e| e.line)
    }

    fn report_leftovers(&mut self) {
        for (section, map) in &self.sections {
            for (key, e) in map {
                self.issues.push(Issue::at(e.line, format!("unknown key `{key}` in [{section}]")));
            }
        }
    }
}

fn number(s: &str) -> Parsed<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("malformed number `{s}`")),
    }
}

fn count(s: &str) -> Parsed<usize> {
    s.parse::<usize>().map_err(|_| format!("expected a non-negative integer, found `{s}`"))
}

fn numbers(parts: &[&str], n: usize, what: &str) -> Parsed<Vec<f64>> {
    if parts.len() != n {
        return Err(format!("{what} takes {n} numbers, found {}", parts.len()));
    }
    parts.iter().map(|p| number(p)).collect()
}

fn field(s: &str) -> Parsed<ScalarField> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    let Some((&name, args)) = parts.split_first() else {
        return Err("missing field".into());
    };
    Ok(match name {
        "constant" => ScalarField::Constant(numbers(args, 1, name)?[0]),
        "linear" => {
            let v = numbers(args, 3, name)?;
            ScalarField::Linear { a: v[0], b: v[1], c: v[2] }
        }
        "quadratic" => {
            let v = numbers(args, 6, name)?;
            ScalarField::Quadratic([v[0], v[1], v[2], v[3], v[4], v[5]])
        }
        "sinsin" => {
            let v = numbers(args, 2, name)?;
            ScalarField::SinSin { amplitude: v[0], frequency: v[1] }
        }
        "gaussian" => {
            let v = numbers(args, 5, name)?;
            ScalarField::Gaussian { amplitude: v[0], x0: v[1], y0: v[2], width: v[3], offset: v[4] }
        }
        _ => return Err(format!("unknown field `{name}`")),
    })
}

fn field_text(f: &ScalarField) -> String {
    match *f {
        ScalarField::Constant(c) => format!("constant {c:?}"),
        ScalarField::Linear { a, b, c } => format!("linear {a:?} {b:?} {c:?}"),
        ScalarField::Quadratic(c) => format!("quadratic {:?} {:?} {:?} {:?} {:?} {:?}", c[0], c[1], c[2], c[3], c[4], c[5]),
        ScalarField::SinSin { amplitude, frequency } => format!("sinsin {amplitude:?} {frequency:?}"),
        ScalarField::Gaussian { amplitude, x0, y0, width, offset } => {
            format!("gaussian {amplitude:?} {x0:?} {y0:?} {width:?} {offset:?}")
        }
    }
}

fn bc_data(s: &str) -> Parsed<BcData> {
    if s.trim() == "exact" {
        Ok(BcData::Exact)
    } else {
        field(s).map(BcData::Field)
    }
}

fn bc_data_text(d: &BcData) -> String {
    match d {
        BcData::Exact => "exact".into(),
        BcData::Field(f) => field_text(f),
    }
}

fn condition(s: &str) -> Parsed<BoundaryCondition> {
    let s = s.trim();
    let (kind, rest) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
    match kind {
        "dirichlet" => bc_data(rest).map(BoundaryCondition::Dirichlet),
        "neumann" => bc_data(rest).map(BoundaryCondition::Neumann),
        "power" => {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() < 3 {
                return Err("power takes a coefficient, an exponent and a target".into());
            }
            let law = PowerLaw { coefficient: number(parts[0])?, exponent: number(parts[1])? };
            let target = bc_data(&parts[2..].join(" "))?;
            Ok(BoundaryCondition::Nonlinear(NonlinearBc { law, target }))
        }
        _ => Err(format!("unknown condition `{kind}` (expected dirichlet, neumann or power)")),
    }
}

fn condition_text(bc: &BoundaryCondition) -> String {
    match bc {
        BoundaryCondition::Dirichlet(d) => format!("dirichlet {}", bc_data_text(d)),
        BoundaryCondition::Neumann(d) => format!("neumann {}", bc_data_text(d)),
        BoundaryCondition::Nonlinear(nl) => format!(
            "power {:?} {:?} {}",
            nl.law.coefficient,
            nl.law.exponent,
            bc_data_text(&nl.target)
        ),
    }
}

fn diffusion(s: &str) -> Parsed<Diffusion> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    match parts.split_first() {
        Some((&"identity", [])) => Ok(Diffusion::Identity),
        Some((&"tensor", args)) => {
            let v = numbers(args, 4, "tensor")?;
            Ok(Diffusion::Tensor([[v[0], v[1]], [v[2], v[3]]]))
        }
        Some((&"conductivity", args)) => {
            let v = numbers(args, 2, "conductivity")?;
            Ok(Diffusion::Conductivity { k0: v[0], beta: v[1] })
        }
        _ => Err(format!("expected identity, tensor a11 a12 a21 a22 or conductivity k0 beta, found `{s}`")),
    }
}

fn diffusion_text(d: &Diffusion) -> String {
    match *d {
        Diffusion::Identity => "identity".into(),
        Diffusion::Tensor(a) => format!("tensor {:?} {:?} {:?} {:?}", a[0][0], a[0][1], a[1][0], a[1][1]),
        Diffusion::Conductivity { k0, beta } => format!("conductivity {k0:?} {beta:?}"),
    }
}

fn reaction(s: &str) -> Parsed<Reaction> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    match parts.split_first() {
        Some((&"none", [])) => Ok(Reaction::None),
        Some((&"linear", args)) => {
            let v = numbers(args, 2, "linear")?;
            Ok(Reaction::Linear { c0: v[0], c1: v[1] })
        }
        Some((&"power", args)) => {
            let v = numbers(args, 2, "power")?;
            Ok(Reaction::Power { coefficient: v[0], exponent: v[1] })
        }
        _ => Err(format!("expected none, linear c0 c1 or power coefficient exponent, found `{s}`")),
    }
}

fn reaction_text(r: &Reaction) -> String {
    match *r {
        Reaction::None => "none".into(),
        Reaction::Linear { c0, c1 } => format!("linear {c0:?} {c1:?}"),
        Reaction::Power { coefficient, exponent } => format!("power {coefficient:?} {exponent:?}"),
    }
}

fn source(s: &str) -> Parsed<Source> {
    if s.trim() == "manufactured" {
        Ok(Source::Manufactured)
    } else {
        field(s).map(Source::Field)
    }
}

fn pair(s: &str) -> Parsed<[f64; 2]> {
    let v = numbers(&s.split_whitespace().collect::<Vec<_>>(), 2, "a vector")?;
    Ok([v[0], v[1]])
}

fn krylov(s: &str) -> Parsed<KrylovMethod> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    match parts.as_slice() {
        ["bicgstab"] => Ok(KrylovMethod::Bicgstab),
        ["gmres", m] => Ok(KrylovMethod::Gmres { restart: count(m)? }),
        _ => Err(format!("expected `gmres <restart>` or `bicgstab`, found `{s}`")),
    }
}

fn jacobian(s: &str) -> Parsed<JacobianMode> {
    match s {
        "analytic" => Ok(JacobianMode::Analytic),
        "finite_difference" => Ok(JacobianMode::FiniteDifference),
        _ => Err(format!("expected analytic or finite_difference, found `{s}`")),
    }
}

fn relaxation(s: &str) -> Parsed<RelaxationScheme> {
    match s {
        "first_order" => Ok(RelaxationScheme::FirstOrder),
        "second_order" => Ok(RelaxationScheme::SecondOrder),
        _ => Err(format!("expected first_order or second_order, found `{s}`")),
    }
}

fn optional(s: &str, auto: &str) -> Parsed<Option<f64>> {
    if s == auto {
        Ok(None)
    } else {
        number(s).map(Some)
    }
}

fn methods(s: &str) -> Parsed<Vec<Method>> {
    s.split_whitespace().map(|m| m.parse::<Method>()).collect()
}

impl ProblemFile {
    /// Parses problem text. Relative mesh paths are kept as written.
    pub fn parse(text: &str) -> Result<ProblemFile> {
        let mut r = Reader::new(text);

        let rect_line = r.line_of("domain", "rectangle");
        let rect = r.get_opt("domain", "rectangle", |s| {
            let v = numbers(&s.split_whitespace().collect::<Vec<_>>(), 4, "rectangle")?;
            Ok([v[0], v[1], v[2], v[3]])
        });
        let poly = r.get_opt("domain", "polygon", |s| {
            let v: Vec<f64> = s.split_whitespace().map(number).collect::<Parsed<_>>()?;
            if v.len() % 2 != 0 {
                return Err("polygon needs an even number of coordinates".into());
            }
            Ok(v.chunks(2).map(|c| [c[0], c[1]]).collect::<Vec<_>>())
        });
        let domain = match (rect, poly) {
            (Some(_), Some(_)) => {
                r.issues.push(Issue::at(rect_line.unwrap_or(0), "give either rectangle or polygon, not both"));
                None
            }
            (Some(c), None) => Some(Domain::Rectangle(c)),
            (None, Some(v)) => Some(Domain::Polygon(v)),
            (None, None) => {
                if !r.issues.iter().any(|i| i.message.contains("[domain]")) {
                    r.issues.push(Issue::general("missing [domain] rectangle or polygon"));
                }
                None
            }
        };

        let file = r.get_opt("mesh", "file", |s| Ok(PathBuf::from(s)));
        let nx = r.get_opt("mesh", "nx", count);
        let ny = r.get_opt("mesh", "ny", count);
        let mesh = match file {
            Some(p) => {
                if nx.is_some() || ny.is_some() {
                    r.issues.push(Issue::general("[mesh] takes either file or nx/ny, not both"));
                }
                MeshSource::File(p)
            }
            None => MeshSource::Structured {
                nx: nx.unwrap_or(DEFAULT_MESH),
                ny: ny.unwrap_or(DEFAULT_MESH),
            },
        };

        let diffusion = r.get("operator", "diffusion", Diffusion::Identity, diffusion);
        let advection = r.get("operator", "advection", [0.0, 0.0], pair);
        let reaction = r.get("operator", "reaction", Reaction::None, reaction);
        let source = r.get("operator", "source", Source::Field(ScalarField::Constant(0.0)), source);
        let exact = r.get_opt("exact", "solution", field);

        let mut boundary = BTreeMap::new();
        let keys: Vec<String> = r.sections.get("boundary").map(|m| m.keys().cloned().collect()).unwrap_or_default();
        for key in keys {
            let Some(index) = key.strip_prefix("segment.").and_then(|i| i.parse::<u32>().ok()) else {
                continue;
            };
            if let Some(bc) = r.get_opt("boundary", &key, condition) {
                boundary.insert(index, bc);
            }
        }

        let methods = r.get("methods", "run", vec![Method::Hdrm], methods);

        let mut config = HdrmConfig::default();
        let budget = r.get("solver", "budget", DEFAULT_BUDGET, count);
        let relaxation = r.get("solver", "relaxation", RelaxationScheme::default(), relaxation);
        {
            let n = &mut config.hybrid.newton;
            n.tol_residual = r.get("solver", "newton_tol", n.tol_residual, number);
            n.tol_step = r.get("solver", "newton_step_tol", n.tol_step, number);
            n.max_iter = r.get("solver", "newton_max_iter", n.max_iter, count);
            n.jacobian_mode = r.get("solver", "jacobian", n.jacobian_mode, jacobian);
            n.fd_step = r.get("solver", "fd_step", n.fd_step, |s| optional(s, "auto"));
            n.damping = r.get("solver", "damping", n.damping, number);
            n.krylov = r.get("solver", "krylov", n.krylov, krylov);
            n.inner_tol = r.get("solver", "inner_tol", n.inner_tol, number);
            n.inner_max_iter = r.get("solver", "inner_max_iter", n.inner_max_iter, count);
        }
        {
            let h = &mut config.hybrid;
            h.coupling_tol = r.get("solver", "coupling_tol", h.coupling_tol, number);
            h.max_sweeps = r.get("solver", "max_sweeps", h.max_sweeps, count);
            h.overlap = r.get("solver", "overlap", h.overlap, count);
            h.drm_tol = r.get("solver", "drm_tol", h.drm_tol, number);
            h.drm_max_iter = r.get("solver", "drm_max_iter", h.drm_max_iter, count);
            h.boundary_subdivision = r.get("solver", "boundary_subdivision", h.boundary_subdivision, count);
        }
        {
            let a = &mut config.refine;
            a.epsilon = r.get("adapt", "epsilon", a.epsilon, number);
            a.delta = r.get("adapt", "delta", a.delta, number);
            a.max_generations = r.get("adapt", "max_generations", a.max_generations, count);
            a.marking_fraction = r.get("adapt", "marking_fraction", a.marking_fraction, |s| optional(s, "none"));
        }
        config.fem_threshold = r.get("adapt", "fem_threshold", config.fem_threshold, number);
        r.report_leftovers();

        let mut issues = r.issues;
        let Some(domain) = domain else {
            return Err(DriverError::Validation(issues));
        };
        let spec = ProblemSpec {
            domain,
            diffusion,
            advection,
            reaction,
            source,
            boundary,
            exact,
        };
        if let Err(errs) = spec.validate() {
            issues.extend(errs.into_iter().map(Issue::general));
        }
        if matches!(mesh, MeshSource::Structured { .. }) && !matches!(spec.domain, Domain::Rectangle(_)) {
            issues.push(Issue::general("a structured mesh needs a rectangle domain; give [mesh] file for polygons"));
        }
        if let MeshSource::Structured { nx, ny } = mesh {
            if nx == 0 || ny == 0 {
                issues.push(Issue::general("[mesh] nx and ny must be at least 1"));
            }
        }
        if budget == 0 {
            issues.push(Issue::general("[solver] budget must be at least 1"));
        }
        let h = &config.hybrid;
        let checks = [
            config.refine.validate().err().map(|e| e.to_string()),
            h.newton.validate().err().map(|e| e.to_string()),
            (h.overlap == 0).then(|| "[solver] overlap must be at least 1".to_string()),
            (h.max_sweeps == 0).then(|| "[solver] max_sweeps must be at least 1".to_string()),
            (h.boundary_subdivision == 0).then(|| "[solver] boundary_subdivision must be at least 1".to_string()),
            (!(h.coupling_tol > 0.0)).then(|| "[solver] coupling_tol must be positive".to_string()),
            (!(h.drm_tol > 0.0)).then(|| "[solver] drm_tol must be positive".to_string()),
        ];
        issues.extend(checks.into_iter().flatten().map(Issue::general));

        if issues.is_empty() {
            Ok(ProblemFile {
                spec,
                mesh,
                methods,
                budget,
                relaxation,
                config,
            })
        } else {
            Err(DriverError::Validation(issues))
        }
    }

    /// Reads and parses `path`; a relative mesh path is resolved against
    /// the directory holding the problem file.
    pub fn read(path: &Path) -> Result<ProblemFile> {
        let text = std::fs::read_to_string(path).map_err(|e| DriverError::io(path, e))?;
        let mut pf = ProblemFile::parse(&text)?;
        if let MeshSource::File(p) = &pf.mesh {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                pf.mesh = MeshSource::File(base.join(p));
            }
        }
        Ok(pf)
    }

    /// Full text form with every setting spelled out.
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let spec = &self.spec;
        let _ = writeln!(o, "[domain]");
        match &spec.domain {
            Domain::Rectangle([x0, y0, x1, y1]) => {
                let _ = writeln!(o, "rectangle = {x0:?} {y0:?} {x1:?} {y1:?}");
            }
            Domain::Polygon(v) => {
                let coords: Vec<String> = v.iter().map(|p| format!("{:?} {:?}", p[0], p[1])).collect();
                let _ = writeln!(o, "polygon = {}", coords.join(" "));
            }
        }
        let _ = writeln!(o, "\n[mesh]");
        match &self.mesh {
            MeshSource::Structured { nx, ny } => {
                let _ = writeln!(o, "nx = {nx}\nny = {ny}");
            }
            MeshSource::File(p) => {
                let _ = writeln!(o, "file = {}", p.display());
            }
        }
        let _ = writeln!(o, "\n[operator]");
        let _ = writeln!(o, "diffusion = {}", diffusion_text(&spec.diffusion));
        let _ = writeln!(o, "advection = {:?} {:?}", spec.advection[0], spec.advection[1]);
        let _ = writeln!(o, "reaction = {}", reaction_text(&spec.reaction));
        let source = match &spec.source {
            Source::Manufactured => "manufactured".to_string(),
            Source::Field(f) => field_text(f),
        };
        let _ = writeln!(o, "source = {source}");
        if let Some(e) = &spec.exact {
            let _ = writeln!(o, "\n[exact]\nsolution = {}", field_text(e));
        }
        let _ = writeln!(o, "\n[boundary]");
        for (m, bc) in &spec.boundary {
            let _ = writeln!(o, "segment.{m} = {}", condition_text(bc));
        }
        let names: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        let _ = writeln!(o, "\n[methods]\nrun = {}", names.join(" "));

        let h = &self.config.hybrid;
        let n = &h.newton;
        let _ = writeln!(o, "\n[solver]");
        let _ = writeln!(o, "budget = {}", self.budget);
        let _ = writeln!(
            o,
            "relaxation = {}",
            match self.relaxation {
                RelaxationScheme::FirstOrder => "first_order",
                RelaxationScheme::SecondOrder => "second_order",
            }
        );
        let _ = writeln!(o, "newton_tol = {:?}", n.tol_residual);
        let _ = writeln!(o, "newton_step_tol = {:?}", n.tol_step);
        let _ = writeln!(o, "newton_max_iter = {}", n.max_iter);
        let _ = writeln!(
            o,
            "jacobian = {}",
            match n.jacobian_mode {
                JacobianMode::Analytic => "analytic",
                JacobianMode::FiniteDifference => "finite_difference",
            }
        );
        let _ = writeln!(o, "fd_step = {}", n.fd_step.map_or("auto".to_string(), |v| format!("{v:?}")));
        let _ = writeln!(o, "damping = {:?}", n.damping);
        let _ = writeln!(
            o,
            "krylov = {}",
            match n.krylov {
                KrylovMethod::Gmres { restart } => format!("gmres {restart}"),
                KrylovMethod::Bicgstab => "bicgstab".to_string(),
            }
        );
        let _ = writeln!(o, "inner_tol = {:?}", n.inner_tol);
        let _ = writeln!(o, "inner_max_iter = {}", n.inner_max_iter);
        let _ = writeln!(o, "coupling_tol = {:?}", h.coupling_tol);
        let _ = writeln!(o, "max_sweeps = {}", h.max_sweeps);
        let _ = writeln!(o, "overlap = {}", h.overlap);
        let _ = writeln!(o, "drm_tol = {:?}", h.drm_tol);
        let _ = writeln!(o, "drm_max_iter = {}", h.drm_max_iter);
        let _ = writeln!(o, "boundary_subdivision = {}", h.boundary_subdivision);

        let a = &self.config.refine;
        let _ = writeln!(o, "\n[adapt]");
        let _ = writeln!(o, "epsilon = {:?}", a.epsilon);
        let _ = writeln!(o, "delta = {:?}", a.delta);
        let _ = writeln!(o, "max_generations = {}", a.max_generations);
        let _ = writeln!(
            o,
            "marking_fraction = {}",
            a.marking_fraction.map_or("none".to_string(), |v| format!("{v:?}"))
        );
        let _ = writeln!(o, "fem_threshold = {:?}", self.config.fem_threshold);
        o
    }
}
