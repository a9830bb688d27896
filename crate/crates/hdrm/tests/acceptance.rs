//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a nonzero status if any criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hdrm::core::adapt::{adaptive_solve, error_function, fem_generation, AdaptStop, RefinementConfig};
use hdrm::core::baselines::DeltaTable;
use hdrm::core::drm::{assemble_hg, drm_solve, interior_grid, BoundaryDiscretization};
use hdrm::core::fem::{solve_linear, FemProblem};
use hdrm::core::field::ScalarField;
use hdrm::core::hybrid::{hybrid_solve, HybridConfig, HybridMode, RegionPartition};
use hdrm::core::linalg::{
    bicgstab, dense_solve, gauss_seidel, gmres, l2_norm, norm2, DenseMatrix, LinearOperator, SparseMatrix,
};
use hdrm::core::newton::{
    jacobian, newton_krylov_solve, JacobianMode, KrylovMethod, NewtonConfig, NonlinearProblem,
};
use hdrm::core::problem::{BcData, BoundaryCondition, NonlinearBc, PowerLaw, Source};
use hdrm::core::{Mesh, ProblemSpec};
use hdrm::{compare_methods, Method, ProblemFile};

const UNIT: [f64; 4] = [0.0, 0.0, 1.0, 1.0];

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn benchmark_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks/heat_radiation.problem")
}

fn benchmark() -> ProblemFile {
    ProblemFile::read(&benchmark_path()).expect("shipped benchmark parses")
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn nodal_error(mesh: &Mesh, u: &[f64], exact: ScalarField) -> f64 {
    mesh.nodes().iter().map(|n| (u[n.id] - exact.value(n.x, n.y)).abs()).fold(0.0, f64::max)
}

fn bisect_root(h: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64.max(h));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid.powf(p) < h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn ordering_and_delta() -> Outcome {
    let reference_errors = [
        ("hdrm", 0.0001),
        ("gauss_seidel", 0.001),
        ("dynamic_relaxation", 0.0005),
        ("dual_reciprocity", 0.0003),
    ];
    let reference_deltas = [
        ("hdrm", "gauss_seidel", 0.0009),
        ("hdrm", "dynamic_relaxation", 0.0004),
        ("hdrm", "dual_reciprocity", 0.0002),
        ("gauss_seidel", "dynamic_relaxation", 0.0005),
        ("gauss_seidel", "dual_reciprocity", 0.0007),
        ("dynamic_relaxation", "dual_reciprocity", 0.0002),
    ];
    let reference = DeltaTable::new(reference_errors.iter().map(|(m, e)| (m.to_string(), *e)));
    ensure(reference.pairs().len() == 6, || "expected six pairs".into())?;
    for (a, b, want) in reference_deltas {
        let got = reference.by_name(a, b).ok_or(format!("missing pair {a}/{b}"))?;
        ensure((got - want).abs() < 1e-15, || format!("delta {a}/{b}: {got} vs {want}"))?;
    }

    let pf = benchmark();
    let mesh = hdrm::driver::build_mesh(&pf).map_err(|e| e.to_string())?;
    ensure(pf.budget <= 100_000, || format!("budget {}", pf.budget))?;
    let start = Instant::now();
    let report = compare_methods(&pf).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let err = |m: Method| -> Result<f64, String> {
        report
            .reports
            .iter()
            .find(|r| r.method == m)
            .and_then(|r| r.final_error)
            .ok_or(format!("no error for {m}"))
    };
    let (h, dr, dy, gs) = (
        err(Method::Hdrm)?,
        err(Method::DualReciprocity)?,
        err(Method::DynamicRelaxation)?,
        err(Method::GaussSeidel)?,
    );
    ensure(h < dr && dr < dy && dy < gs, || {
        format!("ordering violated: hdrm {h:e}, dual_reciprocity {dr:e}, dynamic_relaxation {dy:e}, gauss_seidel {gs:e}")
    })?;
    ensure(secs < 60.0, || format!("benchmark took {secs:.1} s"))?;
    for (i, j, d) in report.delta.pairs() {
        let (a, b) = (report.reports[i].final_error.unwrap(), report.reports[j].final_error.unwrap());
        ensure(d == (a - b).abs(), || format!("benchmark delta {i}/{j}"))?;
    }
    Ok(format!(
        "six reference deltas exact; {} nodes, budget {}: hdrm {h:.3e} < dual_reciprocity {dr:.3e} < dynamic_relaxation {dy:.3e} < gauss_seidel {gs:.3e} in {secs:.1} s",
        mesh.num_nodes(),
        pf.budget
    ))
}

fn manufactured_order() -> Outcome {
    let start = Instant::now();
    let exact = ScalarField::SinSin { amplitude: 1.0, frequency: 1.0 };
    let spec = ProblemSpec::manufactured_poisson(UNIT, exact);
    let mut errors = Vec::new();
    for n in [8, 16, 32] {
        let mesh = Mesh::unit_square(n).map_err(|e| e.to_string())?;
        let u = solve_linear(&mesh, &spec).map_err(|e| e.to_string())?;
        let e: Vec<f64> = mesh.nodes().iter().map(|p| u[p.id] - exact.value(p.x, p.y)).collect();
        errors.push(l2_norm(&mesh, &e).map_err(|e| e.to_string())?);
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    for p in &orders {
        ensure((1.8..=2.2).contains(p), || format!("observed order {p:.3}, errors {errors:?}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("orders {:.3}, {:.3} in {secs:.2} s", orders[0], orders[1]))
}

fn patch_meshes() -> Result<Vec<(String, Mesh, [f64; 4])>, String> {
    let e = |r: hdrm::core::Result<Mesh>| r.map_err(|e| e.to_string());
    let mut out = Vec::new();
    for (nx, ny, corners) in [
        (1, 1, UNIT),
        (3, 5, UNIT),
        (10, 2, [0.0, 0.0, 5.0, 0.5]),
        (2, 9, [-1.0, 2.0, -0.8, 4.0]),
        (7, 7, [0.0, 0.0, 1.0, 1.0]),
    ] {
        out.push((format!("{nx}x{ny} on {corners:?}"), e(Mesh::rectangle(nx, ny, corners))?, corners));
    }
    let mut refined = e(Mesh::rectangle(4, 3, UNIT))?;
    for round in 0..3 {
        let marked: BTreeSet<usize> = refined.elements().iter().filter(|el| el.id % 3 == round).map(|el| el.id).collect();
        refined = e(refined.refine(&marked))?;
    }
    out.push(("locally refined 4x3".into(), refined.clone(), UNIT));
    let corner = e(Mesh::unit_square(6))?;
    let marked: BTreeSet<usize> = corner
        .elements()
        .iter()
        .filter(|el| {
            let c = corner.centroid(el.id);
            c[0] + c[1] < 0.5
        })
        .map(|el| el.id)
        .collect();
    let corner = e(corner.refine(&marked))?;
    out.push(("corner-refined 6x6".into(), corner, UNIT));
    let text = hdrm::mesh_io::mesh_to_string(&refined);
    let reread = hdrm::mesh_io::parse_mesh(&text).map_err(|e| e.to_string())?;
    out.push(("refined mesh read back from text".into(), reread, UNIT));
    Ok(out)
}

fn patch_test() -> Outcome {
    let fields = [
        ScalarField::Linear { a: 0.3, b: -1.2, c: 2.0 },
        ScalarField::Linear { a: -4.0, b: 0.0, c: 0.5 },
        ScalarField::Linear { a: 1e3, b: 7.5, c: -2.25 },
        ScalarField::Constant(3.0),
    ];
    let meshes = patch_meshes()?;
    let newton = NewtonConfig { krylov: KrylovMethod::Bicgstab, ..Default::default() };
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (name, mesh, corners) in &meshes {
        for exact in fields {
            let mut specs = vec![ProblemSpec::manufactured_poisson(*corners, exact)];
            let mut mixed = ProblemSpec::manufactured_poisson(*corners, exact);
            mixed.boundary.insert(1, BoundaryCondition::Neumann(BcData::Exact));
            mixed.boundary.insert(2, BoundaryCondition::Neumann(BcData::Exact));
            specs.push(mixed);
            for spec in &specs {
                let scale = 1.0 + mesh.nodes().iter().map(|n| exact.value(n.x, n.y).abs()).fold(0.0, f64::max);
                let direct = solve_linear(mesh, spec).map_err(|e| format!("{name}: {e}"))?;
                let fp = FemProblem::new(mesh, spec).map_err(|e| format!("{name}: {e}"))?;
                let nk = newton_krylov_solve(&fp, &fp.initial_guess(), &newton).map_err(|e| format!("{name}: {e}"))?;
                for (pipeline, u) in [("direct", &direct), ("newton", &nk.u)] {
                    let err = nodal_error(mesh, u, exact) / scale;
                    worst = worst.max(err);
                    ensure(err < 1e-10, || format!("{name}, {exact:?}, {pipeline}: nodal error {err:e}"))?;
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("{cases} solves on {} meshes, worst scaled nodal error {worst:.2e}", meshes.len()))
}

fn drm_verification() -> Outcome {
    let exact = ScalarField::Linear { a: 0.0, b: 1.0, c: 0.0 };
    let spec = ProblemSpec::manufactured_poisson(UNIT, exact);
    let internal = interior_grid(UNIT, 3);
    let interior_error = |per_side: usize| -> Result<f64, String> {
        let b = BoundaryDiscretization::rectangle(UNIT, per_side).map_err(|e| e.to_string())?;
        let sol = drm_solve(&spec, &b, &internal).map_err(|e| e.to_string())?;
        Ok(internal
            .iter()
            .zip(sol.internal_u(b.len()))
            .map(|(q, u)| (u - exact.value(q[0], q[1])).abs())
            .fold(0.0, f64::max))
    };
    let (e32, e64) = (interior_error(8)?, interior_error(16)?);
    ensure(e32 < 1e-2, || format!("32 elements: {e32:e}"))?;
    ensure(e64 < e32, || format!("64 elements: {e64:e} not below {e32:e}"))?;

    let mut discretizations: Vec<(String, BoundaryDiscretization, Vec<[f64; 2]>)> = Vec::new();
    for n in [1, 3, 8, 16] {
        let b = BoundaryDiscretization::rectangle(UNIT, n).map_err(|e| e.to_string())?;
        discretizations.push((format!("square, {n} per side"), b, internal.clone()));
    }
    let kite = [[0.0, 0.0], [2.0, 0.0], [1.5, 1.0], [0.0, 1.5]];
    let b = BoundaryDiscretization::from_polygon(&kite, 5).map_err(|e| e.to_string())?;
    discretizations.push(("quadrilateral".into(), b, vec![[0.5, 0.5], [1.0, 0.4]]));
    let mesh = Mesh::unit_square(8).map_err(|e| e.to_string())?;
    let holed: BTreeSet<usize> = mesh
        .elements()
        .iter()
        .filter(|el| {
            let c = mesh.centroid(el.id);
            !((0.375..0.625).contains(&c[0]) && (0.375..0.625).contains(&c[1]))
        })
        .map(|el| el.id)
        .collect();
    let b = BoundaryDiscretization::from_mesh(&mesh, Some(&holed)).map_err(|e| e.to_string())?;
    discretizations.push(("square with a hole".into(), b, vec![[0.1, 0.1], [0.9, 0.8]]));
    let b = BoundaryDiscretization::from_mesh_subdivided(&mesh, None, 3).map_err(|e| e.to_string())?;
    discretizations.push(("mesh boundary, subdivided".into(), b, vec![[0.2, 0.7]]));

    let mut worst: f64 = 0.0;
    for (name, b, pts) in &discretizations {
        let sys = assemble_hg(b, pts).map_err(|e| format!("{name}: {e}"))?;
        let n = sys.num_points();
        for i in 0..n {
            let s: f64 = (0..n).map(|j| sys.h[(i, j)]).sum();
            worst = worst.max(s.abs());
            ensure(s.abs() < 1e-10, || format!("{name}: row {i} sums to {s:e}"))?;
        }
    }
    Ok(format!(
        "interior error {e32:.2e} (32 elements) > {e64:.2e} (64 elements); worst H row sum {worst:.1e} over {} discretizations",
        discretizations.len()
    ))
}

/// `u^p = h` componentwise.
struct Power {
    p: f64,
    targets: Vec<f64>,
}

impl NonlinearProblem for Power {
    fn dim(&self) -> usize {
        self.targets.len()
    }
    fn residual(&self, u: &[f64]) -> hdrm::core::Result<Vec<f64>> {
        Ok(u.iter().zip(&self.targets).map(|(u, h)| u.powf(self.p) - h).collect())
    }
    fn jacobian(&self, u: &[f64]) -> hdrm::core::Result<SparseMatrix> {
        let n = u.len();
        let d = DenseMatrix::from_fn(n, n, |i, j| if i == j { self.p * u[i].powf(self.p - 1.0) } else { 0.0 });
        Ok(SparseMatrix::from_dense(&d))
    }
}

fn radiation_spec() -> ProblemSpec {
    let mut spec = ProblemSpec::manufactured_poisson(UNIT, ScalarField::Linear { a: 1.0, b: 1.0, c: 1.0 });
    let law = PowerLaw { coefficient: 1.0, exponent: 4.0 };
    spec.boundary.insert(1, BoundaryCondition::Nonlinear(NonlinearBc::new(law, BcData::Exact).unwrap()));
    spec
}

fn newton_krylov() -> Outcome {
    let spec = radiation_spec();
    let mesh = Mesh::unit_square(8).map_err(|e| e.to_string())?;
    let fp = FemProblem::new(&mesh, &spec).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let u: Vec<f64> = (0..fp.dim()).map(|_| rng.gen_range(0.5..3.0)).collect();
        let analytic = fp.jacobian(&u).map_err(|e| e.to_string())?;
        let fd = jacobian(&fp, &u, JacobianMode::FiniteDifference, None).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let v: Vec<f64> = (0..fp.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ja = analytic.mul_vec(&v);
            let mut jf = vec![0.0; v.len()];
            fd.apply(&v, &mut jf);
            let diff: Vec<f64> = ja.iter().zip(&jf).map(|(a, b)| a - b).collect();
            let rel = norm2(&diff) / norm2(&ja);
            worst = worst.max(rel);
            ensure(rel < 1e-5, || format!("Jacobian directional mismatch {rel:e}"))?;
        }
    }

    let cfg = NewtonConfig { krylov: KrylovMethod::Bicgstab, ..Default::default() };
    let poor = vec![3.0; fp.dim()];
    let out = newton_krylov_solve(&fp, &poor, &cfg).map_err(|e| e.to_string())?;
    ensure(out.converged(), || "Newton did not converge from the poor guess".into())?;
    // Residuals at the rounding floor carry no rate information.
    let floor = 1e3 * f64::EPSILON * out.trace[0].residual_norm;
    let norms: Vec<f64> = out.trace.iter().map(|s| s.residual_norm).filter(|&r| r > floor).collect();
    ensure(norms.len() >= 3, || format!("only {} residuals above {floor:e}", norms.len()))?;
    let tail = &norms[norms.len() - 3..];
    let (q1, q2) = (tail[1] / tail[0], tail[2] / tail[1]);
    ensure(q2 < q1 && q1 < 1.0, || format!("ratios {q1:e}, {q2:e} in {norms:?}"))?;
    let exact = spec.exact.unwrap();
    for n in mesh.nodes() {
        if (n.x - 1.0).abs() < 1e-14 && n.y > 1e-14 && n.y < 1.0 - 1e-14 {
            let root = bisect_root(exact.value(n.x, n.y).powi(4), 4.0);
            ensure((out.u[n.id] - root).abs() < 1e-8, || format!("boundary node {}: {} vs {root}", n.id, out.u[n.id]))?;
        }
    }

    let mut scalar_worst: f64 = 0.0;
    for h in [1e-3, 0.5, 1.0, 10.0, 81.0, 1e4] {
        let p = Power { p: 4.0, targets: vec![h] };
        let out = newton_krylov_solve(&p, &[h.max(1.0)], &NewtonConfig::default()).map_err(|e| e.to_string())?;
        let diff = (out.u[0] - bisect_root(h, 4.0)).abs();
        scalar_worst = scalar_worst.max(diff);
        ensure(diff < 1e-8, || format!("u^4 = {h}: {} vs bisection", out.u[0]))?;
    }
    Ok(format!(
        "worst Jv mismatch {worst:.1e}; last residual ratios {q1:.2e} > {q2:.2e}; scalar roots within {scalar_worst:.1e}"
    ))
}

fn random_dominant(rng: &mut ChaCha8Rng, n: usize, symmetric: bool) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen_bool(0.3) {
                a[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
    }
    if symmetric {
        for i in 0..n {
            for j in 0..i {
                a[(i, j)] = a[(j, i)];
            }
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
        a[(i, i)] = off + rng.gen_range(0.5..2.0);
    }
    a
}

fn linear_algebra() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut spd = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=50);
        let symmetric = seed % 2 == 0;
        let a = random_dominant(&mut rng, n, symmetric);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let x0 = vec![0.0; n];
        let direct = dense_solve(&a, &b).map_err(|e| format!("seed {seed}: {e}"))?;
        let sparse = SparseMatrix::from_dense(&a);
        let (xg, sg) = gmres(&sparse, &b, &x0, 1e-13, 10 * n, 30).map_err(|e| format!("seed {seed}: {e}"))?;
        let (xb, _) = bicgstab(&sparse, &b, &x0, 1e-13, 10 * n).map_err(|e| format!("seed {seed}: {e}"))?;
        let (xs, _) = gauss_seidel(&sparse, &b, &x0, 1e-13, 10_000).map_err(|e| format!("seed {seed}: {e}"))?;
        for (name, x) in [("gmres", &xg), ("bicgstab", &xb), ("gauss_seidel", &xs)] {
            let d = max_diff(x, &direct);
            worst = worst.max(d);
            ensure(d < 1e-8, || format!("seed {seed}, n {n}: {name} differs by {d:e}"))?;
        }
        ensure(sg.converged, || format!("seed {seed}: gmres did not converge"))?;
        if symmetric {
            spd += 1;
            let (x, st) = gmres(&a, &b, &x0, 1e-8, n, n).map_err(|e| format!("seed {seed}: {e}"))?;
            ensure(st.converged && st.iterations <= n, || {
                format!("seed {seed}: SPD n {n} took {} iterations, residual {:e}", st.iterations, st.final_residual_norm)
            })?;
            ensure(max_diff(&x, &direct) < 1e-6, || format!("seed {seed}: SPD solution off"))?;
        }
    }
    Ok(format!("100 systems, worst deviation from the dense solve {worst:.1e}; {spd} SPD systems within n GMRES iterations"))
}

fn adaptive_efficiency() -> Outcome {
    let pf = benchmark();
    let spec = &pf.spec;
    let exact = spec.exact.ok_or("benchmark has no exact solution")?;
    let newton = NewtonConfig { krylov: KrylovMethod::Bicgstab, ..Default::default() };
    let coarse = Mesh::unit_square(8).map_err(|e| e.to_string())?;

    let mut uniform = Vec::new();
    for n in [8, 16, 32, 64] {
        let mesh = Mesh::unit_square(n).map_err(|e| e.to_string())?;
        let s = fem_generation(spec, &mesh, None, &newton).map_err(|e| e.to_string())?;
        let err = error_function(&s.u, |x, y| exact.value(x, y), &mesh).map_err(|e| e.to_string())?;
        uniform.push((mesh.num_nodes(), err));
    }
    let refine = RefinementConfig { epsilon: 0.5, delta: 1e-30, max_generations: 4, marking_fraction: None };
    let (_, _, report) = adaptive_solve(spec, &coarse, &newton, &refine).map_err(|e| e.to_string())?;
    let adaptive: Vec<(usize, f64)> = report.generations.iter().map(|g| (g.nodes, g.l2_error.unwrap())).collect();
    for w in adaptive.windows(2) {
        ensure(w[1].1 <= w[0].1, || format!("error increased: {adaptive:?}"))?;
    }
    let mut summary = Vec::new();
    for &(uniform_nodes, target) in &uniform[2..] {
        let hit = adaptive.iter().find(|(_, e)| *e <= target);
        let &(nodes, err) = hit.ok_or(format!("adaptive run never reached {target:e}: {adaptive:?}"))?;
        ensure(nodes <= uniform_nodes, || format!("target {target:e}: adaptive {nodes} nodes vs uniform {uniform_nodes}"))?;
        summary.push(format!("{err:.2e} with {nodes} nodes vs {target:.2e} with {uniform_nodes}"));
    }

    let single = fem_generation(spec, &coarse, None, &newton).map_err(|e| e.to_string())?;
    let zero = RefinementConfig { max_generations: 0, ..refine };
    let (u0, m0, r0) = adaptive_solve(spec, &coarse, &newton, &zero).map_err(|e| e.to_string())?;
    ensure(u0 == single.u && m0 == coarse && r0.generations.len() == 1, || "max_generations = 0 differs from one solve".into())?;
    let calm = RefinementConfig { epsilon: 1e30, ..refine };
    let (u1, m1, r1) = adaptive_solve(spec, &coarse, &newton, &calm).map_err(|e| e.to_string())?;
    ensure(u1 == single.u && m1 == coarse && r1.stop == AdaptStop::NoMarks, || "empty marking differs from one solve".into())?;
    Ok(format!("{}; {} generations non-increasing; degenerate configs bitwise equal", summary.join(", "), adaptive.len()))
}

fn corner_patch(mesh: &Mesh) -> BTreeSet<usize> {
    mesh.elements()
        .iter()
        .filter(|e| {
            let c = mesh.centroid(e.id);
            c[0] < 0.25 && c[1] < 0.25
        })
        .map(|e| e.id)
        .collect()
}

fn hybrid_degeneracy() -> Outcome {
    let config = HybridConfig {
        newton: NewtonConfig { krylov: KrylovMethod::Bicgstab, ..Default::default() },
        ..Default::default()
    };
    let err = |e: hdrm::core::Error| e.to_string();

    let spec = ProblemSpec::manufactured_poisson(UNIT, ScalarField::Quadratic([0.0, 0.3, 0.1, 1.0, 0.0, -0.5]));
    let mesh = Mesh::unit_square(6).map_err(err)?;
    let empty = RegionPartition::from_fem_elements(&mesh, BTreeSet::new()).map_err(err)?;
    let h = hybrid_solve(&spec, &mesh, &empty, &config).map_err(err)?;
    ensure(h.mode == HybridMode::DrmOnly, || format!("mode {:?}", h.mode))?;
    let boundary = BoundaryDiscretization::from_mesh(&mesh, None).map_err(err)?;
    let on_boundary = mesh.boundary_nodes();
    let interior: Vec<usize> = (0..mesh.num_nodes()).filter(|n| !on_boundary.contains(n)).collect();
    let pts: Vec<[f64; 2]> = interior.iter().map(|&n| mesh.point(n)).collect();
    let d = drm_solve(&spec, &boundary, &pts).map_err(err)?;
    let drm_u: Vec<f64> = interior.iter().map(|&n| h.u[n]).collect();
    let drm_diff = max_diff(&drm_u, d.internal_u(boundary.len()));
    ensure(drm_diff < 1e-12, || format!("empty FEM region differs from the DRM solve by {drm_diff:e}"))?;

    let mut fem_diff: f64 = 0.0;
    let mut sin = ProblemSpec::manufactured_poisson(UNIT, ScalarField::SinSin { amplitude: 1.0, frequency: 1.0 });
    sin.source = Source::Manufactured;
    for spec in [sin, radiation_spec()] {
        let all = RegionPartition::from_fem_elements(&mesh, (0..mesh.num_elements()).collect()).map_err(err)?;
        let h = hybrid_solve(&spec, &mesh, &all, &config).map_err(err)?;
        ensure(h.mode == HybridMode::FemOnly, || format!("mode {:?}", h.mode))?;
        let fp = FemProblem::new(&mesh, &spec).map_err(err)?;
        let direct = newton_krylov_solve(&fp, &fp.initial_guess(), &config.newton).map_err(err)?;
        let diff = max_diff(&h.u, &direct.u);
        fem_diff = fem_diff.max(diff);
        ensure(diff < 1e-12, || format!("all-FEM partition differs from Newton by {diff:e}"))?;
    }

    let laplace = ProblemSpec::manufactured_poisson(UNIT, ScalarField::Linear { a: 0.0, b: 1.0, c: 0.0 });
    let mesh = Mesh::unit_square(8).map_err(err)?;
    let patch = RegionPartition::from_fem_elements(&mesh, corner_patch(&mesh)).map_err(err)?;
    let h = hybrid_solve(&laplace, &mesh, &patch, &config).map_err(err)?;
    ensure(h.converged, || format!("coupling did not converge: {:?}", h.interface_history))?;
    ensure(h.interface_mismatch < 1e-6, || format!("interface mismatch {:e}", h.interface_mismatch))?;
    Ok(format!(
        "DRM-only {drm_diff:.1e}, FEM-only {fem_diff:.1e}, corner patch mismatch {:.1e} after {} sweeps",
        h.interface_mismatch, h.sweeps
    ))
}

fn run_compare(problem: &Path, out: &Path) -> Result<(), String> {
    let run = Command::new(env!("CARGO_BIN_EXE_hdrm"))
        .arg("compare")
        .arg(problem)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(run.status.success(), || {
        format!("compare exited with {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr))
    })
}

fn listing(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        files.push((name, std::fs::read(&path).map_err(|e| e.to_string())?));
    }
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("first"), tmp.path().join("second"));
    run_compare(&benchmark_path(), &a)?;
    run_compare(&benchmark_path(), &b)?;
    let (fa, fb) = (listing(&a)?, listing(&b)?);
    let names = |f: &[(String, Vec<u8>)]| f.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    ensure(names(&fa) == names(&fb), || format!("file sets differ: {:?} vs {:?}", names(&fa), names(&fb)))?;
    let csv = fa.iter().filter(|(n, _)| n.ends_with(".csv")).count();
    ensure(csv >= 3, || format!("only {csv} CSV files written"))?;
    for ((name, x), (_, y)) in fa.iter().zip(&fb) {
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} files ({csv} CSV) byte-identical across two runs", fa.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("method ordering and error differences", ordering_and_delta),
        ("manufactured-solution convergence order", manufactured_order),
        ("linear patch test", patch_test),
        ("dual-reciprocity verification", drm_verification),
        ("Newton-Krylov with a quartic boundary law", newton_krylov),
        ("Krylov and Gauss-Seidel against dense solves", linear_algebra),
        ("adaptive refinement efficiency", adaptive_efficiency),
        ("hybrid coupling degeneracies", hybrid_degeneracy),
        ("deterministic compare output", determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {}: {name} [{secs:.1} s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name} [{secs:.1} s] {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
