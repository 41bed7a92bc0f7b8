//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Matrix3, Point2, SymmetricEigen, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{block, boundary_nodes, fixture, parse_dump, random_polygon, solve_case, Solved};
use vem2d::assembly::LoadCase;
use vem2d::element::{
    compute_b_tilde, element_stiffness, g_tilde_by_quadrature, ElementGeometry, Formulation,
};
use vem2d::material::{Material, PlaneMode};
use vem2d::mesh::{generate_structured, generate_voronoi, Domain, Mesh};
use vem2d::postproc::{beam_theory_tip, recover_fields, scalar_metrics};
use vem2d::problem::Problem;

type Outcome = Result<String, String>;

/// Solves recorded for the equilibrium criterion.
type Ledger = Vec<(String, Solved)>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure!(t < budget, "took {:.2?}, budget {:.0?}", t, budget);
    Ok(())
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64, String> {
    ensure!(a.shape() == b.shape(), "shape {:?} vs {:?}", a.shape(), b.shape());
    Ok((a - b).amax())
}

fn pentagon(ledger: &mut Ledger) -> Outcome {
    let start = Instant::now();
    let golden = parse_dump(&std::fs::read_to_string(fixture("pentagon_golden.txt")).unwrap());
    let problem = Problem::read(fixture("pentagon.txt")).map_err(|e| e.to_string())?;
    let form = problem.formulation();
    let geom = ElementGeometry::new(problem.mesh.element_polygon(0).unwrap());
    let (k, proj) = element_stiffness(&geom, &form).map_err(|e| e.to_string())?;
    let square = |m: &nalgebra::Matrix6<f64>| DMatrix::from_column_slice(6, 6, m.as_slice());
    let mut worst = 0.0_f64;
    for (name, m) in [
        ("B_bar", proj.b_bar.clone()),
        ("D", proj.d.clone()),
        ("G", square(&proj.g)),
        ("Pi_tilde", proj.pi_tilde.clone()),
        ("Pi", proj.pi.clone()),
        ("k_E", k),
    ] {
        let d = max_abs_diff(&m, &block(&golden, name))?;
        ensure!(d <= 1e-3, "{name} differs by {d:e}");
        worst = worst.max(d);
    }
    let c = block(&golden, "centroid");
    let centroid = geom.polygon.centroid();
    ensure!(
        (centroid.x - c[(0, 0)]).abs() <= 1e-4 && (centroid.y - c[(0, 1)]).abs() <= 1e-4,
        "centroid {centroid}"
    );
    ensure!((geom.frame.diameter - 5.0).abs() < 1e-12, "h_E {}", geom.frame.diameter);
    ensure!((geom.polygon.area() - 10.5).abs() < 1e-12, "area {}", geom.polygon.area());

    let lc = problem.load_case().map_err(|e| e.to_string())?;
    let solved = solve_case(&problem.mesh, &form, &lc);
    let u = DMatrix::from_fn(5, 2, |i, j| solved.u[2 * i + j]);
    let du = max_abs_diff(&u, &block(&golden, "displacements"))?;
    ensure!(du <= 1e-3, "displacements differ by {du:e}");
    let field = recover_fields(&problem.mesh, &form, &solved.u).map_err(|e| e.to_string())?;
    let de = (field.strains[0] - block(&golden, "strains").column(0)).amax();
    ensure!(de <= 1e-4, "strains differ by {de:e}");
    let ds = (field.stresses[0] - block(&golden, "stresses").column(0)).amax();
    ensure!(ds <= 1e-3, "stresses differ by {ds:e}");
    ledger.push(("pentagon".into(), solved));
    within_budget(start, Duration::from_secs(1))?;
    Ok(format!(
        "matrices within {worst:.1e}, displacements {du:.1e}, strains {de:.1e}, stresses {ds:.1e}"
    ))
}

fn identities() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut concave = 0;
    let mut worst = [0.0_f64; 4];
    for i in 0..1000 {
        let polygon = random_polygon(&mut rng, i % 2 == 0);
        let n = polygon.num_vertices();
        let is_convex = (0..n).all(|j| {
            let v = polygon.vertices();
            let (a, b, c) = (v[j], v[(j + 1) % n], v[(j + 2) % n]);
            (b - a).perp(&(c - b)) > 0.0
        });
        concave += usize::from(!is_convex);
        let geom = ElementGeometry::new(polygon);
        let nu = rng.gen_range(0.0..0.45);
        for mode in [PlaneMode::PlaneStress, PlaneMode::PlaneStrain] {
            let mat = Material::new(1000.0, nu, mode).unwrap();
            let form = Formulation::new(mat);
            let (k, p) = element_stiffness(&geom, &form).map_err(|e| format!("polygon {i}: {e}"))?;

            let g = DMatrix::from_column_slice(6, 6, p.g.as_slice());
            let bd = &p.b_bar * &p.d;
            let mut quad = DMatrix::from_column_slice(6, 6, g_tilde_by_quadrature(&geom, &mat.moduli_matrix()).as_slice());
            quad.rows_mut(0, 3).copy_from(&bd.rows(0, 3));
            let e_g = (&g - &bd).amax().max((&g - &quad).amax()) / g.amax();
            let e_pd = (&p.pi_tilde * &p.d - DMatrix::<f64>::identity(6, 6)).amax();
            let e_pp = (&p.pi * &p.pi - &p.pi).amax();
            ensure!(e_g <= 1e-9, "polygon {i} ({n} vertices): G vs B̄D {e_g:e}");
            ensure!(e_pd <= 1e-9, "polygon {i}: Π̃D - I {e_pd:e}");
            ensure!(e_pp <= 1e-9, "polygon {i}: Π² - Π {e_pp:e}");

            let tr = k.trace();
            let asym = (&k - k.transpose()).amax() / k.amax();
            ensure!(asym <= 1e-12, "polygon {i}: asymmetry {asym:e}");
            let eig = SymmetricEigen::new(k.clone()).eigenvalues;
            let min = eig.min();
            let null = eig.iter().filter(|&&l| l.abs() < 1e-9 * tr).count();
            ensure!(min >= -1e-9 * tr, "polygon {i}: negative eigenvalue {min:e}");
            ensure!(null == 3, "polygon {i} ({n} vertices, {mode}): {null} null modes");
            let mut sorted: Vec<f64> = eig.iter().copied().collect();
            sorted.sort_by(f64::total_cmp);
            worst[0] = worst[0].max(e_g);
            worst[1] = worst[1].max(e_pd);
            worst[2] = worst[2].max(e_pp);
            worst[3] = worst[3].max(sorted[2].abs() / tr);
        }
    }
    ensure!(concave > 200, "only {concave} concave polygons generated");
    within_budget(start, Duration::from_secs(30))?;
    Ok(format!(
        "1000 polygons ({concave} concave) x 2 modes; max errors G {:.1e}, Π̃D {:.1e}, Π² {:.1e}, null λ/tr {:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

fn patch_test(ledger: &mut Ledger) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let square = Domain::Rectangle {
        width: 1.0,
        height: 1.0,
    };
    let meshes = [
        ("structured 4x4", generate_structured(1.0, 1.0, 4, 4).unwrap()),
        ("voronoi 100", generate_voronoi(&square, 100, 10, 5).unwrap()),
    ];
    let (mut worst_u, mut worst_s) = (0.0_f64, 0.0_f64);
    for (name, mesh) in &meshes {
        for mode in [PlaneMode::PlaneStress, PlaneMode::PlaneStrain] {
            let c: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let exact = |p: &Point2<f64>| {
                Vector2::new(c[0] + c[1] * p.x + c[2] * p.y, c[3] + c[4] * p.x + c[5] * p.y)
            };
            let mat = Material::new(1000.0, 0.25, mode).unwrap();
            let form = Formulation::new(mat);
            let mut lc = LoadCase::default();
            for n in boundary_nodes(mesh) {
                let v = exact(&mesh.nodes[n]);
                lc.constrain(n, 0, v.x);
                lc.constrain(n, 1, v.y);
            }
            let solved = solve_case(mesh, &form, &lc);
            let scale = mesh.nodes.iter().map(|p| exact(p).amax()).fold(0.0, f64::max);
            let interior = (0..mesh.num_nodes()).filter(|n| !lc.dirichlet.contains_key(&(2 * n)));
            let mut count = 0;
            for n in interior {
                let v = exact(&mesh.nodes[n]);
                let e = (solved.u[2 * n] - v.x).abs().max((solved.u[2 * n + 1] - v.y).abs()) / scale;
                ensure!(e <= 1e-9, "{name} {mode}: node {} off by {e:e}", n + 1);
                worst_u = worst_u.max(e);
                count += 1;
            }
            ensure!(count > 0, "{name}: no interior nodes");
            let strain = Vector3::new(c[1], c[5], c[2] + c[4]);
            let sigma = mat.moduli_matrix() * strain;
            let field = recover_fields(mesh, &form, &solved.u).map_err(|e| e.to_string())?;
            for (e, s) in field.stresses.iter().enumerate() {
                let err = (s - sigma).norm() / sigma.norm();
                ensure!(err <= 1e-8, "{name} {mode}: element {} stress off by {err:e}", e + 1);
                worst_s = worst_s.max(err);
            }
            ledger.push((format!("patch {name} {mode}"), solved));
        }
    }
    within_budget(start, Duration::from_secs(10))?;
    Ok(format!(
        "interior displacement error {worst_u:.1e}, stress error {worst_s:.1e} (relative)"
    ))
}

fn cantilever(mesh: &Mesh) -> (Problem, Solved, f64, f64) {
    let mat = Material::new(1000.0, 0.3, PlaneMode::PlaneStress).unwrap();
    let problem = Problem::cantilever(mesh.clone(), mat, 0.1).unwrap();
    let form = problem.formulation();
    let solved = solve_case(&problem.mesh, &form, &problem.load_case().unwrap());
    let field = recover_fields(&problem.mesh, &form, &solved.u).unwrap();
    let m = scalar_metrics(&field, &problem.mesh, Some(Point2::new(12.0, 0.5))).unwrap();
    let tip = m.probe.unwrap().displacement[1].abs();
    (problem, solved, tip, m.max_abs_sxx)
}

fn cantilever_check(ledger: &mut Ledger) -> Outcome {
    let start = Instant::now();
    let domain = Domain::Rectangle {
        width: 12.0,
        height: 1.0,
    };
    let mut lines = Vec::new();
    for seed in 1..=5u64 {
        let mesh = generate_voronoi(&domain, 200, 20, seed).map_err(|e| e.to_string())?;
        ensure!(mesh.num_elements() == 200, "seed {seed}: {} elements", mesh.num_elements());
        let (_, solved, tip, sx) = cantilever(&mesh);
        ensure!((0.655..=0.76).contains(&tip), "seed {seed}: tip {tip:.4} outside [0.655, 0.76]");
        ensure!((5.0..=7.6).contains(&sx), "seed {seed}: max |σx| {sx:.3} outside [5.0, 7.6]");
        lines.push(format!("seed {seed}: tip {tip:.4}, |σx| {sx:.3}"));
        ledger.push((format!("cantilever voronoi seed {seed}"), solved));
    }
    let mesh = generate_structured(12.0, 1.0, 48, 4).unwrap();
    let (_, solved, tip, _) = cantilever(&mesh);
    let theory = beam_theory_tip(0.1, 12.0, 1000.0, 1.0 / 12.0);
    let rel = (tip - theory).abs() / theory;
    ensure!(rel <= 0.05, "48x4 tip {tip:.4} is {:.1}% from {theory:.4}", rel * 100.0);
    ledger.push(("cantilever structured 48x4".into(), solved));
    within_budget(start, Duration::from_secs(10))?;
    Ok(format!(
        "{}; 48x4 tip {tip:.4} ({:.2}% from {theory:.4})",
        lines.join("; "),
        rel * 100.0
    ))
}

fn plate(ledger: &mut Ledger) -> Outcome {
    let start = Instant::now();
    let domain = Domain::QuarterPlate {
        width: 5.0,
        height: 5.0,
        radius: 1.0,
    };
    let mat = Material::new(1000.0, 0.3, PlaneMode::PlaneStress).unwrap();
    let mut peaks = Vec::new();
    for n in [500, 5000] {
        let mesh = generate_voronoi(&domain, n, 20, 1).map_err(|e| e.to_string())?;
        let problem = Problem::plate_in_tension(mesh, mat, 1.0).map_err(|e| e.to_string())?;
        let form = problem.formulation();
        let solved = solve_case(&problem.mesh, &form, &problem.load_case().unwrap());
        let field = recover_fields(&problem.mesh, &form, &solved.u).unwrap();
        let m = scalar_metrics(&field, &problem.mesh, None).unwrap();
        peaks.push(m.max_stress.x);
        ledger.push((format!("plate {n}"), solved));
    }
    ensure!(peaks[1] > peaks[0], "max σx {:.4} (5000) does not exceed {:.4} (500)", peaks[1], peaks[0]);
    within_budget(start, Duration::from_secs(60))?;
    Ok(format!("max σx {:.4} at 500 elements, {:.4} at 5000", peaks[0], peaks[1]))
}

/// Plane moduli from the textbook formulas.
fn moduli(e: f64, nu: f64, mode: PlaneMode) -> Matrix3<f64> {
    match mode {
        PlaneMode::PlaneStress => {
            let f = e / (1.0 - nu * nu);
            Matrix3::new(f, f * nu, 0.0, f * nu, f, 0.0, 0.0, 0.0, f * (1.0 - nu) / 2.0)
        }
        PlaneMode::PlaneStrain => {
            let f = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
            Matrix3::new(
                f * (1.0 - nu),
                f * nu,
                0.0,
                f * nu,
                f * (1.0 - nu),
                0.0,
                0.0,
                0.0,
                f * (1.0 - 2.0 * nu) / 2.0,
            )
        }
    }
}

fn quadrature_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let mut worst = 0.0_f64;
    for i in 0..100 {
        let polygon = random_polygon(&mut rng, i % 3 == 0);
        let mode = if i % 2 == 0 { PlaneMode::PlaneStress } else { PlaneMode::PlaneStrain };
        let c = moduli(1000.0, 0.3, mode);
        let v = polygon.vertices().to_vec();
        let n = v.len();
        let h = v
            .iter()
            .flat_map(|a| v.iter().map(move |b| (a - b).norm()))
            .fold(0.0, f64::max);
        let strains = [
            Vector3::new(0.0, 0.0, 2.0 / h),
            Vector3::new(1.0 / h, 0.0, 0.0),
            Vector3::new(0.0, 1.0 / h, 0.0),
        ];
        let mut oracle = DMatrix::zeros(6, 2 * n);
        for (a, eps) in strains.iter().enumerate() {
            let s = c * eps;
            for k in 0..n {
                let (p, q) = (v[k], v[(k + 1) % n]);
                let len = (q - p).norm();
                let normal = Vector2::new(q.y - p.y, p.x - q.x) / len;
                let t = Vector2::new(s.x * normal.x + s.z * normal.y, s.z * normal.x + s.y * normal.y);
                for lam in gauss {
                    for (node, shape) in [(k, 1.0 - lam), ((k + 1) % n, lam)] {
                        oracle[(3 + a, 2 * node)] += 0.5 * len * shape * t.x;
                        oracle[(3 + a, 2 * node + 1)] += 0.5 * len * shape * t.y;
                    }
                }
            }
        }
        let b = compute_b_tilde(&ElementGeometry::new(polygon), &c);
        let d = (&b - &oracle).amax();
        ensure!(d <= 1e-12, "polygon {i}: B̃ differs by {d:e}");
        worst = worst.max(d);
    }
    Ok(format!("100 polygons, max |ΔB̃| {worst:.1e}"))
}

fn equilibrium(ledger: &Ledger) -> Outcome {
    ensure!(!ledger.is_empty(), "no solved problems recorded");
    let (mut eq, mut fi) = (0.0_f64, 0.0_f64);
    for (name, s) in ledger {
        let e = s.equilibrium_error();
        let f = s.internal_force_error();
        ensure!(e <= 1e-9, "{name}: reactions off by {e:e}");
        ensure!(f <= 1e-10, "{name}: F_int vs Ku off by {f:e}");
        eq = eq.max(e);
        fi = fi.max(f);
    }
    Ok(format!(
        "{} solves; reaction balance {eq:.1e}, F_int vs Ku {fi:.1e}",
        ledger.len()
    ))
}

fn main() {
    let mut ledger = Ledger::new();
    let mut failed = 0;
    let mut report = |id: usize, title: &str, outcome: std::thread::Result<Outcome>| {
        let line = match outcome {
            Ok(Ok(detail)) => format!("criterion {id} PASS {title}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                format!("criterion {id} FAIL {title}: {why}")
            }
            Err(_) => {
                failed += 1;
                format!("criterion {id} FAIL {title}: panicked")
            }
        };
        println!("{line}");
    };
    report(1, "pentagon golden", catch_unwind(AssertUnwindSafe(|| pentagon(&mut ledger))));
    report(2, "algebraic identities", catch_unwind(identities));
    report(3, "patch test", catch_unwind(AssertUnwindSafe(|| patch_test(&mut ledger))));
    report(4, "cantilever", catch_unwind(AssertUnwindSafe(|| cantilever_check(&mut ledger))));
    report(5, "plate with hole", catch_unwind(AssertUnwindSafe(|| plate(&mut ledger))));
    report(6, "quadrature oracle", catch_unwind(quadrature_oracle));
    report(7, "equilibrium", catch_unwind(AssertUnwindSafe(|| equilibrium(&ledger))));
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
