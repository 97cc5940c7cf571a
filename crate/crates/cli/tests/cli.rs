use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use elliptic_dg::analysis::l2_error;
use elliptic_dg::mesh::build_rectilinear_mesh;
use elliptic_dg::solver::ExplicitMatrix;
use elliptic_dg::systems::AnalyticField;

const ENV: &str = "DG_ELLIPTIC_OUTPUT_DIR";

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dg-elliptic"))
        .args(args)
        .env(ENV, out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

/// Parses the single data row of a solve CSV into (header, values).
fn solve_row(path: &Path) -> Vec<(String, String)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let values: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(lines.next(), None);
    header.iter().zip(values).map(|(h, v)| (h.to_string(), v.to_string())).collect()
}

fn field<'a>(row: &'a [(String, String)], name: &str) -> &'a str {
    &row.iter().find(|(h, _)| h == name).unwrap().1
}

fn fig3_text() -> String {
    fs::read_to_string(config("poisson_2x2_p5.toml")).unwrap()
}

#[test]
fn solve_poisson_converges_with_finite_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("poisson_2x2_p5.toml");
    let o = run(dir.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let row = solve_row(&dir.path().join("poisson_solve.csv"));
    assert_eq!(field(&row, "system"), "poisson-flat");
    assert_eq!(field(&row, "n_dofs"), "144");
    assert_eq!(field(&row, "converged"), "true");
    let error: f64 = field(&row, "error").parse().unwrap();
    assert!(error.is_finite() && error > 0.0 && error < 1e-4, "{error}");
    let residual: f64 = field(&row, "residual").parse().unwrap();
    assert!(residual <= 1e-10);

    let solution = fs::read_to_string(dir.path().join("poisson_solution.csv")).unwrap();
    assert_eq!(solution.lines().next(), Some("x,y,u"));
    assert_eq!(solution.lines().count(), 145);
    let mesh = fs::read_to_string(dir.path().join("poisson_mesh.csv")).unwrap();
    assert_eq!(mesh.lines().count(), 5);
}

#[test]
fn shipped_configs_solve() {
    for name in ["elasticity_2x2_p5.toml", "annulus_p3.toml", "curved_poisson.toml"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(name);
        let o = run(dir.path(), &["solve", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{name}: {}", stderr(&o));
    }
}

#[test]
fn malformed_key_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = fig3_text().replace("degrees = [5, 5]", "degrees = [5, 5]\nsmoothing = 2");
    let line = text.lines().position(|l| l.starts_with("smoothing")).unwrap() + 1;
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let o = run(dir.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains(&format!("line {line}")), "{err}");
    assert!(err.contains("smoothing"), "{err}");
    assert!(!dir.path().join("poisson_solve.csv").exists());
}

#[test]
fn invalid_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        fig3_text().replace("poisson-flat", "heat"),
        fig3_text().replace("tol = 1e-10", "tol = -1.0"),
        fig3_text().replace("method = \"gmres\"", "method = \"cg\""),
        fig3_text().replace("levels = [1, 1]", "levels = [1]"),
        "not toml at all = = =".to_string(),
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{i}.toml"), text);
        let o = run(dir.path(), &["solve", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code(&o), 2, "case {i}: {}", stderr(&o));
        assert!(stderr(&o).contains("field `"), "case {i}: {}", stderr(&o));
    }
    let o = run(dir.path(), &["solve", "--config", "/nonexistent/config.toml"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn zero_data_gives_zero_solution() {
    let dir = tempfile::tempdir().unwrap();
    let text = fig3_text()
        .replace("kind = \"dirichlet\"", "kind = \"dirichlet\"\ndata = \"zero\"")
        .replace("kind = \"sine-product\"", "kind = \"sine-product\"\nmanufacture_source = false");
    let cfg = write_config(dir.path(), "zero.toml", &text);
    let o = run(dir.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let row = solve_row(&dir.path().join("poisson_solve.csv"));
    assert_eq!(field(&row, "iterations"), "0");
    let solution = fs::read_to_string(dir.path().join("poisson_solution.csv")).unwrap();
    assert!(solution.lines().skip(1).all(|l| l.ends_with(",0.0000000000000000e0")));

    // the error is then the norm of the analytic field
    let mesh = build_rectilinear_mesh(&[(0.0, 1.0), (0.0, 1.0)], &[1, 1], &[5, 5]).unwrap();
    let exact = AnalyticField::sine_product(2);
    let norm = l2_error(&mesh, None, 1, &vec![0.0; 144], |x| exact.value(x)).unwrap();
    let error: f64 = field(&row, "error").parse().unwrap();
    assert_eq!(error, norm);
}

#[test]
fn non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = fig3_text().replace("tol = 1e-10", "tol = 1e-10\nmax_iter = 3");
    let cfg = write_config(dir.path(), "short.toml", &text);
    let o = run(dir.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    // the report is still written
    let row = solve_row(&dir.path().join("poisson_solve.csv"));
    assert_eq!(field(&row, "converged"), "false");
    assert_eq!(field(&row, "iterations"), "3");
}

fn read_csv_column(text: &str, name: &str) -> Vec<String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().to_string()).collect()
}

#[test]
fn h_convergence_p3_superconverges() {
    let dir = tempfile::tempdir().unwrap();
    let text = fig3_text()
        .replace("levels = [1, 1]", "levels = [0, 0]")
        .replace("degrees = [5, 5]", "degrees = [3, 3]")
        .replace("[solver]", "[solver]\npreconditioner = \"block-jacobi\"")
        .replace("tol = 1e-10", "tol = 1e-12\nmax_iter = 20000");
    let cfg = write_config(dir.path(), "h.toml", &text);
    let o = run(dir.path(), &["convergence", "--config", cfg.to_str().unwrap(), "--mode", "h", "--levels", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("poisson_convergence.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("mode,level,n_points,h_or_P,error,rate"));
    assert_eq!(csv.lines().count(), 5);
    let rates: Vec<f64> = read_csv_column(&csv, "rate").iter().skip(1).map(|r| r.parse().unwrap()).collect();
    assert!(*rates.last().unwrap() >= 4.0, "{rates:?}");
    assert_eq!(read_csv_column(&csv, "mode"), ["h"; 4]);
}

#[test]
fn p_convergence_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let text = fig3_text().replace("degrees = [5, 5]", "degrees = [2, 2]");
    let cfg = write_config(dir.path(), "p.toml", &text);
    let o = run(dir.path(), &["convergence", "--config", cfg.to_str().unwrap(), "--mode", "p", "--levels", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("poisson_convergence.csv")).unwrap();
    let errors: Vec<f64> = read_csv_column(&csv, "error").iter().map(|e| e.parse().unwrap()).collect();
    assert_eq!(errors.len(), 5);
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    let degrees: Vec<f64> = read_csv_column(&csv, "h_or_P").iter().map(|e| e.parse().unwrap()).collect();
    assert_eq!(degrees, [2.0, 3.0, 4.0, 5.0, 6.0]);
}

#[test]
fn single_level_study_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("poisson_2x2_p5.toml");
    let o = run(dir.path(), &["convergence", "--config", cfg.to_str().unwrap(), "--mode", "h", "--levels", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--levels"));
}

#[test]
fn convergence_needs_a_solution() {
    let dir = tempfile::tempdir().unwrap();
    let text = fig3_text()
        .replace("[solution]\nkind = \"sine-product\"\n", "")
        .replace("kind = \"dirichlet\"", "kind = \"dirichlet\"\ndata = \"zero\"");
    let cfg = write_config(dir.path(), "nosol.toml", &text);
    let o = run(dir.path(), &["convergence", "--config", cfg.to_str().unwrap(), "--mode", "p", "--levels", "2"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

fn assemble(dir: &Path, cfg: &Path, aux: bool, out: &str) -> Output {
    let mut args = vec!["assemble", "--config", cfg.to_str().unwrap(), "--out", out];
    if aux {
        args.push("--with-auxiliary");
    }
    run(dir, &args)
}

fn read_matrix(path: &Path) -> ExplicitMatrix {
    ExplicitMatrix::parse_coordinate(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn assembled_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let fig3 = config("poisson_2x2_p5.toml");
    let cases = [
        (&fig3, false, "compact.mtx", 144),
        (&fig3, true, "full.mtx", 432),
        (&config("elasticity_2x2_p5.toml"), false, "elastic.mtx", 288),
    ];
    for (cfg, aux, out, n) in cases {
        let o = assemble(dir.path(), cfg, aux, out);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let m = read_matrix(&dir.path().join(out));
        assert_eq!((m.rows, m.cols), (n, n));
        let text = fs::read_to_string(dir.path().join(out)).unwrap();
        let header: Vec<usize> = text.lines().next().unwrap().split(' ').map(|t| t.parse().unwrap()).collect();
        assert_eq!(header, [n, n, m.nnz()]);
    }
}

#[test]
fn coordinate_file_is_one_based_row_major() {
    let dir = tempfile::tempdir().unwrap();
    let o = assemble(dir.path(), &config("poisson_2x2_p5.toml"), false, "a.mtx");
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("a.mtx")).unwrap();
    let entries: Vec<(usize, usize)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let t: Vec<&str> = l.split(' ').collect();
            assert_eq!(t.len(), 3);
            assert!(t[2].contains('e'));
            (t[0].parse().unwrap(), t[1].parse().unwrap())
        })
        .collect();
    assert_eq!(entries[0].0, 1);
    assert!(entries.iter().all(|&(r, c)| r >= 1 && c >= 1 && r <= 144 && c <= 144));
    assert!(entries.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn assembly_cap_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{}\n[assembly]\ncap = 143\n", fig3_text());
    let cfg = write_config(dir.path(), "cap.toml", &text);
    let o = assemble(dir.path(), &cfg, false, "never.mtx");
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(!dir.path().join("never.mtx").exists());
}

#[test]
fn outputs_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("elasticity_2x2_p5.toml");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&run(a.path(), &["solve", "--config", cfg])), 0);
    assert_eq!(code(&run(b.path(), &["solve", "--config", cfg, "--threads", "4"])), 0);
    for out in [a.path(), b.path()] {
        let o = run(out, &["assemble", "--config", cfg, "--with-auxiliary", "--out", "m.mtx", "--threads", "3"]);
        assert_eq!(code(&o), 0);
    }
    for name in ["elasticity_solve.csv", "elasticity_solution.csv", "elasticity_mesh.csv", "m.mtx"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn output_directory_from_config_without_env() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("results");
    let text = fig3_text().replace(
        "[output]",
        &format!("[output]\ndirectory = {:?}", target.to_str().unwrap()),
    );
    let cfg = write_config(dir.path(), "out.toml", &text);
    let o = Command::new(env!("CARGO_BIN_EXE_dg-elliptic"))
        .args(["solve", "--config", cfg.to_str().unwrap()])
        .env_remove(ENV)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(target.join("poisson_solve.csv").exists());

    // the environment variable takes precedence
    let other = dir.path().join("override");
    let o = run(&other, &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(other.join("poisson_solve.csv").exists());
}

#[test]
fn zero_threads_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("poisson_2x2_p5.toml");
    let o = run(dir.path(), &["solve", "--config", cfg.to_str().unwrap(), "--threads", "0"]);
    assert_eq!(code(&o), 2);
}
