use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;

use spectral_mds::bench::{run_bench, BenchConfig};
use spectral_mds::laplace::{cotan_matrices, eigenbasis};
use spectral_mds::mesh_io::{load_image, load_mesh, save_image, save_mesh, MeshFormat};
use spectral_mds::metric::{geodesic_all_pairs, WeightedGraph};
use spectral_mds::retarget::{build_retarget_problem, distortion_by_region, solve_constrained, RetargetConfig};
use spectral_mds::smacof::{smacof_solve, smacof_solve_rre, DEFAULT_RRE_PERIOD};
use spectral_mds::spectral::{
    multires_solve, spectral_smacof, DistanceSource, MultiresOptions, MultiresResult, MultiresSchedule, WeightModel,
};
use spectral_mds::{ConvergenceLog, SolverOptions, TriangleMesh};

use crate::args::{BasisArgs, BenchArgs, CanonicalArgs, Cli, Command, EmbedArgs, RetargetArgs, Solver, WeightArg};
use crate::output::{cache_dir, load_cached_basis, store_basis, validation, CliError, CliResult, Staging};

const DEFAULT_SCHEDULE_Q: &str = "200,600,N";
const DEFAULT_SCHEDULE_P: &str = "100,300,N";

pub fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(path) => Some(read_config(path)?),
        None => None,
    };
    match cli.command {
        Command::Embed(a) => embed(with_file(a, &file, EmbedArgs::merged)?),
        Command::CanonicalForm(a) => canonical_form(with_file(a, &file, CanonicalArgs::merged)?),
        Command::Bench(a) => bench(with_file(a, &file, BenchArgs::merged)?),
        Command::Retarget(a) => retarget(with_file(a, &file, RetargetArgs::merged)?),
        Command::Basis(a) => basis(with_file(a, &file, BasisArgs::merged)?),
    }
}

fn read_config(path: &Path) -> CliResult<serde_json::Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| validation(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| validation(format!("config {} is not valid JSON: {e}", path.display())))
}

fn with_file<T: DeserializeOwned>(flags: T, file: &Option<serde_json::Value>, merge: fn(T, T) -> T) -> CliResult<T> {
    match file {
        Some(v) => {
            let from_file =
                serde_json::from_value(v.clone()).map_err(|e| validation(format!("config file: {e}")))?;
            Ok(merge(flags, from_file))
        }
        None => Ok(flags),
    }
}

fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| validation(format!("missing required --{flag} (flag or config key)")))
}

fn weight_model(w: Option<WeightArg>) -> WeightModel {
    match w.unwrap_or(WeightArg::Unit) {
        WeightArg::Unit => WeightModel::Unit,
        WeightArg::Relative => WeightModel::Relative,
    }
}

fn schedule(q: Option<String>, p: Option<String>, ratio: Option<f64>) -> CliResult<MultiresSchedule> {
    let q = q.as_deref().unwrap_or(DEFAULT_SCHEDULE_Q);
    let p = p.as_deref().unwrap_or(DEFAULT_SCHEDULE_P);
    let mut s = MultiresSchedule::parse(q, p)?;
    if let Some(c) = ratio {
        s = s.with_ratio(c);
    }
    Ok(s)
}

fn read_mesh(path: &Path) -> CliResult<TriangleMesh> {
    let format = MeshFormat::from_path(path)
        .ok_or_else(|| validation(format!("{}: expected a .off or .obj mesh", path.display())))?;
    Ok(load_mesh(path, format)?)
}

/// Square table of numbers; a first line that does not parse is taken as a header.
fn read_distance_csv(path: &Path) -> CliResult<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| validation(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| validation(format!("{}: {e}", path.display())))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if line == 0 => continue,
            Err(e) => return Err(validation(format!("{} line {}: {e}", path.display(), line + 1))),
        }
    }
    let n = rows.len();
    if n < 2 || rows.iter().any(|r| r.len() != n) {
        return Err(validation(format!("{}: expected a square table with at least 2 rows", path.display())));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn out_dir(dir: Option<PathBuf>) -> PathBuf {
    dir.unwrap_or_else(|| PathBuf::from("."))
}

fn multires_options(seed: Option<usize>, max_iter: Option<usize>, rel_tol: Option<f64>) -> MultiresOptions {
    let mut opts = MultiresOptions {
        seed: seed.unwrap_or(0),
        ..Default::default()
    };
    if let Some(k) = max_iter {
        opts.level.max_iter = k;
    }
    if let Some(t) = rel_tol {
        opts.final_rel_tol = t;
    }
    opts
}

/// Loads the largest subspace basis the schedule needs from the cache, if present.
fn attach_cached_basis(opts: &mut MultiresOptions, mesh: &TriangleMesh, levels: &[(usize, usize)], cache: Option<&Path>) {
    let n = mesh.num_vertices();
    let p = levels.iter().map(|&(_, p)| p).filter(|&p| p < n).max().unwrap_or(0);
    if let (Some(dir), true) = (cache, p > 0) {
        opts.basis = load_cached_basis(dir, mesh, p);
        if opts.basis.is_some() {
            log::info!("using cached eigenbasis with p = {p}");
        }
    }
}

fn cache_result(result: &MultiresResult, mesh: &TriangleMesh, cache: Option<&Path>, was_cached: bool) {
    if let (Some(dir), Some(basis), false) = (cache, &result.basis, was_cached) {
        store_basis(dir, mesh, basis);
    }
}

fn embedding_csv(x: &DMatrix<f64>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for i in 0..x.nrows() {
        w.write_record(x.row(i).iter().map(|v| format!("{v:e}")))
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Runtime(e.to_string()))
}

fn save_staged_mesh(stage: &mut Staging, name: &str, mesh: &TriangleMesh) -> CliResult<()> {
    let path = stage.path(name);
    save_mesh(mesh, &path, MeshFormat::Off).map_err(|e| CliError::Runtime(e.to_string()))
}

fn report_written(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn embed(a: EmbedArgs) -> CliResult<()> {
    let input = require(a.input, "input")?;
    let solver = a.solver.unwrap_or(Solver::Smacof);
    let weights = weight_model(a.weights);
    let dim = a.dim.unwrap_or(3);
    if dim == 0 {
        return Err(validation("--dim must be at least 1"));
    }
    let opts = SolverOptions {
        abs_tol: a.abs_tol.unwrap_or(0.0),
        rel_tol: a.rel_tol.unwrap_or(1e-5),
        max_iter: a.max_iter.unwrap_or(5000),
        record_log: true,
    };
    opts.validate()?;
    let rre_period = a.rre_period.unwrap_or(DEFAULT_RRE_PERIOD);
    let seed = a.seed.unwrap_or(0);
    let cache = cache_dir(a.cache_dir);
    let is_table = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));

    let (x, log, mesh) = if is_table {
        if matches!(solver, Solver::Spectral | Solver::Multires) {
            return Err(validation("the spectral and multires solvers need a mesh input (.off/.obj)"));
        }
        let d = read_distance_csv(&input)?;
        let problem = weights.problem(d.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
        let scale = d.sum() / (d.nrows() * d.nrows()) as f64;
        let x0 = DMatrix::from_fn(d.nrows(), dim, |_, _| scale * rng.random_range(-1.0..1.0));
        let (x, log) = match solver {
            Solver::SmacofRre => smacof_solve_rre(&problem, &x0, &opts, rre_period)?,
            _ => smacof_solve(&problem, &x0, &opts)?,
        };
        (x, log, None)
    } else {
        let mesh = read_mesh(&input)?;
        if dim > 3 {
            return Err(validation("mesh inputs embed in at most 3 dimensions"));
        }
        let coords = mesh.coordinates();
        let x0 = coords.columns(0, dim).into_owned();
        let graph = WeightedGraph::from_mesh(&mesh);
        let n = mesh.num_vertices();
        let (x, log) = match solver {
            Solver::Smacof | Solver::SmacofRre => {
                let problem = weights.problem(geodesic_all_pairs(&mesh)?)?;
                if solver == Solver::SmacofRre {
                    smacof_solve_rre(&problem, &x0, &opts, rre_period)?
                } else {
                    smacof_solve(&problem, &x0, &opts)?
                }
            }
            Solver::Spectral | Solver::Multires => {
                let mut mopts = multires_options(a.seed, a.max_iter, a.rel_tol);
                let (was_cached, result) = if solver == Solver::Spectral {
                    let p = a.p.unwrap_or(100);
                    let q = a.q.unwrap_or(2 * p);
                    if q > n || p > q {
                        return Err(validation(format!("need p <= q <= N = {n}, got p = {p}, q = {q}")));
                    }
                    let levels = [(q, p)];
                    attach_cached_basis(&mut mopts, &mesh, &levels, cache.as_deref());
                    let was_cached = mopts.basis.is_some();
                    let r = spectral_smacof(&mesh, &x0, DistanceSource::Graph(&graph), weights, p, q, &mopts)?;
                    (was_cached, r)
                } else {
                    let s = schedule(a.schedule_q, a.schedule_p, a.ratio)?;
                    let levels = s.resolve(n)?;
                    attach_cached_basis(&mut mopts, &mesh, &levels, cache.as_deref());
                    let was_cached = mopts.basis.is_some();
                    let r = multires_solve(&mesh, &x0, DistanceSource::Graph(&graph), weights, &s, &mopts)?;
                    (was_cached, r)
                };
                cache_result(&result, &mesh, cache.as_deref(), was_cached);
                (result.embedding, result.log)
            }
        };
        (x, log, Some(mesh))
    };

    let mut stage = Staging::new(&out_dir(a.out_dir))?;
    match &mesh {
        Some(mesh) => {
            let embedded = mesh.with_coordinates(&x)?;
            save_staged_mesh(&mut stage, "embedding.off", &embedded)?;
        }
        None => stage.write("embedding.csv", &embedding_csv(&x)?)?,
    }
    stage.write_log("log.csv", &log, a.no_timing.unwrap_or(false))?;
    let files = stage.commit()?;
    print_log_summary(&log);
    report_written(&files);
    Ok(())
}

fn print_log_summary(log: &ConvergenceLog) {
    if let Some(s) = log.final_stress() {
        println!("iterations {} final stress {s:e}", log.iterations());
    }
}

fn canonical_form(a: CanonicalArgs) -> CliResult<()> {
    let input = require(a.input, "input")?;
    let mesh = read_mesh(&input)?;
    let weights = weight_model(a.weights);
    let s = schedule(a.schedule_q, a.schedule_p, a.ratio)?;
    let levels = s.resolve(mesh.num_vertices())?;
    let cache = cache_dir(a.cache_dir);
    let mut opts = multires_options(a.seed, a.max_iter, a.rel_tol);
    opts.full_stress = true;
    attach_cached_basis(&mut opts, &mesh, &levels, cache.as_deref());
    let was_cached = opts.basis.is_some();
    let graph = WeightedGraph::from_mesh(&mesh);
    let x0 = mesh.coordinates();
    let result = multires_solve(&mesh, &x0, DistanceSource::Graph(&graph), weights, &s, &opts)?;
    cache_result(&result, &mesh, cache.as_deref(), was_cached);

    let canonical = mesh.with_coordinates(&result.embedding)?;
    let mut stage = Staging::new(&out_dir(a.out_dir))?;
    save_staged_mesh(&mut stage, "canonical.off", &canonical)?;
    stage.write_log("log.csv", &result.log, a.no_timing.unwrap_or(false))?;
    let files = stage.commit()?;
    for l in &result.levels {
        println!(
            "level {} q {} p {} iterations {} stress {:e}",
            l.level,
            l.q,
            l.p,
            l.iterations,
            l.full_stress.unwrap_or(l.sampled_stress)
        );
    }
    report_written(&files);
    Ok(())
}

fn bench(a: BenchArgs) -> CliResult<()> {
    let input = require(a.input, "input")?;
    let mesh = read_mesh(&input)?;
    let weights = weight_model(a.weights);
    let mut config = BenchConfig::default();
    if a.schedule_q.is_some() || a.schedule_p.is_some() || a.ratio.is_some() {
        let q = a.schedule_q.or(Some("200,400,N".into()));
        let p = a.schedule_p.or(Some("100,200,N".into()));
        config.schedule = schedule(q, p, a.ratio)?;
    }
    let levels = config.schedule.resolve(mesh.num_vertices())?;
    if let Some(k) = a.max_iter {
        config.max_iter = k;
    }
    config.rre_period = a.rre_period;
    config.multires.seed = a.seed.unwrap_or(0);
    let cache = cache_dir(a.cache_dir);
    attach_cached_basis(&mut config.multires, &mesh, &levels, cache.as_deref());

    let d = geodesic_all_pairs(&mesh)?;
    let x0 = mesh.coordinates();
    let report = run_bench(&mesh, &x0, &d, weights, &config)?;

    let mut summary = String::from(
        "solver,target_stress,setup_seconds,spectral_solve_seconds,spectral_total_seconds,seconds_to_target,final_stress,speedup\n",
    );
    for run in &report.runs {
        let to_target = run.seconds_to_target.map_or(String::from("NA"), |t| format!("{t:.6}"));
        let speedup = match (run.solver.as_str(), run.seconds_to_target) {
            ("multires", _) | (_, None) => String::from("NA"),
            (_, Some(t)) => format!("{:.4}", t / report.spectral_seconds),
        };
        summary.push_str(&format!(
            "{},{:e},{:.6},{:.6},{:.6},{},{:e},{}\n",
            run.solver,
            report.target_stress,
            report.setup_seconds,
            report.spectral_seconds - report.setup_seconds,
            report.spectral_seconds,
            to_target,
            run.final_stress,
            speedup
        ));
    }
    let mut stage = Staging::new(&out_dir(a.out_dir))?;
    stage.write("bench.csv", &report.to_csv())?;
    stage.write("bench_summary.csv", &summary)?;
    let files = stage.commit()?;

    println!(
        "multires: stress {:e} in {:.3} s ({:.3} s setup)",
        report.target_stress, report.spectral_seconds, report.setup_seconds
    );
    for run in report.runs.iter().skip(1) {
        match run.seconds_to_target {
            Some(t) => println!("{}: reached the target in {t:.3} s, speedup {:.2}x", run.solver, t / report.spectral_seconds),
            None => println!("{}: did not reach the target, final stress {:e}", run.solver, run.final_stress),
        }
    }
    report_written(&files);
    Ok(())
}

fn retarget(a: RetargetArgs) -> CliResult<()> {
    let source_path = require(a.source, "source")?;
    let saliency_path = require(a.saliency, "saliency")?;
    let source = load_image(&source_path)?;
    let saliency = load_image(&saliency_path)?;
    let (w, h) = (source.width(), source.height());
    let mut config = RetargetConfig::for_image(w, h);
    macro_rules! set {
        ($($field:ident <- $value:expr),*) => { $(if let Some(v) = $value { config.$field = v; })* };
    }
    set!(target_width_ratio <- a.width_ratio, grid_rows <- a.grid_rows, grid_cols <- a.grid_cols, mu <- a.mu,
         p <- a.p, q <- a.q, seed <- a.seed, max_iter <- a.max_iter, rel_tol <- a.rel_tol);
    config.epsilon = a.epsilon.or(config.epsilon);
    if a.p.is_some() && a.q.is_none() {
        config.q = (4 * config.p).min(config.grid_rows * config.grid_cols);
    }
    config.validate(w, h)?;

    let problem = build_retarget_problem(&source, &saliency, &config)?;
    let solution = solve_constrained(&problem, &config)?;
    let warped = solution.warp(&problem);
    let image = spectral_mds::retarget::warp_image(&source, &warped, problem.target_width)?;
    let grid = problem.grid_mesh(&solution.positions)?;
    let (salient, other) = distortion_by_region(&problem, &solution.positions, 0.5);

    let mut stage = Staging::new(&out_dir(a.out_dir))?;
    let image_name = if image.channels() == 1 { "retargeted.pgm" } else { "retargeted.ppm" };
    let image_path = stage.path(image_name);
    save_image(&image, &image_path).map_err(|e| CliError::Runtime(e.to_string()))?;
    save_staged_mesh(&mut stage, "grid.off", &grid)?;
    stage.write_log("objective.csv", &solution.log, a.no_timing.unwrap_or(false))?;
    let files = stage.commit()?;

    println!("output {}x{} from {w}x{h}", image.width(), image.height());
    println!(
        "min sampled slack {:e}, full-grid violations {}, max distortion salient {salient:.4} non-salient {other:.4}",
        solution.min_sampled_slack, solution.full_grid_violations
    );
    if solution.qp_not_converged > 0 {
        println!("{} subproblems stopped at the iteration cap", solution.qp_not_converged);
    }
    report_written(&files);
    Ok(())
}

fn basis(a: BasisArgs) -> CliResult<()> {
    let input = require(a.input, "input")?;
    let p = require(a.p, "p")?;
    let mesh = read_mesh(&input)?;
    let n = mesh.num_vertices();
    if p == 0 || p >= n {
        return Err(validation(format!("need 1 <= p < N = {n}, got p = {p}")));
    }
    let cache = cache_dir(a.cache_dir);
    let clock = Instant::now();
    let cached = cache.as_deref().and_then(|dir| load_cached_basis(dir, &mesh, p));
    let (basis, hit) = match cached {
        Some(b) => (b, true),
        None => {
            let (stiffness, mass) = cotan_matrices(&mesh)?;
            let b = eigenbasis(&stiffness, &mass, p)?;
            if let Some(dir) = &cache {
                store_basis(dir, &mesh, &b);
            }
            (b, false)
        }
    };
    let seconds = clock.elapsed().as_secs_f64();
    if hit {
        println!("cache hit: loaded p = {p} eigenpairs in {seconds:.6} s");
    } else {
        println!("cache miss: computed p = {p} eigenpairs in {seconds:.6} s");
    }
    log::info!("eigenbasis for N = {n}, p = {p} ready after {seconds:.6} s (cache hit: {hit})");
    let lambda = &basis.eigenvalues;
    for (k, l) in lambda.iter().enumerate().take(10) {
        println!("lambda[{k}] = {l:.6e}");
    }
    if lambda.len() > 10 {
        println!("lambda[{}] = {:.6e}", lambda.len() - 1, lambda[lambda.len() - 1]);
    }
    Ok(())
}
