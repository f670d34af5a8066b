//! The four subcommands on top of the core library.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde_json::Value;
use surrosel::fem::SolverKind;
use surrosel::measurement::random_boxes;
use surrosel::pipeline::argmin_lowest;
use surrosel::problem::sample_parameters_stream;
use surrosel::{
    AdmissibleFamily, AffineParametricProblem, AffineReducedSpace, CandidateSet, FamilyContext, FemVector,
    GreedyConfig, LevelHierarchy, MeasurementBox, MeasurementSpace, ParameterBox, ParameterCell, ParameterPoint,
    SplitRecord, SplitStop, SurrogateEvaluator, TrainingSet,
};

use crate::config::ExperimentConfig;
use crate::plots::{self, Series};
use crate::store::{Manifest, Store, StoreWriter};
use crate::{CliError, Context};

const TRAIN_STREAM: u64 = 0;
const TEST_STREAM: u64 = 1;

fn h_of(level: u32) -> f64 {
    (-(level as f64)).exp2()
}

/// Shortest round-trip formatting, so equal values give equal bytes.
fn num(v: f64) -> String {
    format!("{v:e}")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn prepare_output(cfg: &ExperimentConfig) -> Result<&Path, CliError> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn solve_all(
    problem: &AffineParametricProblem,
    params: &[ParameterPoint],
    tol: f64,
    what: &str,
) -> Result<Vec<FemVector>, CliError> {
    params
        .par_iter()
        .enumerate()
        .map(|(i, y)| problem.solve_forward(y, tol).ctx(|| format!("forward solve of {what} sample {i} at y = {:?}", y.coords())))
        .collect()
}

fn put_space(w: &mut StoreWriter, prefix: &str, space: &AffineReducedSpace) -> Result<(), CliError> {
    let n = space.offset().len();
    w.put(&format!("{prefix}_offset"), &[n], space.offset().coeffs())?;
    let rows: Vec<&[f64]> = space.basis().iter().map(|b| b.coeffs()).collect();
    w.put_rows(&format!("{prefix}_basis"), n, &rows)?;
    w.put_indices(&format!("{prefix}_picked"), space.picked())?;
    w.put(&format!("{prefix}_eps"), &[space.eps_history().len()], space.eps_history())
}

fn json_f64(v: f64) -> Value {
    // non-finite values become null
    Value::from(v)
}

/// Solves all snapshots, builds measurements, the global space and the
/// family, and writes the artifact store.
pub fn offline(cfg: &ExperimentConfig, store_dir: &Path) -> Result<Manifest, CliError> {
    let problem = AffineParametricProblem::diffusion(cfg.fine_level, cfg.rule()).ctx(|| "problem assembly".into())?;
    let fine = surrosel::LevelSpace::new(cfg.fine_level, SolverKind::Auto, cfg.solver_tol).ctx(|| "fine level setup".into())?;
    let boxes = random_boxes(cfg.m, cfg.meas_width, cfg.seed).ctx(|| "measurement boxes".into())?;
    let ms = MeasurementSpace::from_boxes(&fine, boxes).ctx(|| "measurement representers".into())?;
    let root = problem.bounds().clone();
    let train_params = sample_parameters_stream(cfg.n_train, cfg.seed, TRAIN_STREAM, &root);
    let test_params = sample_parameters_stream(cfg.n_test, cfg.seed, TEST_STREAM, &root);
    let train_snaps = solve_all(&problem, &train_params, cfg.solver_tol, "training")?;
    let test_snaps = solve_all(&problem, &test_params, cfg.solver_tol, "test")?;
    let training = TrainingSet::new(train_params, train_snaps).ctx(|| "training set".into())?;
    let ctx = FamilyContext {
        space: &fine,
        training: &training,
        ms: &ms,
        rb: GreedyConfig { max_dim: cfg.rb_max_dim, target_eps: cfg.rb_target_eps },
    };
    let global = AdmissibleFamily::single(&ctx, root.clone()).ctx(|| "global reduced space".into())?;
    let family = AdmissibleFamily::build(&ctx, root, SplitStop::Splits(cfg.n_splits)).ctx(|| "family construction".into())?;
    let global = global.cells()[0].space().clone();

    let mut w = StoreWriter::create(store_dir)?;
    let n = fine.mesh().interior_count();
    let d = cfg.d;
    let rows = |ps: &[ParameterPoint]| ps.iter().map(|p| p.coords().to_vec()).collect::<Vec<_>>();
    let tp = rows(training.params());
    w.put_rows("train_params", d, &tp.iter().map(Vec::as_slice).collect::<Vec<_>>())?;
    w.put_rows("train_snapshots", n, &training.snapshots().iter().map(|u| u.coeffs()).collect::<Vec<_>>())?;
    let sp = rows(&test_params);
    w.put_rows("test_params", d, &sp.iter().map(Vec::as_slice).collect::<Vec<_>>())?;
    w.put_rows("test_snapshots", n, &test_snaps.iter().map(|u| u.coeffs()).collect::<Vec<_>>())?;
    let corners: Vec<f64> = ms.boxes().iter().flat_map(|b| [b.x0, b.y0, b.width]).collect();
    w.put("boxes", &[cfg.m, 3], &corners)?;
    put_space(&mut w, "global", &global)?;

    let k = family.len();
    let lower: Vec<f64> = family.cells().iter().flat_map(|c| c.bounds().lower().to_vec()).collect();
    let upper: Vec<f64> = family.cells().iter().flat_map(|c| c.bounds().upper().to_vec()).collect();
    w.put("cell_lower", &[k, d], &lower)?;
    w.put("cell_upper", &[k, d], &upper)?;
    for (i, cell) in family.cells().iter().enumerate() {
        w.put_indices(&format!("cell{i}_members"), cell.members())?;
        put_space(&mut w, &format!("cell{i}"), cell.space())?;
    }
    let sigma = family.sigma_history();
    w.put("family_sigma_history", &[sigma.len()], &sigma)?;
    let splits: Vec<f64> = family
        .history()
        .iter()
        .flat_map(|r| [r.cell as f64, r.direction as f64, r.children_sigma.0, r.children_sigma.1, r.max_sigma_after])
        .collect();
    w.put("family_splits", &[family.history().len(), 5], &splits)?;

    w.summary("K", k);
    w.summary("boxes", ms.boxes().iter().map(|b| vec![b.x0, b.y0, b.width]).collect::<Vec<_>>());
    w.summary("fine_dofs", n);
    w.summary("global_dim", global.dim());
    w.summary("global_mu", json_f64(global.mu().unwrap_or(f64::INFINITY)));
    w.summary("global_eps_est", json_f64(global.eps_est()));
    w.summary("global_sigma_est", json_f64(global.sigma_est().unwrap_or(f64::INFINITY)));
    w.summary("initial_sigma", json_f64(family.initial_sigma()));
    w.summary("max_sigma", json_f64(family.max_sigma()));
    w.summary("cell_dim", family.cells().iter().map(|c| c.space().dim()).collect::<Vec<_>>());
    w.summary("cell_mu", family.cells().iter().map(|c| json_f64(c.space().mu().unwrap_or(f64::INFINITY))).collect::<Vec<_>>());
    w.summary("cell_sigma_est", family.cells().iter().map(|c| json_f64(c.sigma_est())).collect::<Vec<_>>());
    w.summary("cell_members", family.cells().iter().map(|c| c.members().len()).collect::<Vec<_>>());
    w.finish(cfg)
}

/// Everything an experiment needs, reloaded from a store.
pub struct Workspace {
    pub cfg: ExperimentConfig,
    pub problem: AffineParametricProblem,
    pub levels: LevelHierarchy,
    pub ms: MeasurementSpace,
    pub training: TrainingSet,
    pub test_params: Vec<ParameterPoint>,
    pub test_snapshots: Vec<FemVector>,
    pub global: AffineReducedSpace,
    pub family: AdmissibleFamily,
}

fn load_space(store: &Store, prefix: &str, ws_fine: &surrosel::LevelSpace, ms: &MeasurementSpace, level: u32) -> Result<AffineReducedSpace, CliError> {
    let vec = |data: Vec<f64>| FemVector::new(level, data).ctx(|| format!("stored array {prefix}"));
    let offset = vec(store.array(&format!("{prefix}_offset"))?)?;
    let basis = store.rows(&format!("{prefix}_basis"))?.into_iter().map(vec).collect::<Result<Vec<_>, _>>()?;
    let picked = store.indices(&format!("{prefix}_picked"))?;
    let eps = store.array(&format!("{prefix}_eps"))?;
    let mut space = AffineReducedSpace::from_parts(ws_fine, offset, basis, picked, eps).ctx(|| format!("stored space {prefix}"))?;
    space.attach_measurements(ms).ctx(|| format!("inf-sup constant of {prefix}"))?;
    Ok(space)
}

impl Workspace {
    /// Opens the store and checks it was built with the same data-defining settings.
    pub fn load(cfg: &ExperimentConfig, store_dir: &Path) -> Result<Self, CliError> {
        let store = Store::open(store_dir)?;
        let stored = store.manifest().config.store_identity();
        let wanted = cfg.store_identity();
        if stored != wanted {
            let diff: Vec<String> = wanted
                .as_object()
                .expect("object")
                .iter()
                .filter(|(k, v)| stored.get(k.as_str()) != Some(v))
                .map(|(k, v)| format!("{k}: store has {}, config has {v}", stored[k.as_str()]))
                .collect();
            return Err(CliError::Config(format!("store {} was built with different settings ({})", store_dir.display(), diff.join("; "))));
        }
        let level = cfg.fine_level;
        let problem = AffineParametricProblem::diffusion(level, cfg.rule()).ctx(|| "problem assembly".into())?;
        let levels = LevelHierarchy::new(level, SolverKind::Auto, cfg.solver_tol).ctx(|| "level hierarchy".into())?;
        let boxes = store
            .rows("boxes")?
            .iter()
            .map(|r| MeasurementBox::new(r[0], r[1], r[2]))
            .collect::<surrosel::Result<Vec<_>>>()
            .ctx(|| "stored boxes".into())?;
        let ms = MeasurementSpace::from_boxes(levels.fine(), boxes).ctx(|| "measurement representers".into())?;
        let points = |name: &str| -> Result<Vec<ParameterPoint>, CliError> {
            Ok(store.rows(name)?.into_iter().map(ParameterPoint::new).collect())
        };
        let states = |name: &str| -> Result<Vec<FemVector>, CliError> {
            store.rows(name)?.into_iter().map(|r| FemVector::new(level, r).ctx(|| format!("stored array {name}"))).collect()
        };
        let training = TrainingSet::new(points("train_params")?, states("train_snapshots")?).ctx(|| "training set".into())?;
        let test_params = points("test_params")?;
        let test_snapshots = states("test_snapshots")?;
        let global = load_space(&store, "global", levels.fine(), &ms, level)?;

        let lower = store.rows("cell_lower")?;
        let upper = store.rows("cell_upper")?;
        let mut cells = Vec::with_capacity(lower.len());
        for (i, (lo, hi)) in lower.into_iter().zip(upper).enumerate() {
            let bounds = ParameterBox::new(lo, hi).ctx(|| format!("bounds of cell {i}"))?;
            let members = store.indices(&format!("cell{i}_members"))?;
            let space = load_space(&store, &format!("cell{i}"), levels.fine(), &ms, level)?;
            cells.push(ParameterCell::from_parts(bounds, members, space));
        }
        let history = store
            .rows("family_splits")?
            .into_iter()
            .map(|r| SplitRecord {
                cell: r[0] as usize,
                direction: r[1] as usize,
                children_sigma: (r[2], r[3]),
                max_sigma_after: r[4],
            })
            .collect();
        let initial_sigma = store.array("family_sigma_history")?.first().copied().unwrap_or(f64::INFINITY);
        let family = AdmissibleFamily::from_parts(problem.bounds().clone(), cells, history, initial_sigma);
        Ok(Self { cfg: cfg.clone(), problem, levels, ms, training, test_params, test_snapshots, global, family })
    }

    pub fn evaluator(&self) -> Result<SurrogateEvaluator<'_>, CliError> {
        SurrogateEvaluator::new(&self.problem, &self.levels).ctx(|| "surrogate setup".into())
    }

    fn error_norm(&self, u: &FemVector, v: &FemVector) -> Result<f64, CliError> {
        let mut d = u.clone();
        d.axpy(-1.0, v).ctx(|| "error norm".into())?;
        self.levels.fine().norm(&d).ctx(|| "error norm".into())
    }
}

/// Least-squares slope of `log2(err)` against `log2(h)`, over positive errors.
pub fn fit_slope(points: &[(u32, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(_, e)| *e > 0.0).map(|&(s, e)| (-(s as f64), e.log2())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone)]
pub struct Exp1Summary {
    pub slope: f64,
    /// `(level, mean |S_s - S_fine|)` for coarse levels and the fine level.
    pub mean_errors: Vec<(u32, f64)>,
    /// `(level, total wall seconds)`.
    pub timing: Vec<(u32, f64)>,
    pub mu: f64,
    pub eps_est: f64,
    pub sigma_est: f64,
    pub max_test_error: f64,
    pub max_test_distance: f64,
}

struct Exp1Point {
    values: Vec<f64>,
    seconds: Vec<Duration>,
    error: f64,
    distance: f64,
}

/// Accuracy and cost of the coarse surrogate for the global PBDW estimate.
pub fn exp1(ws: &Workspace, plots_on: bool) -> Result<Exp1Summary, CliError> {
    let cfg = &ws.cfg;
    let out = prepare_output(cfg)?;
    let ev = ws.evaluator()?;
    let levels = cfg.levels();
    let fine = ws.levels.fine();
    let results: Vec<Result<Exp1Point, CliError>> = ws
        .test_snapshots
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let at = || format!("test point {i}");
            let w = ws.ms.measure(u).ctx(at)?;
            let ustar = ws.global.pbdw_estimate(&ws.ms, &w).ctx(at)?;
            let error = ws.error_norm(u, &ustar)?;
            let distance = ws.global.dist_to(fine, u).ctx(at)?;
            // shared by all levels, so kept outside the timed region
            let residuals = ev.fine_residuals(&ustar).ctx(at)?;
            let mut values = Vec::with_capacity(levels.len());
            let mut seconds = Vec::with_capacity(levels.len());
            for &s in &levels {
                let t = Instant::now();
                let v = ev.surrogate_from_residuals(&residuals, s).ctx(|| format!("surrogate of test point {i} at level {s}"))?;
                seconds.push(t.elapsed());
                values.push(v.distance);
            }
            Ok(Exp1Point { values, seconds, error, distance })
        })
        .collect();

    let mut points = Vec::with_capacity(results.len());
    let mut failure = None;
    for r in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let fine_idx = levels.len() - 1;
    let mut rows = Vec::new();
    for (i, p) in points.iter().enumerate() {
        for (j, &s) in levels.iter().enumerate() {
            let fine_v = p.values[fine_idx];
            rows.push(vec![i.to_string(), s.to_string(), num(h_of(s)), num(p.values[j]), num(fine_v), num((p.values[j] - fine_v).abs())]);
        }
    }
    write_csv(&out.join("exp1_rows.csv"), &["test_idx", "level", "h", "s_level", "s_fine", "abs_err"], &rows)?;
    if let Some(e) = failure {
        return Err(e);
    }

    let n = points.len() as f64;
    let mean_errors: Vec<(u32, f64)> = levels
        .iter()
        .enumerate()
        .map(|(j, &s)| (s, points.iter().map(|p| (p.values[j] - p.values[fine_idx]).abs()).sum::<f64>() / n))
        .collect();
    let timing: Vec<(u32, f64)> = levels
        .iter()
        .enumerate()
        .map(|(j, &s)| (s, points.iter().map(|p| p.seconds[j]).sum::<Duration>().as_secs_f64()))
        .collect();
    let slope = fit_slope(&mean_errors[..fine_idx]);
    let summary = Exp1Summary {
        slope,
        mean_errors: mean_errors.clone(),
        timing: timing.clone(),
        mu: ws.global.mu().unwrap_or(f64::INFINITY),
        eps_est: ws.global.eps_est(),
        sigma_est: ws.global.sigma_est().unwrap_or(f64::INFINITY),
        max_test_error: points.iter().map(|p| p.error).fold(0.0, f64::max),
        max_test_distance: points.iter().map(|p| p.distance).fold(0.0, f64::max),
    };

    let level_rows: Vec<Vec<String>> = mean_errors.iter().map(|&(s, e)| vec![s.to_string(), num(h_of(s)), num(e)]).collect();
    write_csv(&out.join("exp1_levels.csv"), &["level", "h", "mean_abs_err"], &level_rows)?;
    let timing_rows: Vec<Vec<String>> =
        timing.iter().map(|&(s, t)| vec![s.to_string(), n.to_string(), num(t), num(t / n)]).collect();
    write_csv(&out.join("exp1_timing.csv"), &["level", "n_test", "total_wall_seconds", "mean_wall_seconds"], &timing_rows)?;
    write_csv(
        &out.join("exp1_summary.csv"),
        &["c_rule", "slope", "global_dim", "mu", "eps_est", "sigma_est", "max_test_error", "max_test_distance"],
        &[vec![
            cfg.c_rule.to_string(),
            num(summary.slope),
            ws.global.dim().to_string(),
            num(summary.mu),
            num(summary.eps_est),
            num(summary.sigma_est),
            num(summary.max_test_error),
            num(summary.max_test_distance),
        ]],
    )?;
    if plots_on {
        let coarse: Vec<(u32, f64)> = mean_errors[..fine_idx].to_vec();
        let svg = plots::loglog(
            &format!("surrogate error, c = {}, fitted slope {:.2}", cfg.c_rule, slope),
            "mean |S_h - S_fine|",
            &[Series { label: "mean abs error".into(), points: coarse }],
        );
        write_text(&out.join("exp1_error.svg"), &svg)?;
        let svg = plots::loglog("surrogate wall time", "seconds (all test points)", &[Series { label: "wall time".into(), points: timing }]);
        write_text(&out.join("exp1_time.svg"), &svg)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct Exp2Summary {
    pub n_test: usize,
    pub cells: usize,
    /// `(level, agree with fine, agree with true)`.
    pub agreement: Vec<(u32, usize, usize)>,
    pub max_err_family: f64,
    pub max_err_global: f64,
}

struct Exp2Point {
    k_true: Option<usize>,
    /// Selected cell per level.
    k: Vec<usize>,
    /// `(level, cell, surrogate)`.
    surrogates: Vec<(u32, usize, f64)>,
    err_selected: f64,
    err_true_cell: Option<f64>,
    err_global: f64,
}

/// Selection agreement between coarse levels, the fine level and the true cell.
pub fn exp2(ws: &Workspace, plots_on: bool) -> Result<Exp2Summary, CliError> {
    let cfg = &ws.cfg;
    let out = prepare_output(cfg)?;
    let ev = ws.evaluator()?;
    let levels = cfg.levels();
    let results: Vec<Result<Exp2Point, CliError>> = ws
        .test_snapshots
        .par_iter()
        .zip(ws.test_params.par_iter())
        .enumerate()
        .map(|(i, (u, y))| {
            let at = || format!("test point {i}");
            let w = ws.ms.measure(u).ctx(at)?;
            let set = CandidateSet::build(&ws.family, &ws.ms, &w).ctx(at)?;
            let residuals = set
                .candidates()
                .par_iter()
                .map(|c| ev.fine_residuals(&c.estimate))
                .collect::<surrosel::Result<Vec<_>>>()
                .ctx(at)?;
            let mut k = Vec::with_capacity(levels.len());
            let mut surrogates = Vec::new();
            for &s in &levels {
                let vals: Vec<(usize, f64)> = set
                    .candidates()
                    .par_iter()
                    .zip(residuals.par_iter())
                    .map(|(c, r)| Ok((c.cell, ev.surrogate_from_residuals(r, s)?.distance)))
                    .collect::<surrosel::Result<_>>()
                    .ctx(|| format!("surrogates of test point {i} at level {s}"))?;
                let (ks, _) = argmin_lowest(&vals).expect("non-empty candidate set");
                k.push(ks);
                surrogates.extend(vals.iter().map(|&(c, v)| (s, c, v)));
            }
            let estimate_of = |cell: usize| set.candidates().iter().find(|c| c.cell == cell).map(|c| &c.estimate);
            let k_true = ws.family.locate(y);
            let err_selected = ws.error_norm(u, estimate_of(*k.last().expect("levels")).expect("selected"))?;
            let err_true_cell = match k_true.and_then(estimate_of) {
                Some(e) => Some(ws.error_norm(u, e)?),
                None => None,
            };
            let global = ws.global.pbdw_estimate(&ws.ms, &w).ctx(at)?;
            let err_global = ws.error_norm(u, &global)?;
            Ok(Exp2Point { k_true, k, surrogates, err_selected, err_true_cell, err_global })
        })
        .collect();

    let mut points = Vec::with_capacity(results.len());
    let mut failure = None;
    for r in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let one_based = |k: Option<usize>| k.map_or(String::new(), |k| (k + 1).to_string());
    let mut header: Vec<String> = vec!["test_idx".into(), "k_true".into(), "k_fine".into()];
    header.extend(levels.iter().map(|s| format!("k_level{s}")));
    header.extend(["err_selected".into(), "err_true_cell".into(), "err_global".into()]);
    let rows: Vec<Vec<String>> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r = vec![i.to_string(), one_based(p.k_true), one_based(p.k.last().copied())];
            r.extend(p.k.iter().map(|&k| (k + 1).to_string()));
            r.extend([num(p.err_selected), p.err_true_cell.map_or(String::new(), num), num(p.err_global)]);
            r
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join("exp2_selections.csv"), &header_refs, &rows)?;
    let srows: Vec<Vec<String>> = points
        .iter()
        .enumerate()
        .flat_map(|(i, p)| p.surrogates.iter().map(move |&(s, c, v)| vec![i.to_string(), s.to_string(), (c + 1).to_string(), num(v)]))
        .collect();
    write_csv(&out.join("exp2_surrogates.csv"), &["test_idx", "level", "cell", "surrogate"], &srows)?;
    if let Some(e) = failure {
        return Err(e);
    }

    let n = points.len();
    let fine_idx = levels.len() - 1;
    let agreement: Vec<(u32, usize, usize)> = levels
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let fine = points.iter().filter(|p| p.k[j] == p.k[fine_idx]).count();
            let truth = points.iter().filter(|p| Some(p.k[j]) == p.k_true).count();
            (s, fine, truth)
        })
        .collect();
    let arows: Vec<Vec<String>> = agreement
        .iter()
        .map(|&(s, f, t)| vec![cfg.c_rule.to_string(), s.to_string(), num(h_of(s)), f.to_string(), t.to_string(), n.to_string()])
        .collect();
    write_csv(&out.join("exp2_agreement.csv"), &["c_rule", "level", "h", "agree_fine", "agree_true", "n_test"], &arows)?;

    let cells = ws.family.len();
    let mut count_fine = vec![0usize; cells];
    let mut count_true = vec![0usize; cells];
    for p in &points {
        count_fine[p.k[fine_idx]] += 1;
        if let Some(k) = p.k_true {
            count_true[k] += 1;
        }
    }
    let hrows: Vec<Vec<String>> =
        (0..cells).map(|k| vec![(k + 1).to_string(), count_fine[k].to_string(), count_true[k].to_string()]).collect();
    write_csv(&out.join("exp2_histogram.csv"), &["cell", "count_fine", "count_true"], &hrows)?;

    let summary = Exp2Summary {
        n_test: n,
        cells,
        agreement,
        max_err_family: points.iter().map(|p| p.err_selected).fold(0.0, f64::max),
        max_err_global: points.iter().map(|p| p.err_global).fold(0.0, f64::max),
    };
    write_csv(
        &out.join("exp2_summary.csv"),
        &["c_rule", "cells", "n_test", "max_err_family", "max_err_global"],
        &[vec![cfg.c_rule.to_string(), cells.to_string(), n.to_string(), num(summary.max_err_family), num(summary.max_err_global)]],
    )?;
    if plots_on {
        let cats: Vec<String> = (1..=cells).map(|k| k.to_string()).collect();
        let svg = plots::bars(
            &format!("selected cells, c = {}", cfg.c_rule),
            "cell k",
            &cats,
            &[
                ("k* (fine surrogate)".into(), count_fine.iter().map(|&c| c as f64).collect()),
                ("k true".into(), count_true.iter().map(|&c| c as f64).collect()),
            ],
        );
        write_text(&out.join("exp2_histogram.svg"), &svg)?;
    }
    Ok(summary)
}

/// Reads whitespace- or comma-separated measurement values.
pub fn read_measurements(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| CliError::Config(format!("{}: `{t}` is not a number", path.display()))))
        .collect()
}

#[derive(Debug, Clone)]
pub struct EstimateOutput {
    pub k_star: usize,
    pub level: u32,
    pub u_star: FemVector,
    /// `(cell, surrogate)`; `None` for skipped cells.
    pub surrogates: Vec<(usize, Option<f64>)>,
}

/// Selects and writes the reconstruction for one measurement vector.
pub fn estimate(ws: &Workspace, w: &[f64], level: u32) -> Result<EstimateOutput, CliError> {
    let cfg = &ws.cfg;
    if !(2..=cfg.fine_level).contains(&level) {
        return Err(CliError::Config(format!("selection level {level} must lie in 2..={}", cfg.fine_level)));
    }
    let ev = ws.evaluator()?;
    let sel = surrosel::pipeline::select(&ev, &ws.family, &ws.ms, w, level).ctx(|| "estimation".into())?;
    let out = prepare_output(cfg)?;
    let mesh = ws.levels.fine().mesh();
    let nodal: Vec<Vec<String>> = sel
        .u_star
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let [x, y] = mesh.coordinates(mesh.interior_vertex(k));
            vec![k.to_string(), num(x), num(y), num(v)]
        })
        .collect();
    write_csv(&out.join("estimate_nodal.csv"), &["node", "x", "y", "value"], &nodal)?;
    let surrogates: Vec<(usize, Option<f64>)> = (0..ws.family.len()).map(|k| (k, sel.distance_of(k))).collect();
    let rows: Vec<Vec<String>> = surrogates
        .iter()
        .map(|&(k, s)| {
            vec![
                (k + 1).to_string(),
                s.map_or("skipped".into(), |_| "evaluated".into()),
                s.map_or(String::new(), num),
                u8::from(k == sel.k_star).to_string(),
            ]
        })
        .collect();
    write_csv(&out.join("estimate_cells.csv"), &["cell", "status", "surrogate", "selected"], &rows)?;
    Ok(EstimateOutput { k_star: sel.k_star, level, u_star: sel.u_star, surrogates })
}
