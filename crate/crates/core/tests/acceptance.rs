//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line and then asserts.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use unicrop::acquire::{evi, irrigation};
use unicrop::engineer::{compute_gdd, count_chill_nights, interaction_terms, sar_texture, seasonal_amplitude};
use unicrop::evaluate::{
    compute_metrics, fit_ensemble_weights, kfold_split, run_fold, shapley_importance, CvConfig,
    ShapleyMode,
};
use unicrop::frame::FieldFrame;
use unicrop::pipeline::{run_pipeline, RunConfig};
use unicrop::preprocess::{IterativeImputer, KnnImputer, MedianImputer};
use unicrop::select::mrmr::{mrmr_select, Criterion};
use unicrop::select::{select_features, SelectConfig};
use unicrop::series::TimeSeries;
use unicrop::synth::{generate, SynthConfig, PLANTED_SIGNALS};
use unicrop::Family;

fn report(id: u32, name: &str, pass: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let within = elapsed < limit;
    let verdict = if pass && within { "PASS" } else { "FAIL" };
    let line = format!(
        "ACCEPTANCE {id:>2} {name}: {verdict} ({detail}; {:.2}s, limit {}s)\n",
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "criterion {id} failed: {detail}");
    assert!(within, "criterion {id} exceeded its runtime limit");
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

// ---------------------------------------------------------------------------
// Independent oracle for mRMR: own binning, MI, correlations and greedy search.

fn oracle_bins(v: &[f64]) -> (Vec<usize>, usize) {
    let n = v.len();
    let b = ((n as f64 / 5.0).sqrt().floor() as usize).clamp(2, 8);
    let labels = v
        .iter()
        .map(|x| {
            let below = v.iter().filter(|u| *u < x).count();
            (below * b / n).min(b - 1)
        })
        .collect();
    (labels, b)
}

fn oracle_mi(a: &[f64], b: &[f64]) -> f64 {
    let (la, _) = oracle_bins(a);
    let (lb, _) = oracle_bins(b);
    let n = a.len() as f64;
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut ma: HashMap<usize, f64> = HashMap::new();
    let mut mb: HashMap<usize, f64> = HashMap::new();
    for (x, y) in la.iter().zip(&lb) {
        *joint.entry((*x, *y)).or_default() += 1.0;
        *ma.entry(*x).or_default() += 1.0;
        *mb.entry(*y).or_default() += 1.0;
    }
    joint
        .iter()
        .map(|((x, y), c)| {
            let pxy = c / n;
            pxy * (pxy / ((ma[x] / n) * (mb[y] / n))).ln()
        })
        .sum::<f64>()
        .max(0.0)
}

fn oracle_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn oracle_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let less = v.iter().filter(|u| *u < x).count() as f64;
            let equal = v.iter().filter(|u| *u == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn oracle_minmax(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    v.iter().map(|x| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 }).collect()
}

/// Greedy trace recomputed from scratch: at each step every remaining candidate
/// is scored against the current selection and the best is taken.
fn oracle_mrmr(cols: &[Vec<f64>], y: &[f64], k: usize, mode: Criterion, eps: f64) -> Vec<(usize, f64)> {
    let m = cols.len();
    let mi: Vec<f64> = cols.iter().map(|c| oracle_mi(c, y)).collect();
    let pr: Vec<f64> = cols.iter().map(|c| oracle_pearson(c, y).abs()).collect();
    let ry = oracle_ranks(y);
    let sr: Vec<f64> = cols.iter().map(|c| oracle_pearson(&oracle_ranks(c), &ry).abs()).collect();
    let (a, b, c) = (oracle_minmax(&mi), oracle_minmax(&pr), oracle_minmax(&sr));
    let rel: Vec<f64> = (0..m).map(|j| (a[j] + b[j] + c[j]) / 3.0).collect();
    let mut pair = vec![vec![0.0; m]; m];
    let mut max = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                pair[i][j] = oracle_mi(&cols[i], &cols[j]);
                max = max.max(pair[i][j]);
            }
        }
    }
    let mut chosen: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    while chosen.len() < k.min(m) {
        let mut best: Option<(usize, f64)> = None;
        for f in (0..m).filter(|f| !chosen.contains(f)) {
            let s = if chosen.is_empty() {
                rel[f]
            } else {
                let red = chosen.iter().map(|&s| if max > 0.0 { pair[f][s] / max } else { 0.0 }).sum::<f64>()
                    / chosen.len() as f64;
                match mode {
                    Criterion::Difference => rel[f] - red,
                    Criterion::Ratio => rel[f] / (red + eps),
                }
            };
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((f, s));
            }
        }
        let (f, s) = best.unwrap();
        chosen.push(f);
        trace.push((f, s));
    }
    trace
}

#[test]
fn criterion_01_mrmr_oracle_equivalence() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut mismatches = Vec::new();
    let mut steps = 0;
    for pool in 0..30 {
        let n = 200;
        let p = rng.random_range(2..=6);
        let k = rng.random_range(1..=3);
        let latent: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| normal(&mut rng)).collect()).collect();
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| {
                let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let noise = rng.random_range(0.1..1.5);
                (0..n)
                    .map(|i| (0..3).map(|l| w[l] * latent[l][i]).sum::<f64>() + noise * normal(&mut rng))
                    .collect()
            })
            .collect();
        let y: Vec<f64> = (0..n).map(|i| latent[0][i] + 0.5 * latent[1][i].powi(2) + 0.3 * normal(&mut rng)).collect();
        let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        for mode in [Criterion::Difference, Criterion::Ratio] {
            let got = mrmr_select(&names, &refs, &y, k, mode, 1e-9).unwrap();
            let want = oracle_mrmr(&cols, &y, k, mode, 1e-9);
            steps += want.len();
            let same = got.len() == want.len()
                && got.iter().zip(&want).all(|(g, (f, s))| {
                    g.name == names[*f] && (g.score - s).abs() <= 1e-9 * s.abs().max(1.0)
                });
            if !same {
                mismatches.push(format!("pool {pool} {mode}"));
            }
        }
    }
    let detail = format!("60 traces, {steps} greedy steps, mismatches {mismatches:?}");
    report(1, "mrmr_oracle_equivalence", mismatches.is_empty(), t0.elapsed(), Duration::from_secs(30), &detail);
}

#[test]
fn criterion_02_redundancy_behaviour() {
    let t0 = Instant::now();
    let names: Vec<String> = ["f1", "f2", "f3"].iter().map(|s| s.to_string()).collect();
    let families = vec![Family::Vegetation; 3];
    let mut hits = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 200;
        let y: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let f3: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let dense = vec![y.clone(), y.clone(), f3];
        let raw: Vec<Vec<Option<f64>>> = dense.iter().map(|c| c.iter().map(|v| Some(*v)).collect()).collect();
        let cfg = SelectConfig { k: 2, ..Default::default() };
        let r = select_features(&names, &families, &raw, &dense, &y, &cfg).unwrap();
        if r.selected_names() == ["f1", "f3"] {
            hits += 1;
        }
    }
    report(2, "redundancy_behaviour", hits == 100, t0.elapsed(), Duration::from_secs(5), &format!("[f1, f3] in {hits}/100"));
}

#[test]
fn criterion_03_ensemble_solver() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for prob in 0..50 {
        let n = 300;
        let y: Vec<f64> = (0..n).map(|_| 5.0 * normal(&mut rng)).collect();
        let common: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let preds: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let bias = rng.random_range(-1.0..1.0);
                let shared = rng.random_range(0.0..2.0);
                let own = rng.random_range(0.2..3.0);
                let scale = rng.random_range(0.7..1.1);
                (0..n).map(|i| scale * y[i] + bias + shared * common[i] + own * normal(&mut rng)).collect()
            })
            .collect();
        let w = fit_ensemble_weights(&preds, &y).unwrap();
        // Gram form for the grid
        let g: Vec<Vec<f64>> =
            (0..3).map(|a| (0..3).map(|b| (0..n).map(|i| preds[a][i] * preds[b][i]).sum()).collect()).collect();
        let py: Vec<f64> = (0..3).map(|a| (0..n).map(|i| preds[a][i] * y[i]).sum()).collect();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let obj = |w: [f64; 3]| {
            let mut q = yy;
            for a in 0..3 {
                q -= 2.0 * w[a] * py[a];
                for b in 0..3 {
                    q += w[a] * w[b] * g[a][b];
                }
            }
            q
        };
        let mut grid = f64::INFINITY;
        for i in 0..=1000 {
            for j in 0..=(1000 - i) {
                let (a, b) = (i as f64 / 1000.0, j as f64 / 1000.0);
                grid = grid.min(obj([a, b, 1.0 - a - b]));
            }
        }
        let attained: f64 = (0..n)
            .map(|i| (y[i] - (0..3).map(|j| w.weights[j] * preds[j][i]).sum::<f64>()).powi(2))
            .sum();
        let vertex = (0..3).map(|j| {
            let mut e = [0.0; 3];
            e[j] = 1.0;
            obj(e)
        });
        let best_vertex = vertex.fold(f64::INFINITY, f64::min);
        let feasible = w.weights.iter().all(|v| *v >= -1e-12) && (w.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        let gap = attained - grid;
        worst_gap = worst_gap.max(gap);
        let consistent = (attained - w.objective).abs() <= 1e-9 * attained.max(1.0);
        if !(feasible && gap <= 1e-6 && attained <= best_vertex + 1e-9 * best_vertex && consistent) {
            failures.push(prob);
        }
    }
    let detail = format!("50 problems, max(attained - grid) = {worst_gap:.3e}, failures {failures:?}");
    report(3, "ensemble_solver", failures.is_empty(), t0.elapsed(), Duration::from_secs(60), &detail);
}

fn leakage_frame(rng: &mut ChaCha8Rng, n: usize) -> FieldFrame {
    let families = [
        Family::Meteorology,
        Family::Meteorology,
        Family::Meteorology,
        Family::Vegetation,
        Family::Vegetation,
        Family::Sar,
        Family::Soil,
        Family::Soil,
        Family::Topography,
    ];
    let z: Vec<[f64; 3]> = (0..n).map(|_| [normal(rng), normal(rng), normal(rng)]).collect();
    let mut columns = Vec::new();
    for j in 0..families.len() {
        let col: Vec<Option<f64>> = (0..n)
            .map(|i| {
                let v = z[i][j % 3] * (1.0 + j as f64 * 0.1) + 0.5 * normal(rng) + j as f64;
                (rng.random::<f64>() >= 0.2).then_some(v)
            })
            .collect();
        columns.push(col);
    }
    let y = z.iter().map(|r| 100.0 * r[0] + 40.0 * r[1].sin() + 20.0 * normal(rng)).collect();
    FieldFrame {
        field_ids: (0..n).map(|i| format!("F{i:03}")).collect(),
        groups: (0..n).map(|i| (format!("D{}", i % 3), if i % 2 == 0 { "Wet" } else { "Dry" }.to_string())).collect(),
        y,
        names: (0..families.len()).map(|j| format!("v{j}")).collect(),
        families: families.to_vec(),
        columns,
    }
}

fn quick_cv() -> CvConfig {
    let mut cfg = CvConfig::default();
    cfg.select.k = 5;
    cfg.learners.random_forest.trees = 40;
    cfg.learners.gradient_boosting.rounds = 60;
    cfg
}

#[test]
fn criterion_04_leakage_sentinel() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let frame = leakage_frame(&mut rng, 200);
    let missing = frame.columns.iter().flatten().filter(|v| v.is_none()).count() as f64
        / (frame.columns.len() * frame.n_rows()) as f64;
    let cfg = quick_cv();
    let assignment = kfold_split(frame.n_rows(), cfg.folds, cfg.seed).unwrap();
    let mut leaks = Vec::new();
    for fold in 0..cfg.folds {
        let (before, _) = run_fold(&frame, &assignment, fold, &cfg).unwrap();
        let mut mutated = frame.clone();
        for &r in &assignment.valid_rows(fold) {
            mutated.y[r] = 1e6 * rng.random::<f64>() - 5e5;
            for col in mutated.columns.iter_mut() {
                col[r] = if rng.random_bool(0.5) { Some(1e4 * normal(&mut rng)) } else { None };
            }
        }
        let (after, _) = run_fold(&mutated, &assignment, fold, &cfg).unwrap();
        let same_dump = before.preprocessor.dump() == after.preprocessor.dump();
        if before != after || !same_dump {
            leaks.push(fold);
        }
    }
    let detail = format!("200 rows, {:.1}% missing, folds with changed parameters {leaks:?}", missing * 100.0);
    report(4, "leakage_sentinel", leaks.is_empty(), t0.elapsed(), Duration::from_secs(30), &detail);
}

fn oracle_percentile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (s.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

#[test]
fn criterion_05_imputer_correctness() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);

    // linear fixture
    let n = 200;
    let x1: Vec<f64> = (0..n).map(|_| rng.random_range(100.0..300.0)).collect();
    let c1: Vec<Option<f64>> = x1.iter().map(|v| Some(*v)).collect();
    let c2: Vec<Option<f64>> = x1.iter().map(|v| (!rng.random_bool(0.2)).then_some(2.0 * v)).collect();
    let names = vec!["x1".to_string(), "x2".to_string()];
    let cols = vec![c1, c2];
    let it = IterativeImputer::fit(&names, &cols).unwrap();
    let filled = it.apply(&cols);
    let linear_err = (0..n)
        .map(|i| (filled[0][i] - x1[i]).abs().max((filled[1][i] - 2.0 * x1[i]).abs()))
        .fold(0.0, f64::max);

    // KNN k = 1 against brute force
    let mut knn_bad = 0;
    let mut knn_cells = 0;
    for trial in 0..60 {
        let rows = rng.random_range(6..=50);
        let p = rng.random_range(2..=5);
        let cols: Vec<Vec<Option<f64>>> = (0..p)
            .map(|_| (0..rows).map(|_| (rng.random::<f64>() >= 0.2).then(|| normal(&mut rng) * 10.0)).collect())
            .collect();
        let groups = vec![("G".to_string(), "S".to_string()); rows];
        let names: Vec<String> = (0..p).map(|j| format!("c{j}")).collect();
        let imp = KnnImputer::fit(&names, &cols, &groups, 1);
        let (out, _) = imp.apply(&cols, &groups);
        let scale: Vec<(f64, f64)> = cols
            .iter()
            .map(|c| {
                let v: Vec<f64> = c.iter().flatten().copied().collect();
                if v.is_empty() {
                    return (0.0, 1.0);
                }
                let spread = oracle_percentile(&v, 0.75) - oracle_percentile(&v, 0.25);
                (oracle_percentile(&v, 0.5), if spread < 1e-12 { 1.0 } else { spread })
            })
            .collect();
        for i in 0..rows {
            for j in 0..p {
                if cols[j][i].is_some() {
                    continue;
                }
                let mut best: Option<(f64, usize)> = None;
                for r in 0..rows {
                    let Some(_) = cols[j][r] else { continue };
                    let mut sum = 0.0;
                    let mut used = 0;
                    for l in (0..p).filter(|&l| l != j) {
                        if let (Some(a), Some(b)) = (cols[l][i], cols[l][r]) {
                            let d = (a - scale[l].0) / scale[l].1 - (b - scale[l].0) / scale[l].1;
                            sum += d * d;
                            used += 1;
                        }
                    }
                    if used == 0 {
                        continue;
                    }
                    let d = (sum * p as f64 / used as f64).sqrt();
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, r));
                    }
                }
                let Some((_, r)) = best else { continue };
                knn_cells += 1;
                if out[j][i] != cols[j][r].unwrap() {
                    knn_bad += 1;
                    eprintln!("trial {trial}: cell ({i},{j}) got {} want {}", out[j][i], cols[j][r].unwrap());
                }
            }
        }
    }

    // median by hand
    let med = MedianImputer::fit(
        &["a".to_string(), "b".to_string()],
        &[vec![Some(3.0), None, Some(1.0), Some(2.0)], vec![Some(4.0), Some(1.0), None, Some(10.0), Some(2.0)]],
    );
    let median_ok = med.medians == vec![2.0, 3.0];

    let pass = linear_err <= 1e-6 && knn_bad == 0 && knn_cells > 0 && median_ok;
    let detail = format!("linear max err {linear_err:.2e}, knn {knn_bad}/{knn_cells} mismatches, medians {:?}", med.medians);
    report(5, "imputer_correctness", pass, t0.elapsed(), Duration::from_secs(10), &detail);
}

#[test]
fn criterion_06_metric_identities() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut bad = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..40);
        let y: Vec<f64> = (0..n).map(|_| 1000.0 + 300.0 * normal(&mut rng)).collect();
        let yhat: Vec<f64> = y.iter().map(|v| v + 100.0 * normal(&mut rng)).collect();
        let m = compute_metrics(&y, &yhat).unwrap();
        let mse = y.iter().zip(&yhat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
        let ok_order = m.rmse >= m.mae;
        let ok_mse = ((m.rmse * m.rmse - mse) / mse).abs() <= 1e-12;
        let perfect = compute_metrics(&y, &y).unwrap().r2 == Some(1.0);
        let mean = y.iter().sum::<f64>() / n as f64;
        let flat = compute_metrics(&y, &vec![mean; n]).unwrap().r2.map_or(false, |r| r.abs() <= 1e-12);
        if !(ok_order && ok_mse && perfect && flat) {
            bad += 1;
        }
    }
    let hand = compute_metrics(&[100.0, 200.0], &[110.0, 180.0]).unwrap();
    let hand_ok = hand.rmse == 250f64.sqrt() && hand.mae == 15.0 && hand.mape == Some(10.0);
    let detail = format!("{bad}/1000 identity violations, hand example rmse={} mae={} mape={:?}", hand.rmse, hand.mae, hand.mape);
    report(6, "metric_identities", bad == 0 && hand_ok, t0.elapsed(), Duration::from_secs(5), &detail);
}

#[test]
fn criterion_07_shapley() {
    let t0 = Instant::now();
    let add = |x: &[f64]| x[0] + 2.0 * x[1];
    let a = shapley_importance(&add, &[vec![1.0, 1.0]], &[vec![0.0, 0.0]], ShapleyMode::Exact, 0).unwrap();
    let hand_ok = a.phi[0] == vec![1.0, 2.0];

    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let f = |x: &[f64]| x[0] * x[1] + x[2].sin() * x[3] + 0.5 * x[4] * x[4] + x[5] * x[6] * x[7] + 0.3 * x[6];
    let explain: Vec<Vec<f64>> = (0..8).map(|_| (0..8).map(|_| normal(&mut rng)).collect()).collect();
    let background: Vec<Vec<f64>> = (0..10).map(|_| (0..8).map(|_| normal(&mut rng)).collect()).collect();
    let exact = shapley_importance(&f, &explain, &background, ShapleyMode::Exact, 0).unwrap();
    let local = exact
        .phi
        .iter()
        .zip(&exact.predictions)
        .map(|(phi, pred)| (exact.base + phi.iter().sum::<f64>() - pred).abs())
        .fold(0.0, f64::max);
    let sampled = shapley_importance(&f, &explain, &background, ShapleyMode::Sampled(5000), 11).unwrap();
    // per row: mean |phi_sampled - phi_exact| relative to max |phi_exact|
    let mut worst = 0.0f64;
    for (e, s) in exact.phi.iter().zip(&sampled.phi) {
        let mean_abs: f64 = e.iter().zip(s).map(|(a, b)| (a - b).abs()).sum::<f64>() / e.len() as f64;
        let max_exact = e.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        worst = worst.max(mean_abs / max_exact);
    }
    let pass = hand_ok && local <= 1e-10 && worst <= 0.05;
    let detail = format!(
        "hand phi {:?}, max local-accuracy error {local:.1e}, sampled mean abs error {:.2}% of max |phi|",
        a.phi[0],
        worst * 100.0
    );
    report(7, "shapley", pass, t0.elapsed(), Duration::from_secs(60), &detail);
}

#[test]
fn criterion_08_engineered_formulas() {
    let t0 = Instant::now();
    let d = |i: u32| chrono::NaiveDate::from_ymd_opt(2022, 6, i).unwrap();
    let ts = |vals: &[f64]| {
        let dates: Vec<_> = (1..=vals.len() as u32).map(d).collect();
        let v: Vec<Option<f64>> = vals.iter().map(|x| Some(*x)).collect();
        TimeSeries::from_values(&dates, &v)
    };
    let mut checks: Vec<(&str, bool)> = Vec::new();
    checks.push(("gdd (30,20)", compute_gdd(&ts(&[30.0]), &ts(&[20.0])).unwrap().gdd == 15.0));
    checks.push(("gdd (8,6)", compute_gdd(&ts(&[8.0]), &ts(&[6.0])).unwrap().gdd == 0.0));
    checks.push(("gdd two days", compute_gdd(&ts(&[30.0, 12.0]), &ts(&[20.0, 10.0])).unwrap().gdd == 16.0));
    checks.push(("chill nights", count_chill_nights(&ts(&[14.0, 16.0, 15.0, 10.0])) == 2));
    checks.push(("amplitude", (seasonal_amplitude(&ts(&[0.2, 0.5, 0.8, 0.6])).unwrap() - 0.6).abs() < 1e-12));
    checks.push(("texture", sar_texture(&ts(&[-10.0, -12.0])) == Some(2f64.sqrt())));
    checks.push(("evi", (evi(0.5, 0.1, 0.05).unwrap() - 2.5 * 0.4 / 1.725).abs() < 1e-15));
    checks.push(("irrigation", irrigation(5.0, 3.0) == 2.0 && irrigation(2.0, 3.0) == 0.0));
    let inter = interaction_terms(Some(0.3), Some(200.0), Some(0.0), Some(25.0));
    checks.push(("interaction", inter.clay_x_radiation == Some(0.3 * 200.0) && inter.elevation_x_temperature == Some(0.0)));
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let detail = format!("{} hand examples, failed {failed:?}", checks.len());
    report(8, "engineered_formulas", failed.is_empty(), t0.elapsed(), Duration::from_secs(5), &detail);
}

// ---------------------------------------------------------------------------
// Synthetic benchmark shared by criteria 9 and 10.

struct Bench {
    _dir: tempfile::TempDir,
    root: PathBuf,
    first_run: Duration,
}

fn bench_config(root: &Path, out: &str) -> RunConfig {
    let mut cfg = RunConfig::from_file(&root.join("unicrop.conf")).unwrap();
    cfg.output_dir = root.join(out);
    cfg
}

fn bench() -> &'static Bench {
    static BENCH: OnceLock<Bench> = OnceLock::new();
    BENCH.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        generate(&root, &SynthConfig::default()).unwrap();
        let t0 = Instant::now();
        run_pipeline(&bench_config(&root, "run_a")).unwrap();
        Bench { _dir: dir, root, first_run: t0.elapsed() }
    })
}

fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    rdr.records()
        .map(|r| header.iter().cloned().zip(r.unwrap().iter().map(String::from)).collect())
        .collect()
}

#[test]
fn criterion_09_synthetic_end_to_end() {
    let t0 = Instant::now();
    let b = bench();
    let out = b.root.join("run_a");
    let metrics = read_csv(&out.join("metrics_report.csv"));
    let r2: f64 = metrics.iter().find(|r| r["model"] == "ensemble").unwrap()["r2"].parse().unwrap();
    let selection = read_csv(&out.join("selection_report.csv"));
    let mut recovered: BTreeMap<String, usize> = BTreeMap::new();
    for row in selection.iter().filter(|r| r["action"] == "select" && r["fold"] != "final") {
        if PLANTED_SIGNALS.contains(&row["feature"].as_str()) {
            *recovered.entry(row["fold"].clone()).or_default() += 1;
        }
    }
    let good_folds = recovered.values().filter(|c| **c >= 4).count();
    let elapsed = b.first_run.max(t0.elapsed());
    let detail = format!("ensemble OOF R2 {r2:.4}, planted signals recovered per fold {recovered:?}");
    report(9, "synthetic_end_to_end", r2 >= 0.60 && good_folds >= 4, elapsed, Duration::from_secs(300), &detail);
}

fn artifact_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "run_summary.txt")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn criterion_10_determinism_and_resume() {
    let t0 = Instant::now();
    let b = bench();
    run_pipeline(&bench_config(&b.root, "run_b")).unwrap();

    // resume: copy a finished run, damage the engineer and evaluate outputs, rerun
    let c = b.root.join("run_c");
    std::fs::create_dir_all(&c).unwrap();
    for (name, bytes) in artifact_bytes(&b.root.join("run_a")) {
        std::fs::write(c.join(name), bytes).unwrap();
    }
    std::fs::remove_file(c.join("metrics_report.csv")).unwrap();
    std::fs::write(c.join("master_table.csv"), "truncated").unwrap();
    let resumed = run_pipeline(&bench_config(&b.root, "run_c")).unwrap();
    let skipped: Vec<&str> = resumed.skipped().iter().map(|s| s.as_str()).collect();

    let a = artifact_bytes(&b.root.join("run_a"));
    let mut diffs = Vec::new();
    for (label, other) in [("run_b", artifact_bytes(&b.root.join("run_b"))), ("run_c", artifact_bytes(&c))] {
        if other.keys().ne(a.keys()) {
            diffs.push(format!("{label}: file sets differ"));
        }
        for (name, bytes) in &a {
            if other.get(name) != Some(bytes) {
                diffs.push(format!("{label}: {name}"));
            }
        }
    }
    let pass = diffs.is_empty() && skipped == ["schema_config", "acquire", "harmonize"];
    let detail = format!("{} artifact files compared, resumed run skipped {skipped:?}, differences {diffs:?}", a.len());
    let elapsed = b.first_run + t0.elapsed();
    report(10, "determinism_and_resume", pass, elapsed, Duration::from_secs(600), &detail);
}
