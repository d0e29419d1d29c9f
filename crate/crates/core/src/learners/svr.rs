//! Epsilon-insensitive support-vector regression with an RBF kernel.
//!
//! The dual is written in β = α − α* with −C ≤ β ≤ C and Σβ = 0:
//! minimise ½βᵀKβ − yᵀβ + ε‖β‖₁. Each step moves a pair (β_i += t, β_j −= t)
//! to the exact minimiser along that line. The target is standardised before
//! fitting, so C and ε are in units of the target's standard deviation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    /// `None` means 1 / (p · var(X)).
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_passes: usize,
    /// Hard cap on sweeps over the data.
    pub max_sweeps: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self { c: 10.0, epsilon: 0.1, gamma: None, tol: 1e-3, max_passes: 50, max_sweeps: 2_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Svr {
    pub support: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub b: f64,
    pub gamma: f64,
    pub y_mean: f64,
    pub y_scale: f64,
    pub converged: bool,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    (-gamma * d).exp()
}

/// Default gamma: 1 / (p · variance of all entries of X).
pub fn scale_gamma(rows: &[Vec<f64>]) -> f64 {
    let p = rows.first().map_or(0, Vec::len);
    let all: Vec<f64> = rows.iter().flatten().copied().collect();
    let n = all.len() as f64;
    if n == 0.0 || p == 0 {
        return 1.0;
    }
    let mean = all.iter().sum::<f64>() / n;
    let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (p as f64 * var)
    } else {
        1.0
    }
}

struct Dual<'a> {
    k: &'a [Vec<f64>],
    c: f64,
    eps: f64,
    beta: Vec<f64>,
    /// g_i = Σ_k β_k K_ik − y_i
    g: Vec<f64>,
}

impl Dual<'_> {
    /// Objective change for β_i += t, β_j −= t.
    fn delta(&self, i: usize, j: usize, t: f64) -> f64 {
        let eta = self.k[i][i] + self.k[j][j] - 2.0 * self.k[i][j];
        let (bi, bj) = (self.beta[i], self.beta[j]);
        t * (self.g[i] - self.g[j]) + 0.5 * eta * t * t
            + self.eps * ((bi + t).abs() - bi.abs() + (bj - t).abs() - bj.abs())
    }

    /// Exact minimiser of the convex piecewise quadratic over the feasible box.
    fn best_step(&self, i: usize, j: usize) -> (f64, f64) {
        let (bi, bj, c) = (self.beta[i], self.beta[j], self.c);
        let lo = (-c - bi).max(bj - c);
        let hi = (c - bi).min(bj + c);
        if !(hi > lo) {
            return (0.0, 0.0);
        }
        let eta = self.k[i][i] + self.k[j][j] - 2.0 * self.k[i][j];
        let mut points = vec![lo, hi];
        for bp in [-bi, bj] {
            if bp > lo && bp < hi {
                points.push(bp);
            }
        }
        points.sort_by(f64::total_cmp);
        let mut cands = points.clone();
        for w in points.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let si = (bi + mid).signum();
            let sj = (bj - mid).signum();
            if eta > 1e-12 {
                let t = -((self.g[i] - self.g[j]) + self.eps * (si - sj)) / eta;
                cands.push(t.clamp(w[0], w[1]));
            }
        }
        let mut best = (0.0, 0.0);
        for t in cands {
            let d = self.delta(i, j, t);
            if d < best.1 {
                best = (t, d);
            }
        }
        best
    }

    fn apply(&mut self, i: usize, j: usize, t: f64) {
        self.beta[i] += t;
        self.beta[j] -= t;
        for (m, g) in self.g.iter_mut().enumerate() {
            *g += t * (self.k[m][i] - self.k[m][j]);
        }
    }

    /// Bias from free support vectors, else the midpoint of the feasible interval.
    fn bias(&self) -> f64 {
        let c = self.c;
        let free: Vec<f64> = self
            .beta
            .iter()
            .zip(&self.g)
            .filter(|(b, _)| b.abs() > 1e-12 && b.abs() < c - 1e-12)
            .map(|(b, g)| if *b > 0.0 { -self.eps - g } else { self.eps - g })
            .collect();
        if !free.is_empty() {
            return free.iter().sum::<f64>() / free.len() as f64;
        }
        let mut lb = f64::NEG_INFINITY;
        let mut ub = f64::INFINITY;
        for (b, g) in self.beta.iter().zip(&self.g) {
            if b.abs() <= 1e-12 {
                lb = lb.max(-self.eps - g);
                ub = ub.min(self.eps - g);
            } else if *b >= c - 1e-12 {
                ub = ub.min(-self.eps - g);
            } else {
                lb = lb.max(self.eps - g);
            }
        }
        match (lb.is_finite(), ub.is_finite()) {
            (true, true) => 0.5 * (lb + ub),
            (true, false) => lb,
            (false, true) => ub,
            _ => 0.0,
        }
    }

    /// Whether moving β_i alone (with bias b) would lower the objective by more than tol.
    fn violates(&self, i: usize, b: f64, tol: f64) -> bool {
        let e = self.g[i] + b;
        let bi = self.beta[i];
        let up = e + if bi >= 0.0 { self.eps } else { -self.eps };
        let down = -e + if bi <= 0.0 { self.eps } else { -self.eps };
        (bi < self.c && up < -tol) || (bi > -self.c && down < -tol)
    }
}

impl Svr {
    pub fn fit(rows: &[Vec<f64>], y: &[f64], hp: &SvrParams, seed: u64) -> Self {
        let n = y.len();
        let gamma = hp.gamma.unwrap_or_else(|| scale_gamma(rows));
        let y_mean = y.iter().sum::<f64>() / n.max(1) as f64;
        let sd = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
        let y_scale = if sd > 1e-12 * (1.0 + y_mean.abs()) { sd } else { 1.0 };
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();
        let k: Vec<Vec<f64>> = crate::par::map(rows, |a| rows.iter().map(|b| rbf(a, b, gamma)).collect());
        let mut dual = Dual { k: &k, c: hp.c, eps: hp.epsilon, beta: vec![0.0; n], g: ys.iter().map(|v| -v).collect() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut passes = 0;
        let mut sweeps = 0;
        let mut b = dual.bias();
        while passes < hp.max_passes && sweeps < hp.max_sweeps && n >= 2 {
            sweeps += 1;
            let mut changed = 0;
            for i in 0..n {
                if !dual.violates(i, b, hp.tol) {
                    continue;
                }
                let mut j = (0..n)
                    .filter(|&j| j != i)
                    .max_by(|&a, &c| (dual.g[i] - dual.g[a]).abs().total_cmp(&(dual.g[i] - dual.g[c]).abs()).then(c.cmp(&a)))
                    .expect("n >= 2");
                let (mut t, mut d) = dual.best_step(i, j);
                if !(d < -1e-14) {
                    j = rng.random_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    (t, d) = dual.best_step(i, j);
                }
                if d < -1e-14 && t.abs() > 1e-14 {
                    dual.apply(i, j, t);
                    b = dual.bias();
                    changed += 1;
                }
            }
            passes = if changed == 0 { passes + 1 } else { 0 };
        }
        let converged = passes >= hp.max_passes || n < 2;
        let keep: Vec<usize> = (0..n).filter(|&i| dual.beta[i] != 0.0).collect();
        Self {
            support: keep.iter().map(|&i| rows[i].clone()).collect(),
            beta: keep.iter().map(|&i| dual.beta[i]).collect(),
            b,
            gamma,
            y_mean,
            y_scale,
            converged,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let f: f64 = self.support.iter().zip(&self.beta).map(|(s, b)| b * rbf(s, row, self.gamma)).sum::<f64>() + self.b;
        self.y_mean + self.y_scale * f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target_inside_tube() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 10.0]).collect();
        let s = Svr::fit(&rows, &[4.0; 20], &SvrParams::default(), 0);
        for r in &rows {
            assert!((s.predict_row(r) - 4.0).abs() <= 0.1);
        }
        assert!(s.beta.is_empty());
    }

    #[test]
    fn smooth_function_fits() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 50.0 - 1.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| (3.0 * r[0]).sin()).collect();
        let hp = SvrParams::default();
        let s = Svr::fit(&rows, &y, &hp, 1);
        let mae = rows.iter().zip(&y).map(|(r, v)| (s.predict_row(r) - v).abs()).sum::<f64>() / 100.0;
        assert!(mae < 2.0 * hp.epsilon * s.y_scale, "mae {mae}");
    }

    #[test]
    fn duplicate_rows_same_prediction() {
        let mut rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64).sin(), (i as f64).cos()]).collect();
        rows.push(rows[3].clone());
        let mut y: Vec<f64> = (0..30).map(|i| i as f64 % 5.0).collect();
        y.push(y[3]);
        let s = Svr::fit(&rows, &y, &SvrParams::default(), 2);
        assert_eq!(s.predict_row(&rows[3]), s.predict_row(&rows[30]));
    }

    /// Brute-force grid over a 6-point dual: the SMO objective must be no
    /// worse than the best feasible grid point.
    #[test]
    fn dual_matches_grid_on_toy_problem() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0]).collect();
        let y = [0.0, 0.5, 0.9, 1.0, 0.6, 0.1];
        let hp = SvrParams { c: 1.0, epsilon: 0.1, gamma: Some(1.0), tol: 1e-6, ..Default::default() };
        let s = Svr::fit(&rows, &y, &hp, 0);
        let ys: Vec<f64> = y.iter().map(|v| (v - s.y_mean) / s.y_scale).collect();
        let k: Vec<Vec<f64>> = rows.iter().map(|a| rows.iter().map(|b| rbf(a, b, 1.0)).collect()).collect();
        let obj = |beta: &[f64]| -> f64 {
            let mut o = 0.0;
            for i in 0..6 {
                for j in 0..6 {
                    o += 0.5 * beta[i] * beta[j] * k[i][j];
                }
                o += -ys[i] * beta[i] + hp.epsilon * beta[i].abs();
            }
            o
        };
        let mut full = vec![0.0; 6];
        for (sv, b) in s.support.iter().zip(&s.beta) {
            let i = rows.iter().position(|r| r == sv).unwrap();
            full[i] = *b;
        }
        assert!(full.iter().sum::<f64>().abs() < 1e-9);
        assert!(full.iter().all(|b| b.abs() <= hp.c + 1e-12));
        let attained = obj(&full);
        // grid over the first five coordinates, the sixth closes the sum
        let steps: Vec<f64> = (0..=8).map(|i| -1.0 + 0.25 * i as f64).collect();
        let mut best = f64::INFINITY;
        let mut beta = [0.0; 6];
        for a in &steps {
            for b in &steps {
                for c in &steps {
                    for d in &steps {
                        for e in &steps {
                            beta[..5].copy_from_slice(&[*a, *b, *c, *d, *e]);
                            beta[5] = -(a + b + c + d + e);
                            if beta[5].abs() <= 1.0 {
                                best = best.min(obj(&beta));
                            }
                        }
                    }
                }
            }
        }
        assert!(attained <= best + 1e-9, "{attained} vs grid {best}");
    }
}
