//! Elastic net by cyclic coordinate descent.

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticNetParams {
    pub alpha: f64,
    pub l1_ratio: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ElasticNetParams {
    fn default() -> Self {
        Self { alpha: 0.1, l1_ratio: 0.5, max_iter: 10_000, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticNet {
    pub coefs: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

impl ElasticNet {
    /// Minimises (1/2n)|y - Xw - b|^2 + alpha*(l1_ratio*|w|_1 + (1-l1_ratio)/2*|w|^2)
    /// over column-major `x`, with an unpenalised intercept.
    pub fn fit(x: &[Vec<f64>], y: &[f64], hp: &ElasticNetParams) -> Self {
        let p = x.len();
        let n = y.len();
        let nf = n as f64;
        let y_mean = y.iter().sum::<f64>() / nf;
        let means: Vec<f64> = x.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
        let xc: Vec<Vec<f64>> = x.iter().zip(&means).map(|(c, m)| c.iter().map(|v| v - m).collect()).collect();
        let sq: Vec<f64> = xc.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / nf).collect();
        let l1 = hp.alpha * hp.l1_ratio;
        let l2 = hp.alpha * (1.0 - hp.l1_ratio);

        let mut w = vec![0.0; p];
        let mut r: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let mut iterations = 0;
        let mut converged = p == 0;
        while iterations < hp.max_iter && !converged {
            iterations += 1;
            let mut max_delta = 0.0f64;
            for j in 0..p {
                let denom = sq[j] + l2;
                if denom <= 0.0 {
                    continue;
                }
                let rho = xc[j].iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / nf + sq[j] * w[j];
                let new = soft_threshold(rho, l1) / denom;
                let delta = new - w[j];
                if delta != 0.0 {
                    for (ri, xi) in r.iter_mut().zip(&xc[j]) {
                        *ri -= delta * xi;
                    }
                    w[j] = new;
                }
                max_delta = max_delta.max(delta.abs());
            }
            converged = max_delta < hp.tol;
        }
        let intercept = y_mean - w.iter().zip(&means).map(|(a, b)| a * b).sum::<f64>();
        Self { coefs: w, intercept, iterations, converged }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefs.iter().zip(row).map(|(a, b)| a * b).sum::<f64>()
    }
}
