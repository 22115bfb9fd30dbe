//! End-to-end checks of the loss kernel: closed-form values, naive-loop
//! agreement and central finite differences of every analytic gradient.

use std::fmt::Write as _;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::losses::{
    flops_loss, flops_loss_grad, in_batch_loss, in_batch_loss_grad, joint_flops_grad,
    joint_flops_loss, score_matrix, Batch, LossError,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestConfig {
    pub seed: u64,
    pub batch: usize,
    pub vocab: usize,
    pub trials: usize,
    pub epsilon: f64,
    pub tolerance: f64,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            batch: 6,
            vocab: 12,
            trials: 50,
            epsilon: 1e-5,
            tolerance: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub max_error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.max_error.is_finite() && self.max_error <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
    /// In-batch loss of an all-equal score matrix of the configured batch size.
    pub uniform_in_batch: f64,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn render(&self, config: &SelftestConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "losses-selftest seed={} batch={} vocab={} trials={} epsilon={:e}",
            config.seed, config.batch, config.vocab, config.trials, config.epsilon
        );
        let _ = writeln!(
            s,
            "uniform in-batch loss {:.15} (ln {} = {:.15})",
            self.uniform_in_batch,
            config.batch,
            (config.batch as f64).ln()
        );
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {:<28} max_error={:.3e} tolerance={:.0e}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.max_error,
                c.tolerance
            );
        }
        let _ = writeln!(
            s,
            "{}",
            if self.passed() {
                "all checks passed"
            } else {
                "FAILED"
            }
        );
        s
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(0.0..5.0))
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Largest relative error between `grad` and central differences of `f` at `x`.
fn fd_error(
    x: &Array2<f64>,
    grad: &Array2<f64>,
    eps: f64,
    f: impl Fn(&Array2<f64>) -> Result<f64, LossError>,
) -> Result<f64, LossError> {
    let mut worst = 0.0f64;
    let mut probe = x.clone();
    for (idx, &g) in grad.indexed_iter() {
        let orig = probe[idx];
        probe[idx] = orig + eps;
        let up = f(&probe)?;
        probe[idx] = orig - eps;
        let down = f(&probe)?;
        probe[idx] = orig;
        worst = worst.max(rel_error(g, (up - down) / (2.0 * eps)));
    }
    Ok(worst)
}

pub fn run(config: &SelftestConfig) -> Result<SelftestReport, LossError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (n, v, eps) = (config.batch, config.vocab, config.epsilon);
    let mut in_batch_fd = 0.0f64;
    let mut flops_fd = 0.0f64;
    let mut joint_fd = 0.0f64;
    let mut value_err = 0.0f64;
    let mut stable = 0.0f64;

    for _ in 0..config.trials {
        let scores = random_matrix(&mut rng, n, n);
        let grad = in_batch_loss_grad(scores.view())?;
        in_batch_fd = in_batch_fd.max(fd_error(&scores, &grad, eps, |s| in_batch_loss(s.view()))?);

        let reps = random_matrix(&mut rng, n, v);
        let grad = flops_loss_grad(reps.view())?;
        flops_fd = flops_fd.max(fd_error(&reps, &grad, eps, |r| flops_loss(r.view()))?);

        let q = random_matrix(&mut rng, n, v);
        let d = random_matrix(&mut rng, n + 1, v);
        let (gq, gd) = joint_flops_grad(q.view(), d.view())?;
        joint_fd = joint_fd.max(fd_error(&q, &gq, eps, |q| {
            joint_flops_loss(q.view(), d.view())
        })?);
        joint_fd = joint_fd.max(fd_error(&d, &gd, eps, |d| {
            joint_flops_loss(q.view(), d.view())
        })?);

        // score matrix against its definition, and the symmetric/reduction identities
        let batch = Batch::new(q.clone(), d.slice(ndarray::s![..n, ..]).to_owned())?;
        let s = score_matrix(&batch);
        for i in 0..n {
            for j in 0..n {
                let direct: f64 = (0..v).map(|c| q[[i, c]] * d[[j, c]]).sum();
                value_err = value_err.max(rel_error(s[[i, j]], direct));
            }
        }
        value_err = value_err.max(rel_error(
            joint_flops_loss(q.view(), d.view())?,
            joint_flops_loss(d.view(), q.view())?,
        ));
        value_err = value_err.max(rel_error(
            joint_flops_loss(q.view(), q.view())?,
            flops_loss(q.view())?,
        ));

        let big = Array2::from_shape_fn((n, n), |_| rng.random_range(-1e4..1e4));
        let loss = in_batch_loss(big.view())?;
        if !loss.is_finite() || loss < 0.0 {
            stable = f64::INFINITY;
        }
    }

    let uniform_in_batch = in_batch_loss(Array2::from_elem((n, n), 1.5).view())?;
    let checks = vec![
        Check {
            name: "in_batch_grad_fd",
            max_error: in_batch_fd,
            tolerance: config.tolerance,
        },
        Check {
            name: "flops_grad_fd",
            max_error: flops_fd,
            tolerance: config.tolerance,
        },
        Check {
            name: "joint_flops_grad_fd",
            max_error: joint_fd,
            tolerance: config.tolerance,
        },
        Check {
            name: "values_vs_definitions",
            max_error: value_err,
            tolerance: 1e-12,
        },
        Check {
            name: "uniform_in_batch_is_ln_n",
            max_error: (uniform_in_batch - (n as f64).ln()).abs(),
            tolerance: 1e-9,
        },
        Check {
            name: "in_batch_stable_at_1e4",
            max_error: stable,
            tolerance: 0.0,
        },
    ];
    Ok(SelftestReport {
        checks,
        uniform_in_batch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_run_passes() {
        let config = SelftestConfig {
            trials: 10,
            ..Default::default()
        };
        let report = run(&config).unwrap();
        assert!(report.passed(), "{}", report.render(&config));
        assert!((report.uniform_in_batch - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let config = SelftestConfig {
            trials: 3,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(run(&config).unwrap(), run(&config).unwrap());
    }
}
