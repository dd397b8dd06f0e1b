//! Central finite-difference gradient verification.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{NodeId, Tape, Tensor};

/// One coordinate where the analytic and numeric gradients disagree.
#[derive(Debug, Clone)]
pub struct GradMismatch {
    pub input: usize,
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

/// Outcome of a gradient check over all coordinates of all inputs.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub coords_checked: usize,
    pub failures: Vec<GradMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary(&self) -> String {
        format!(
            "grad_check: {} coords, max rel err {:.3e} (tol {:.1e}), {} failures",
            self.coords_checked,
            self.max_rel_err,
            self.tolerance,
            self.failures.len()
        )
    }
}

/// Relative error between analytic and numeric derivatives. Falls back to
/// absolute error when both magnitudes are tiny, where a ratio is meaningless.
fn rel_err(a: f64, n: f64) -> f64 {
    let denom = libm::fmax(libm::fabs(a), libm::fabs(n));
    if denom < 1e-6 {
        libm::fabs(a - n)
    } else {
        libm::fabs(a - n) / denom
    }
}

/// Compare the analytic gradient of `f` at `points` against central finite
/// differences with the given step. `f` must build a scalar loss on the tape
/// from leaves corresponding to `points` in order.
pub fn grad_check<F>(f: F, points: &[Tensor], step: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    if step <= 0.0 {
        return Err(Error::Contract("grad_check: step must be positive".into()));
    }
    let eval = |pts: &[Tensor]| -> Result<(f64, Option<Vec<Vec<f64>>>)> {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> =
            pts.iter().map(|p| tape.variable(p.clone())).collect::<Result<_>>()?;
        let loss = f(&mut tape, &ids)?;
        if tape.values(loss).len() != 1 {
            return Err(Error::Contract("grad_check: f must return a scalar".into()));
        }
        let value = tape.values(loss)[0];
        tape.backward(loss)?;
        let grads = ids
            .iter()
            .map(|&id| tape.grad(id).map(|g| g.to_vec()).unwrap_or_default())
            .collect();
        Ok((value, Some(grads)))
    };

    let (_, grads) = eval(points)?;
    let grads = grads.unwrap();

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        tolerance,
        coords_checked: 0,
        failures: Vec::new(),
    };
    let mut work: Vec<Tensor> = points.to_vec();
    for (pi, point) in points.iter().enumerate() {
        let analytic = &grads[pi];
        for ci in 0..point.values.len() {
            let orig = point.values[ci];
            work[pi].values[ci] = orig + step;
            let (f_plus, _) = eval(&work)?;
            work[pi].values[ci] = orig - step;
            let (f_minus, _) = eval(&work)?;
            work[pi].values[ci] = orig;
            let numeric = (f_plus - f_minus) / (2.0 * step);
            let a = if analytic.is_empty() { 0.0 } else { analytic[ci] };
            let err = rel_err(a, numeric);
            report.coords_checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
            }
            if err > tolerance {
                report.failures.push(GradMismatch {
                    input: pi,
                    coord: ci,
                    analytic: a,
                    numeric,
                    rel_err: err,
                });
            }
        }
    }
    Ok(report)
}
