//! Generic gradient checker: analytic gradients against central finite
//! differences over a flat parameter vector.

use crate::{CoreError, Result};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub param_count: usize,
}

/// Compare `analytic` (loss gradient at `params`) against central finite
/// differences of `loss` with step `h`. The relative error per entry is
/// |a - n| / max(|a|, |n|, floor), floored at 1e-4 of the gradient scale.
pub fn grad_check<L>(params: &[f64], loss: L, analytic: &[f64], h: f64) -> Result<GradCheckReport>
where
    L: Fn(&[f64]) -> f64,
{
    if params.len() != analytic.len() {
        return Err(CoreError::Dimension(format!(
            "grad_check: {} params vs {} gradient entries",
            params.len(),
            analytic.len()
        )));
    }
    let mut work = params.to_vec();
    let mut numeric = vec![0.0; params.len()];
    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + h;
        let plus = loss(&work);
        work[i] = orig - h;
        let minus = loss(&work);
        work[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(CoreError::Numeric(format!("non-finite loss perturbing parameter {i}")));
        }
        numeric[i] = (plus - minus) / (2.0 * h);
    }
    // The difference quotient resolves entries down to roughly ε·loss/2h in
    // absolute terms, so the denominator is floored at a fraction of the
    // overall gradient scale; otherwise entries below the FD resolution
    // dominate the report with pure noise.
    let scale = analytic
        .iter()
        .chain(numeric.iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let floor = (1e-4 * scale).max(1e-8);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        param_count: params.len(),
    };
    for i in 0..params.len() {
        let a = analytic[i];
        let n = numeric[i];
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(floor);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
            report.analytic_at_worst = a;
            report.numeric_at_worst = n;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_loss_is_exact_to_roundoff() {
        // f(p) = Σ (p_i - t_i)^2, gradient 2(p - t); central differences are
        // exact for quadratics.
        let params = vec![0.3, -1.1, 2.0];
        let target = [1.0, 0.0, -1.0];
        let loss = |p: &[f64]| -> f64 {
            p.iter().zip(target.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
        };
        let analytic: Vec<f64> =
            params.iter().zip(target.iter()).map(|(a, b)| 2.0 * (a - b)).collect();
        let report = grad_check(&params, loss, &analytic, 1e-6).unwrap();
        assert!(report.max_rel_error <= 1e-7, "rel error {}", report.max_rel_error);
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let params = vec![1.0];
        let loss = |_: &[f64]| f64::NAN;
        assert!(grad_check(&params, loss, &[0.0], 1e-6).is_err());
    }

    #[test]
    fn a_sabotaged_gradient_is_caught() {
        let params = vec![0.7, -0.3];
        let loss = |p: &[f64]| p[0] * p[0] + 3.0 * p[1];
        let analytic = vec![2.0 * params[0] * 1.05, 3.0]; // 5% error in entry 0
        let report = grad_check(&params, loss, &analytic, 1e-6).unwrap();
        assert!(report.max_rel_error > 1e-2, "rel error {}", report.max_rel_error);
        assert_eq!(report.worst_index, 0);
    }
}
