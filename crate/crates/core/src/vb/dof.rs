use crate::numerics::special::lgamma;

/// Collapsed degrees-of-freedom objective
///
/// `Σ_i q_i (ν/2·ln(ν/2) − (ν/2 + a)·ln(ν/2 + b_i) + ln Γ(ν/2 + a) − ln Γ(ν/2))`
///
/// where `a` is the shape increment of `q(w_i)` (`d/2` for the t mixture,
/// `k/2 + d/2` for the t-factor mixture) and `b_i` the rate increment.
pub fn dof_objective(nu: f64, resp: &[f64], shape_extra: f64, rate_extra: &[f64]) -> f64 {
    debug_assert_eq!(resp.len(), rate_extra.len());
    let h = 0.5 * nu;
    let total: f64 = resp.iter().sum();
    let weighted_log: f64 = resp
        .iter()
        .zip(rate_extra)
        .map(|(&q, &b)| q * (h + b).ln())
        .sum();
    total * (h * h.ln() + lgamma(h + shape_extra) - lgamma(h)) - (h + shape_extra) * weighted_log
}

/// Exhaustive search over the integers `1..=lambda0`; ties go to the
/// smaller value.
pub fn optimize_dof(resp: &[f64], shape_extra: f64, rate_extra: &[f64], lambda0: u32) -> u32 {
    let mut best = 1;
    let mut best_val = f64::NEG_INFINITY;
    for nu in 1..=lambda0.max(1) {
        let v = dof_objective(nu as f64, resp, shape_extra, rate_extra);
        if v > best_val {
            best_val = v;
            best = nu;
        }
    }
    best
}

/// Drop observations whose responsibility is negligible next to the
/// largest one; their contribution to the objective is below rounding.
pub(crate) fn significant(resp: &[f64], rate: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let cut = resp.iter().fold(0.0f64, |m, &q| m.max(q)) * 1e-14;
    resp.iter()
        .zip(rate)
        .filter(|(&q, _)| q > cut)
        .map(|(&q, &b)| (q, b))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_feasible_value() {
        assert_eq!(optimize_dof(&[1.0, 1.0], 1.0, &[0.3, 4.0], 1), 1);
    }

    #[test]
    fn objective_matches_per_term_sum() {
        let resp = [0.2, 0.9, 0.5];
        let b = [0.1, 2.0, 7.5];
        let a = 1.5;
        let nu: f64 = 7.0;
        let direct: f64 = resp
            .iter()
            .zip(&b)
            .map(|(q, bi)| {
                q * (nu / 2.0 * (nu / 2.0).ln() - (nu / 2.0 + a) * (nu / 2.0 + bi).ln()
                    + lgamma(nu / 2.0 + a)
                    - lgamma(nu / 2.0))
            })
            .sum();
        assert!((dof_objective(nu, &resp, a, &b) - direct).abs() < 1e-10);
    }

    #[test]
    fn ties_go_to_smaller_value() {
        // Zero responsibility makes the objective identically zero.
        assert_eq!(optimize_dof(&[0.0], 1.0, &[1.0], 50), 1);
    }
}
