use crate::error::{Error, Result};

/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Outcome of comparing an analytic gradient with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// `max_i |a_i − n_i| / max(1, |a_i|, |n_i|)`.
    pub max_rel_error: f64,
    /// Coordinate where the maximum was attained.
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

/// Compares `analytic` against the central difference
/// `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h` at every coordinate of `point`.
pub fn grad_check<F>(mut f: F, point: &[f64], analytic: &[f64], step: f64) -> Result<GradCheck>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(step > 0.0) {
        return Err(Error::Argument(format!(
            "step must be positive, got {step}"
        )));
    }
    if point.len() != analytic.len() {
        return Err(Error::Shape {
            op: "grad_check",
            lhs: (point.len(), 1),
            rhs: (analytic.len(), 1),
        });
    }
    let mut x = point.to_vec();
    let mut report: Option<GradCheck> = None;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + step;
        let up = f(&x);
        x[i] = orig - step;
        let down = f(&x);
        x[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numeric(format!(
                "objective not finite near coordinate {i}"
            )));
        }
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[i];
        let rel = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
        if report.as_ref().is_none_or(|r| rel > r.max_rel_error) {
            report = Some(GradCheck {
                max_rel_error: rel,
                worst_index: i,
                worst_analytic: a,
                worst_numeric: numeric,
            });
        }
    }
    let report = report.unwrap_or(GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    });
    Ok(report)
}
