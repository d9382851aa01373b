//! Power-law accuracy model `(t + 1)^-alpha` and its least-RMSE fit.

use serde::{Deserialize, Serialize};

use super::{AccuracyCurve, AnalysisError};

/// Search interval for alpha.
pub const ALPHA_MIN: f64 = 0.0;
pub const ALPHA_MAX: f64 = 10.0;
/// Width of the final golden-section bracket.
pub const ALPHA_TOLERANCE: f64 = 1e-9;
/// Coarse scan step used to bracket the global minimum.
const SCAN_STEP: f64 = 0.01;

/// Modelled accuracy after `t` translations.
pub fn ael(t: usize, alpha: f64) -> f64 {
    ((t + 1) as f64).powf(-alpha)
}

/// Root-mean-square deviation of the measured points (`t >= 1`) from
/// [`ael`]. The pinned `t = 0` point is not counted.
pub fn rmse(curve: &AccuracyCurve, alpha: f64) -> Result<f64, AnalysisError> {
    let measured = curve.measured();
    if measured.is_empty() {
        return Err(AnalysisError::EmptyCurve(curve.label.clone()));
    }
    Ok(rmse_unchecked(measured, alpha))
}

fn rmse_unchecked(points: &[super::CurvePoint], alpha: f64) -> f64 {
    let sum: f64 = points
        .iter()
        .map(|p| {
            let r = p.value - ael(p.t, alpha);
            r * r
        })
        .sum();
    (sum / points.len() as f64).sqrt()
}

/// Fitted semantic divergence factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AelFit {
    pub alpha: f64,
    /// Exactly `rmse(curve, alpha)`.
    pub rmse: f64,
    /// Number of measured points (the `t = 0` point excluded).
    pub n: usize,
}

/// Minimize [`rmse`] over `alpha` in `[0, 10]`.
///
/// A coarse scan picks the best 0.01-wide cell so curves with several
/// local minima still land in the global one; golden-section search then
/// narrows that cell to [`ALPHA_TOLERANCE`].
pub fn fit_ael(curve: &AccuracyCurve) -> Result<AelFit, AnalysisError> {
    let points = curve.measured();
    if points.is_empty() {
        return Err(AnalysisError::EmptyCurve(curve.label.clone()));
    }
    let f = |a: f64| rmse_unchecked(points, a);

    let steps = ((ALPHA_MAX - ALPHA_MIN) / SCAN_STEP).round() as usize;
    let (mut best_alpha, mut best) = (ALPHA_MIN, f(ALPHA_MIN));
    for k in 1..=steps {
        let a = ALPHA_MIN + k as f64 * SCAN_STEP;
        let v = f(a);
        if v < best {
            best = v;
            best_alpha = a;
        }
    }

    let (refined, refined_value) = golden_section(
        &f,
        (best_alpha - SCAN_STEP).max(ALPHA_MIN),
        (best_alpha + SCAN_STEP).min(ALPHA_MAX),
        ALPHA_TOLERANCE,
    );
    let alpha = if refined_value <= best {
        refined
    } else {
        best_alpha
    };
    Ok(AelFit {
        alpha,
        rmse: f(alpha),
        n: points.len(),
    })
}

/// Golden-section minimization of a unimodal `f` on `[lo, hi]`. Returns
/// the best evaluated point.
fn golden_section(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    [(x1, f1), (x2, f2), (mid, f(mid))]
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("three candidates")
}

/// Mean curve with a constant half-width equal to the fitted RMSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBand {
    pub mean: AccuracyCurve,
    pub half_width: f64,
}

impl CurveBand {
    pub fn lower(&self) -> Vec<f64> {
        self.mean
            .points
            .iter()
            .map(|p| p.value - self.half_width)
            .collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.mean
            .points
            .iter()
            .map(|p| p.value + self.half_width)
            .collect()
    }
}

/// Pointwise mean of curves sharing one `t` grid, with the AEL fitted to
/// that mean.
pub fn aggregate_curves(
    curves: &[AccuracyCurve],
    label: &str,
) -> Result<(AccuracyCurve, CurveBand, AelFit), AnalysisError> {
    let first = curves.first().ok_or(AnalysisError::NoCurves)?;
    for c in &curves[1..] {
        let same = c.points.len() == first.points.len()
            && c.points.iter().zip(&first.points).all(|(a, b)| a.t == b.t);
        if !same {
            return Err(AnalysisError::GridMismatch(format!(
                "`{}` and `{}` are sampled at different steps",
                first.label, c.label
            )));
        }
    }
    let n = curves.len() as f64;
    let points = first
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| super::CurvePoint {
            t: p.t,
            value: curves.iter().map(|c| c.points[i].value).sum::<f64>() / n,
        })
        .collect();
    let mean = AccuracyCurve {
        label: label.to_string(),
        points,
    };
    let fit = fit_ael(&mean)?;
    let band = CurveBand {
        mean: mean.clone(),
        half_width: fit.rmse,
    };
    Ok((mean, band, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::CurvePoint;

    fn generated(alpha: f64, n: usize) -> AccuracyCurve {
        AccuracyCurve::from_measurements("gen", (1..=n).map(|t| (t, ael(t, alpha)))).unwrap()
    }

    /// Independent oracle: dense grid over [0, 10].
    fn grid_argmin(curve: &AccuracyCurve, step: f64) -> f64 {
        let steps = (10.0 / step).round() as usize;
        (0..=steps)
            .map(|k| k as f64 * step)
            .map(|a| {
                let pts = curve.measured();
                let mse: f64 = pts
                    .iter()
                    .map(|p| (p.value - ((p.t + 1) as f64).powf(-a)).powi(2))
                    .sum::<f64>()
                    / pts.len() as f64;
                (a, mse)
            })
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap()
            .0
    }

    #[test]
    fn ael_values() {
        assert_eq!(ael(0, 0.7), 1.0);
        assert_eq!(ael(17, 0.0), 1.0);
        assert!((ael(3, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rmse_examples() {
        let exact = generated(0.3, 20);
        assert_eq!(rmse(&exact, 0.3).unwrap(), 0.0);

        let unit = AccuracyCurve::from_measurements("u", [(1, 0.0)]).unwrap();
        assert_eq!(rmse(&unit, 0.0).unwrap(), 1.0);

        let two = AccuracyCurve::from_measurements("two", [(1, 0.8), (3, 0.6)]).unwrap();
        let hand = (((0.8 - 2f64.powf(-0.5)).powi(2) + (0.6f64 - 0.5).powi(2)) / 2.0).sqrt();
        assert!((rmse(&two, 0.5).unwrap() - hand).abs() < 1e-12);
        // 0.8 - 0.70710678 = 0.09289322; (0.00862915 + 0.01) / 2 = 0.00931458
        assert!((rmse(&two, 0.5).unwrap() - 0.096_512).abs() < 1e-6);
    }

    #[test]
    fn empty_curve_rejected() {
        let c = AccuracyCurve::from_measurements("e", std::iter::empty()).unwrap();
        assert!(matches!(rmse(&c, 0.1), Err(AnalysisError::EmptyCurve(_))));
        assert!(matches!(fit_ael(&c), Err(AnalysisError::EmptyCurve(_))));
    }

    #[test]
    fn constant_curve_fits_zero() {
        let c = AccuracyCurve::from_measurements("c", (1..=50).map(|t| (t, 1.0))).unwrap();
        let fit = fit_ael(&c).unwrap();
        assert_eq!(fit.alpha, 0.0);
        assert_eq!(fit.rmse, 0.0);
    }

    #[test]
    fn roundtrip_recovers_published_exponents() {
        for alpha in [0.110, 0.290, 0.481] {
            let c = generated(alpha, 142);
            let fit = fit_ael(&c).unwrap();
            assert!((fit.alpha - alpha).abs() < 1e-6, "{alpha} -> {}", fit.alpha);
            assert!(fit.rmse < 1e-9);
            assert!((fit.alpha - grid_argmin(&c, 1e-4)).abs() < 1e-4);
        }
    }

    #[test]
    fn fit_rmse_is_bit_equal_to_recomputation() {
        let c = AccuracyCurve::from_measurements(
            "n",
            (1..=30).map(|t| (t, ael(t, 0.4) + if t % 2 == 0 { 0.01 } else { -0.013 })),
        )
        .unwrap();
        let fit = fit_ael(&c).unwrap();
        assert_eq!(rmse(&c, fit.alpha).unwrap().to_bits(), fit.rmse.to_bits());
    }

    #[test]
    fn mirrored_curves_average_to_flat() {
        let up =
            AccuracyCurve::from_measurements("up", (1..=8).map(|t| (t, 1.0 + 0.25 / t as f64)))
                .unwrap();
        let down =
            AccuracyCurve::from_measurements("down", (1..=8).map(|t| (t, 1.0 - 0.25 / t as f64)))
                .unwrap();
        let (mean, band, fit) = aggregate_curves(&[up, down], "m").unwrap();
        assert!(mean.points.iter().all(|p| p.value == 1.0));
        assert_eq!(fit.alpha, 0.0);
        assert_eq!(band.half_width, 0.0);
    }

    #[test]
    fn single_curve_aggregate_is_identity() {
        let c = generated(0.2, 10);
        let (mean, band, fit) = aggregate_curves(std::slice::from_ref(&c), "m").unwrap();
        assert_eq!(mean.points, c.points);
        assert_eq!(band.half_width, fit.rmse);
        assert_eq!(band.lower().len(), 11);
    }

    #[test]
    fn aggregate_requires_shared_grid() {
        let a = generated(0.2, 10);
        let b = generated(0.2, 11);
        assert!(matches!(
            aggregate_curves(&[a, b], "m"),
            Err(AnalysisError::GridMismatch(_))
        ));
        assert!(matches!(
            aggregate_curves(&[], "m"),
            Err(AnalysisError::NoCurves)
        ));
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, _) = golden_section(&|x: f64| (x - 1.234).powi(2), 0.0, 3.0, 1e-10);
        assert!((x - 1.234).abs() < 1e-8);
    }

    #[test]
    fn points_accessor_excludes_origin() {
        let c = generated(0.2, 3);
        assert_eq!(c.points[0], CurvePoint { t: 0, value: 1.0 });
        assert_eq!(c.measured().len(), 3);
        assert_eq!(c.n(), 3);
    }
}
