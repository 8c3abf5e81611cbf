//! Visibility fits, the Bell parameter and surfaces built from counts.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::experiment::{category_probability, AnalysisBasis, CoincidenceCategory, ExperimentSettings, InputKind};
use crate::montecarlo::{estimate_category, run_grid, CountTable, DetectionModel};
use crate::surface::{CorrelationSurface, GridSpec, SurfacePoint};

/// Slack on the 2π span so that `0..=2π` grids built from decimal
/// endpoints still qualify.
pub const SPAN_TOLERANCE: f64 = 1e-3;
pub const MIN_SCAN_SAMPLES: usize = 8;
/// Exact fringes can overshoot 1 by rounding even with zero uncertainty.
const ROUNDING_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub theta: f64,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaScan {
    samples: Vec<ScanSample>,
}

impl ThetaScan {
    pub fn new(samples: Vec<ScanSample>) -> Result<Self> {
        if samples.len() < MIN_SCAN_SAMPLES {
            return Err(Error::InvalidScan(format!(
                "{} samples, need at least {MIN_SCAN_SAMPLES}",
                samples.len()
            )));
        }
        if samples
            .iter()
            .any(|s| !(s.theta.is_finite() && s.estimate.is_finite() && s.stderr.is_finite()))
        {
            return Err(Error::InvalidScan("non-finite sample".into()));
        }
        if samples.iter().any(|s| s.stderr < 0.0) {
            return Err(Error::InvalidScan("negative stderr".into()));
        }
        if samples.windows(2).any(|w| w[1].theta <= w[0].theta) {
            return Err(Error::InvalidScan("thetas must be strictly increasing".into()));
        }
        let span = samples[samples.len() - 1].theta - samples[0].theta;
        if span < 2.0 * PI - SPAN_TOLERANCE {
            return Err(Error::InvalidScan(format!("span {span} is shorter than a full period")));
        }
        Ok(Self { samples })
    }

    /// Samples an exact curve with zero uncertainty on `n` points of `[0, 2π]`.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let step = 2.0 * PI / (n.max(2) - 1) as f64;
        let samples = (0..n)
            .map(|i| {
                let theta = if i + 1 == n { 2.0 * PI } else { i as f64 * step };
                Ok(ScanSample {
                    theta,
                    estimate: f(theta)?,
                    stderr: 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples)
    }

    /// Exact scan of one category at fixed α.
    pub fn analytic(n: usize, settings: ExperimentSettings, category: CoincidenceCategory) -> Result<Self> {
        Self::from_fn(n, |theta| {
            let s = ExperimentSettings { theta, ..settings };
            category_probability::<f64>(&s, category)
        })
    }

    /// Scan from Monte Carlo count tables, sorted by θ.
    pub fn from_counts(tables: &[CountTable], category: CoincidenceCategory) -> Result<Self> {
        let mut samples = tables
            .iter()
            .map(|t| {
                let e = estimate_category(t, category)?;
                Ok(ScanSample {
                    theta: t.settings.theta,
                    estimate: e.value,
                    stderr: e.stderr,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        samples.sort_by(|a, b| a.theta.total_cmp(&b.theta));
        Self::new(samples)
    }

    pub fn samples(&self) -> &[ScanSample] {
        &self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub value: f64,
    pub uncertainty: f64,
}

impl Visibility {
    pub fn new(value: f64, uncertainty: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidProbability {
                name: "visibility",
                value,
            });
        }
        if !(uncertainty >= 0.0 && uncertainty.is_finite()) {
            return Err(Error::InvalidProbability {
                name: "visibility uncertainty",
                value: uncertainty,
            });
        }
        Ok(Self { value, uncertainty })
    }

    pub fn exact(value: f64) -> Result<Self> {
        Self::new(value, 0.0)
    }
}

/// Coefficients of `p = a + b·cosθ + c·sinθ` with their covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub coefficients: [f64; 3],
    pub covariance: [[f64; 3]; 3],
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let c = [
        [cof(1, 2, 1, 2), -cof(1, 2, 0, 2), cof(1, 2, 0, 1)],
        [-cof(0, 2, 1, 2), cof(0, 2, 0, 2), -cof(0, 2, 0, 1)],
        [cof(0, 1, 1, 2), -cof(0, 1, 0, 2), cof(0, 1, 0, 1)],
    ];
    let det = m[0][0] * c[0][0] + m[0][1] * c[0][1] + m[0][2] * c[0][2];
    let scale = m.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max).powi(3);
    if !(det.abs() > 1e-12 * scale) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = c[j][i] / det;
        }
    }
    Some(inv)
}

/// Ordinary least squares with the sandwich covariance from the sample
/// standard errors.
pub fn fit_sinusoid(scan: &ThetaScan) -> Result<SinusoidFit> {
    let rows: Vec<[f64; 3]> = scan
        .samples
        .iter()
        .map(|s| [1.0, s.theta.cos(), s.theta.sin()])
        .collect();
    let mut xtx = [[0.0; 3]; 3];
    let mut xty = [0.0; 3];
    let mut meat = [[0.0; 3]; 3];
    for (x, s) in rows.iter().zip(&scan.samples) {
        let var = s.stderr * s.stderr;
        for i in 0..3 {
            xty[i] += x[i] * s.estimate;
            for j in 0..3 {
                xtx[i][j] += x[i] * x[j];
                meat[i][j] += x[i] * x[j] * var;
            }
        }
    }
    let inv = invert3(&xtx).ok_or(Error::SingularFit)?;
    let mut coefficients = [0.0; 3];
    for i in 0..3 {
        coefficients[i] = (0..3).map(|j| inv[i][j] * xty[j]).sum();
    }
    let mut tmp = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            tmp[i][j] = (0..3).map(|k| inv[i][k] * meat[k][j]).sum();
        }
    }
    let mut covariance = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            covariance[i][j] = (0..3).map(|k| tmp[i][k] * inv[k][j]).sum();
        }
    }
    Ok(SinusoidFit {
        coefficients,
        covariance,
    })
}

pub fn fit_visibility(scan: &ThetaScan) -> Result<Visibility> {
    let fit = fit_sinusoid(scan)?;
    let [a, b, c] = fit.coefficients;
    if !(a > 0.0) {
        return Err(Error::NonPositiveMean(a));
    }
    let cov = fit.covariance;
    let r = b.hypot(c);
    let v = r / a;
    // delta method; at r = 0 the amplitude direction is arbitrary
    let var = if r > 0.0 {
        let g = [-r / (a * a), b / (r * a), c / (r * a)];
        (0..3)
            .map(|i| (0..3).map(|j| g[i] * cov[i][j] * g[j]).sum::<f64>())
            .sum::<f64>()
    } else {
        (cov[1][1] + cov[2][2]) / (2.0 * a * a)
    };
    let sigma = var.max(0.0).sqrt();
    if v > 1.0 + 3.0 * sigma + ROUNDING_SLACK {
        return Err(Error::UnphysicalVisibility {
            value: v,
            uncertainty: sigma,
        });
    }
    Visibility::new(v.min(1.0), sigma)
}

/// `(max − min)/(max + min)` over the samples.
pub fn raw_visibility(scan: &ThetaScan) -> Result<f64> {
    let (lo, hi) = scan
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.estimate), hi.max(s.estimate))
        });
    if !(hi + lo > 0.0) {
        return Err(Error::NonPositiveMean(0.5 * (hi + lo)));
    }
    Ok((hi - lo) / (hi + lo))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellParameter {
    pub s: f64,
    pub uncertainty: f64,
}

pub fn bell_parameter(v_hv: Visibility, v_da: Visibility) -> BellParameter {
    BellParameter {
        s: SQRT_2 * (v_hv.value + v_da.value),
        uncertainty: SQRT_2 * v_hv.uncertainty.hypot(v_da.uncertainty),
    }
}

/// Standard deviations of `s` above the classical bound 2.
pub fn classical_bound_violation(s: f64, uncertainty: f64) -> Result<f64> {
    if !(uncertainty > 0.0) {
        return Err(Error::NonPositiveUncertainty(uncertainty));
    }
    Ok((s - 2.0) / uncertainty)
}

/// Phase scan settings of a Bell run: α = 90° in H/V, α = 45° in D/A.
pub const BELL_ALPHA_HV_DEG: f64 = 90.0;
pub const BELL_ALPHA_DA_DEG: f64 = 45.0;
pub const BELL_SCAN_STEPS: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellRun {
    pub v_hv: Visibility,
    pub v_da: Visibility,
    pub bell: BellParameter,
    /// `None` for the exact evaluation.
    pub shots_per_point: Option<u64>,
}

fn bell_settings(basis: AnalysisBasis, input: InputKind, steps: usize) -> Vec<ExperimentSettings> {
    let alpha = match basis {
        AnalysisBasis::HV => BELL_ALPHA_HV_DEG,
        AnalysisBasis::DA => BELL_ALPHA_DA_DEG,
    };
    let grid = GridSpec {
        start: 0.0,
        stop: 2.0 * PI,
        steps,
    };
    grid.values()
        .into_iter()
        .map(|t| ExperimentSettings::new(t, alpha).basis(basis).input(input))
        .collect()
}

/// Exact visibilities from `steps`-point scans.
pub fn analytic_bell(input: InputKind, steps: usize) -> Result<BellRun> {
    let fit = |basis| -> Result<Visibility> {
        let samples = bell_settings(basis, input, steps)
            .into_iter()
            .map(|s| {
                Ok(ScanSample {
                    theta: s.theta,
                    estimate: category_probability::<f64>(&s, CoincidenceCategory::HA)?,
                    stderr: 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        fit_visibility(&ThetaScan::new(samples)?)
    };
    let (v_hv, v_da) = (fit(AnalysisBasis::HV)?, fit(AnalysisBasis::DA)?);
    Ok(BellRun {
        v_hv,
        v_da,
        bell: bell_parameter(v_hv, v_da),
        shots_per_point: None,
    })
}

/// Monte Carlo Bell run spending `total_shots` evenly over both scans.
/// The D/A scan's points continue the seed sequence after the H/V ones.
pub fn simulate_bell(input: InputKind, model: &DetectionModel, total_shots: u64, steps: usize) -> Result<BellRun> {
    let per_point = total_shots / (2 * steps as u64);
    if per_point == 0 {
        return Err(Error::ZeroShots);
    }
    let settings = [
        bell_settings(AnalysisBasis::HV, input, steps),
        bell_settings(AnalysisBasis::DA, input, steps),
    ]
    .concat();
    let tables = run_grid(&settings, model, per_point)?;
    let (hv, da) = tables.split_at(steps);
    let v_hv = fit_visibility(&ThetaScan::from_counts(hv, CoincidenceCategory::HA)?)?;
    let v_da = fit_visibility(&ThetaScan::from_counts(da, CoincidenceCategory::HA)?)?;
    Ok(BellRun {
        v_hv,
        v_da,
        bell: bell_parameter(v_hv, v_da),
        shots_per_point: Some(per_point),
    })
}

/// One point per table, in table order.
pub fn surface_from_counts(tables: &[CountTable], category: CoincidenceCategory) -> Result<CorrelationSurface> {
    let first = tables
        .first()
        .ok_or_else(|| Error::InvalidGrid("no count tables".into()))?;
    let (basis, input) = (first.settings.basis, first.settings.input);
    let points = tables
        .iter()
        .map(|t| {
            if t.settings.basis != basis || t.settings.input != input {
                return Err(Error::SurfaceMismatch(format!(
                    "table at θ={} α={} has a different basis or input",
                    t.settings.theta, t.settings.alpha_deg
                )));
            }
            let e = estimate_category(t, category)?;
            Ok(SurfacePoint {
                theta_rad: t.settings.theta,
                alpha_deg: t.settings.alpha_deg,
                value: e.value,
                stderr: Some(e.stderr),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationSurface {
        basis,
        input,
        category,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::closed_form_ia;
    use crate::montecarlo::run;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn exact(f: impl Fn(f64) -> f64) -> ThetaScan {
        ThetaScan::from_fn(25, |t| Ok(f(t))).unwrap()
    }

    #[test]
    fn noiseless_fits() {
        let v = fit_visibility(&exact(|t| 0.5 + 0.5 * t.cos())).unwrap();
        assert_abs_diff_eq!(v.value, 1.0, epsilon = 1e-12);
        assert!(v.uncertainty < 1e-12);
        let v = fit_visibility(&exact(|t| 0.5 + 0.45 * t.cos())).unwrap();
        assert_abs_diff_eq!(v.value, 0.9, epsilon = 1e-12);
        let v = fit_visibility(&exact(|_| 0.5)).unwrap();
        assert_abs_diff_eq!(v.value, 0.0, epsilon = 1e-12);
        let v = fit_visibility(&exact(|t| 0.4 + 0.2 * (t - 1.0).cos())).unwrap();
        assert_abs_diff_eq!(v.value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn fit_equals_raw_estimator_on_closed_form() {
        for alpha in [0.0, 30.0, 45.0, 60.0, 90.0] {
            let scan = exact(|t| closed_form_ia(t, alpha));
            let fit = fit_visibility(&scan).unwrap().value;
            let raw = raw_visibility(&scan).unwrap();
            let s = alpha.to_radians().sin();
            assert_abs_diff_eq!(fit, s * s, epsilon = 1e-9);
            assert_abs_diff_eq!(raw, s * s, epsilon = 1e-9);
        }
    }

    #[test]
    fn scan_validation() {
        let s = |theta: f64| ScanSample {
            theta,
            estimate: 0.5,
            stderr: 0.0,
        };
        assert!(ThetaScan::new((0..7).map(|i| s(i as f64)).collect()).is_err());
        assert!(ThetaScan::new((0..8).map(|i| s(i as f64 * 0.1)).collect()).is_err());
        let mut v: Vec<_> = (0..9).map(|i| s(i as f64)).collect();
        v.swap(2, 3);
        assert!(ThetaScan::new(v).is_err());
        assert!(ThetaScan::new((0..9).map(|i| s(i as f64)).collect()).is_ok());
    }

    #[test]
    fn singular_fit_rejected() {
        let samples = (0..9)
            .map(|i| ScanSample {
                theta: i as f64 * 2.0 * PI,
                estimate: 0.5,
                stderr: 0.01,
            })
            .collect();
        let scan = ThetaScan::new(samples).unwrap();
        assert!(matches!(fit_visibility(&scan), Err(Error::SingularFit)));
    }

    #[test]
    fn unphysical_and_negative_mean() {
        let over = exact(|t| 0.5 + 0.8 * t.cos());
        assert!(matches!(fit_visibility(&over), Err(Error::UnphysicalVisibility { .. })));
        let neg = exact(|t| -0.1 + 0.01 * t.cos());
        assert!(matches!(fit_visibility(&neg), Err(Error::NonPositiveMean(_))));
    }

    #[test]
    fn noisy_overshoot_is_clamped() {
        let samples: Vec<ScanSample> = (0..16)
            .map(|i| {
                let t = i as f64 * 2.0 * PI / 15.0;
                ScanSample {
                    theta: t,
                    estimate: 0.5 + 0.505 * t.cos(),
                    stderr: 0.02,
                }
            })
            .collect();
        let v = fit_visibility(&ThetaScan::new(samples).unwrap()).unwrap();
        assert_eq!(v.value, 1.0);
        assert!(v.uncertainty > 0.0);
    }

    #[test]
    fn uncertainty_matches_monte_carlo_scatter() {
        // spread of fitted V over independent seeds vs. the propagated σ
        let model = DetectionModel::uniform(1.0, 0.0, 0);
        let fits: Vec<Visibility> = (0..12)
            .map(|seed| {
                let tables: Vec<_> = (0..13)
                    .map(|i| {
                        let s = ExperimentSettings::new(i as f64 * 2.0 * PI / 12.0, 50.0);
                        run(&s, &model.with_seed(seed), 4000).unwrap()
                    })
                    .collect();
                fit_visibility(&ThetaScan::from_counts(&tables, CoincidenceCategory::HA).unwrap()).unwrap()
            })
            .collect();
        let mean = fits.iter().map(|v| v.value).sum::<f64>() / fits.len() as f64;
        let sd = (fits.iter().map(|v| (v.value - mean).powi(2)).sum::<f64>() / (fits.len() - 1) as f64).sqrt();
        let sigma = fits.iter().map(|v| v.uncertainty).sum::<f64>() / fits.len() as f64;
        let target = 50f64.to_radians().sin().powi(2);
        assert!((mean - target).abs() < 4.0 * sigma / (fits.len() as f64).sqrt());
        assert!(sd > 0.4 * sigma && sd < 2.0 * sigma, "sd {sd} vs σ {sigma}");
    }

    #[test]
    fn bell_examples() {
        let b = bell_parameter(Visibility::exact(1.0).unwrap(), Visibility::exact(1.0).unwrap());
        assert_abs_diff_eq!(b.s, 2.0 * SQRT_2, epsilon = 1e-12);
        let b = bell_parameter(Visibility::exact(0.98).unwrap(), Visibility::exact(0.98).unwrap());
        assert_abs_diff_eq!(b.s, 2.7719, epsilon = 5e-5);
        assert_eq!(
            bell_parameter(Visibility::exact(0.0).unwrap(), Visibility::exact(0.0).unwrap()).s,
            0.0
        );
        let b = bell_parameter(Visibility::new(0.9, 0.03).unwrap(), Visibility::new(0.8, 0.04).unwrap());
        assert_abs_diff_eq!(b.uncertainty, SQRT_2 * 0.05, epsilon = 1e-12);
    }

    #[test]
    fn violation_examples() {
        assert_abs_diff_eq!(classical_bound_violation(2.77, 0.07).unwrap(), 11.0, epsilon = 1e-9);
        assert_eq!(classical_bound_violation(2.0, 0.1).unwrap(), 0.0);
        assert_abs_diff_eq!(classical_bound_violation(2.8284, 0.05).unwrap(), 16.568, epsilon = 1e-9);
        assert!(classical_bound_violation(2.5, 0.0).is_err());
    }

    #[test]
    fn surface_from_counts_checks() {
        assert!(surface_from_counts(&[], CoincidenceCategory::HA).is_err());
        let m = DetectionModel::ideal(1);
        let a = run(&ExperimentSettings::new(0.0, 90.0), &m, 1000).unwrap();
        let b = run(
            &ExperimentSettings::new(0.0, 90.0).basis(crate::AnalysisBasis::DA),
            &m,
            1000,
        )
        .unwrap();
        assert!(matches!(
            surface_from_counts(&[a.clone(), b], CoincidenceCategory::HA),
            Err(Error::SurfaceMismatch(_))
        ));
        let s = surface_from_counts(&[a], CoincidenceCategory::HA).unwrap();
        assert_eq!(s.points[0].value, 1.0);
        assert!(s.to_csv().starts_with(crate::surface::ESTIMATE_HEADER));
    }

    #[test]
    fn bell_runs() {
        let exact = analytic_bell(InputKind::Entangled, BELL_SCAN_STEPS).unwrap();
        assert_abs_diff_eq!(exact.bell.s, 2.0 * SQRT_2, epsilon = 1e-9);
        let mixed = analytic_bell(InputKind::Mixture, BELL_SCAN_STEPS).unwrap();
        assert_abs_diff_eq!(mixed.v_hv.value, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(mixed.v_da.value, 0.5, epsilon = 1e-9);
        let mc = simulate_bell(
            InputKind::Entangled,
            &DetectionModel::ideal(4),
            200_000,
            BELL_SCAN_STEPS,
        )
        .unwrap();
        assert!((mc.bell.s - 2.0 * SQRT_2).abs() < 4.0 * mc.bell.uncertainty + 1e-9);
        assert_eq!(mc.shots_per_point, Some(200_000 / 34));
        assert!(matches!(
            simulate_bell(InputKind::Entangled, &DetectionModel::ideal(4), 10, 17),
            Err(Error::ZeroShots)
        ));
    }

    proptest! {
        #[test]
        fn bell_monotone_and_symmetric(a in 0.0f64..1.0, b in 0.0f64..1.0, d in 0.0f64..0.5, ea in 0.0f64..0.1, eb in 0.0f64..0.1) {
            let va = Visibility::new(a, ea).unwrap();
            let vb = Visibility::new(b, eb).unwrap();
            let s = bell_parameter(va, vb);
            let swapped = bell_parameter(vb, va);
            prop_assert_eq!(s.s, swapped.s);
            prop_assert_eq!(s.uncertainty, swapped.uncertainty);
            let up = Visibility::new((a + d).min(1.0), ea).unwrap();
            prop_assert!(bell_parameter(up, vb).s >= s.s);
            prop_assert!(bell_parameter(vb, up).s >= s.s);
        }
    }
}
