//! Correlation surfaces over (θ, α) grids and their CSV form.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{category_probability, AnalysisBasis, CoincidenceCategory, ExperimentSettings, InputKind};

pub const ANALYTIC_HEADER: &str = "theta_rad,alpha_deg,probability";
pub const ESTIMATE_HEADER: &str = "theta_rad,alpha_deg,estimate,stderr";

/// Inclusive `start:stop:steps` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl GridSpec {
    pub fn new(start: f64, stop: f64, steps: usize) -> Result<Self> {
        let g = Self { start, stop, steps };
        g.validate()?;
        Ok(g)
    }

    pub fn single(value: f64) -> Self {
        Self {
            start: value,
            stop: value,
            steps: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidGrid("steps must be at least 1".into()));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::InvalidGrid("endpoints must be finite".into()));
        }
        if self.stop < self.start {
            return Err(Error::InvalidGrid(format!(
                "stop {} is below start {}",
                self.stop, self.start
            )));
        }
        if self.steps == 1 && self.start != self.stop {
            return Err(Error::InvalidGrid("a single-step grid needs start == stop".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let span = self.stop - self.start;
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i == self.steps - 1 {
                    self.stop
                } else {
                    self.start + span * i as f64 / last
                }
            })
            .collect()
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(Error::InvalidGrid(format!("`{s}` is not start:stop:steps")));
        };
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidGrid(format!("`{x}` is not a number")))
        };
        let steps = n
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidGrid(format!("`{n}` is not a step count")))?;
        Self::new(num(a)?, num(b)?, steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub theta_rad: f64,
    pub alpha_deg: f64,
    pub value: f64,
    /// `None` for exact values.
    pub stderr: Option<f64>,
}

/// Grid of I(θ, α) values for one category, basis and input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSurface {
    pub basis: AnalysisBasis,
    pub input: InputKind,
    pub category: CoincidenceCategory,
    pub points: Vec<SurfacePoint>,
}

impl CorrelationSurface {
    pub fn is_analytic(&self) -> bool {
        self.points.iter().all(|p| p.stderr.is_none())
    }

    pub fn min(&self) -> Option<f64> {
        self.points.iter().map(|p| p.value).reduce(f64::min)
    }

    pub fn max(&self) -> Option<f64> {
        self.points.iter().map(|p| p.value).reduce(f64::max)
    }

    /// Analytic surfaces use the three-column header; estimated ones add a
    /// `stderr` column. Values print in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let analytic = self.is_analytic();
        let mut out = String::new();
        out.push_str(if analytic { ANALYTIC_HEADER } else { ESTIMATE_HEADER });
        out.push('\n');
        for p in &self.points {
            let _ = write!(out, "{},{},{}", p.theta_rad, p.alpha_deg, p.value);
            if !analytic {
                out.push(',');
                if let Some(e) = p.stderr {
                    let _ = write!(out, "{e}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Reads either CSV layout; an empty `stderr` cell reads as `None`.
pub fn parse_csv_points(text: &str) -> Result<Vec<SurfacePoint>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?.trim();
    let with_err = match header {
        ANALYTIC_HEADER => false,
        ESTIMATE_HEADER => true,
        other => return Err(Error::Parse(format!("unexpected header `{other}`"))),
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("`{s}` is not a number")))
    };
    lines
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            let expected = if with_err { 4 } else { 3 };
            if cells.len() != expected {
                return Err(Error::Parse(format!(
                    "row `{line}` has {} cells, expected {expected}",
                    cells.len()
                )));
            }
            let stderr = if with_err && !cells[3].trim().is_empty() {
                Some(num(cells[3])?)
            } else {
                None
            };
            Ok(SurfacePoint {
                theta_rad: num(cells[0])?,
                alpha_deg: num(cells[1])?,
                value: num(cells[2])?,
                stderr,
            })
        })
        .collect()
}

/// `(θ, α)` pairs in output order: α outer, θ inner.
pub fn grid_points(thetas: &GridSpec, alphas: &GridSpec) -> Vec<(f64, f64)> {
    let tv = thetas.values();
    alphas
        .values()
        .into_iter()
        .flat_map(|a| tv.iter().map(move |t| (*t, a)))
        .collect()
}

/// Exact surface from the evolved state, evaluated point by point in
/// parallel and returned in grid order.
pub fn analytic_surface(
    thetas: &GridSpec,
    alphas: &GridSpec,
    basis: AnalysisBasis,
    input: InputKind,
    category: CoincidenceCategory,
) -> Result<CorrelationSurface> {
    thetas.validate()?;
    alphas.validate()?;
    let points = grid_points(thetas, alphas)
        .into_par_iter()
        .map(|(theta, alpha)| {
            let s = ExperimentSettings::new(theta, alpha).basis(basis).input(input);
            Ok(SurfacePoint {
                theta_rad: theta,
                alpha_deg: alpha,
                value: category_probability::<f64>(&s, category)?,
                stderr: None,
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
    use proptest::prelude::*;

    #[test]
    fn grid_parsing_and_values() {
        let g: GridSpec = "0:90:13".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 13);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[12], 90.0);
        assert_eq!(v[1], 7.5);
        assert_eq!("90:90:1".parse::<GridSpec>().unwrap().values(), vec![90.0]);
        for bad in ["0:1", "0:1:0", "1:0:3", "a:1:2", "0:1:1", "0:inf:3"] {
            assert!(bad.parse::<GridSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn hv_surface_matches_closed_form() {
        let s = analytic_surface(
            &"0:6.283185307179586:9".parse().unwrap(),
            &"0:90:7".parse().unwrap(),
            AnalysisBasis::HV,
            InputKind::Entangled,
            CoincidenceCategory::HA,
        )
        .unwrap();
        assert_eq!(s.points.len(), 63);
        for p in &s.points {
            assert!((p.value - closed_form_ia(p.theta_rad, p.alpha_deg)).abs() < 1e-10);
        }
        assert!(s.is_analytic());
        assert!(s.to_csv().starts_with(ANALYTIC_HEADER));
    }

    #[test]
    fn estimate_csv_layout() {
        let s = CorrelationSurface {
            basis: AnalysisBasis::HV,
            input: InputKind::Entangled,
            category: CoincidenceCategory::HA,
            points: vec![
                SurfacePoint {
                    theta_rad: 0.0,
                    alpha_deg: 0.0,
                    value: 0.5,
                    stderr: Some(0.01),
                },
                SurfacePoint {
                    theta_rad: 1.0,
                    alpha_deg: 0.0,
                    value: 0.25,
                    stderr: None,
                },
            ],
        };
        let csv = s.to_csv();
        assert_eq!(csv, "theta_rad,alpha_deg,estimate,stderr\n0,0,0.5,0.01\n1,0,0.25,\n");
        assert_eq!(parse_csv_points(&csv).unwrap(), s.points);
        assert!(parse_csv_points("x,y\n1,2\n").is_err());
        assert!(parse_csv_points("theta_rad,alpha_deg,probability\n1,2\n").is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(vals in prop::collection::vec((any::<f64>(), -90.0f64..90.0, 0.0f64..1.0, prop::option::of(0.0f64..1.0)), 1..20)) {
            let points: Vec<SurfacePoint> = vals
                .into_iter()
                .filter(|v| v.0.is_finite())
                .map(|(t, a, v, e)| SurfacePoint { theta_rad: t, alpha_deg: a, value: v, stderr: e })
                .collect();
            let s = CorrelationSurface {
                basis: AnalysisBasis::DA,
                input: InputKind::Mixture,
                category: CoincidenceCategory::VB,
                points,
            };
            let back = parse_csv_points(&s.to_csv()).unwrap();
            prop_assert_eq!(back.len(), s.points.len());
            for (a, b) in back.iter().zip(&s.points) {
                prop_assert_eq!(a.theta_rad.to_bits(), b.theta_rad.to_bits());
                prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
                prop_assert_eq!(a.stderr.map(f64::to_bits), b.stderr.map(f64::to_bits));
            }
        }
    }
}
