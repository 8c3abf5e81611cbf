//! Self-checks of the circuit engine against states written down by hand.
//!
//! Three reference states are built directly from their closed formulas:
//! after the polarization-dependent splitter, after the erasers, and after
//! the corroborative rotator. The evolved states must match them with
//! fidelity close to 1. The bulk-optics splitter (four PBSs around an
//! ordinary BS) must reproduce the ideal PDBS up to per-port phases.

use num_complex::Complex;
use serde::Serialize;

use crate::error::Result;
use crate::experiment::{closed_form_ia, CoincidenceCategory, DetectorId, ExperimentSettings, QdcApparatus};
use crate::optics::{beam_splitter_with_convention, pbs_rotated, pdbs, BsConvention, Circuit, OpticalElement, Side};
use crate::scalar::Real;
use crate::state::{cm, tm, Mode, PathLabel, Polarization, TwoPhotonState};
use crate::surface::GridSpec;

use PathLabel::{APrime, Aux, BPrime, A, B};
use Polarization::{H, V};

pub const FIDELITY_THRESHOLD: f64 = 1e-10;
pub const ORACLE_THRESHOLD: f64 = 1e-10;
pub const PHASE_MATRIX_THRESHOLD: f64 = 1e-12;
pub const CHECK_ALPHAS_DEG: [f64; 4] = [0.0, 30.0, 45.0, 90.0];
pub const CHECK_THETAS: [f64; 6] = [0.0, 0.5, std::f64::consts::FRAC_PI_2, 2.0, std::f64::consts::PI, 5.0];

type Terms<T> = Vec<(Mode, Complex<T>)>;

fn eith<T: Real>(theta: T) -> Complex<T> {
    Complex::from_polar(T::one(), theta)
}

fn i<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::one())
}

fn scale<T: Real>(terms: &Terms<T>, k: Complex<T>) -> Terms<T> {
    terms.iter().map(|(m, a)| (*m, *a * k)).collect()
}

/// `½(c_H(a_H + i·e^{iθ}·b_H) + (1/√2)·c_V(b_V(i + i·e^{iθ}) + a_V(1 − e^{iθ})))`
pub fn front_end_reference<T: Real>(theta: T) -> Result<TwoPhotonState<T>> {
    let (one, half, e) = (Complex::<T>::from(T::one()), T::lit(0.5), eith(theta));
    let r = T::FRAC_1_SQRT_2();
    TwoPhotonState::new([
        ((cm(H), tm(A, H)), one * half),
        ((cm(H), tm(B, H)), i::<T>() * e * half),
        ((cm(V), tm(B, V)), (i::<T>() + i::<T>() * e) * half * r),
        ((cm(V), tm(A, V)), (one - e) * half * r),
    ])
}

/// Test-photon terms heralded by a particle outcome:
/// `½(a_H + a′_V + i·e^{iθ}(b_H + b′_V))`.
pub fn particle_terms<T: Real>(theta: T) -> Terms<T> {
    let half = Complex::from(T::lit(0.5));
    let ie = i::<T>() * eith(theta) * half;
    vec![
        (tm(A, H), half),
        (tm(APrime, V), half),
        (tm(B, H), ie),
        (tm(BPrime, V), ie),
    ]
}

/// `(1/2√2)((1 − e^{iθ})(−a_H + a′_V) + (i·e^{iθ} + i)(−b_H + b′_V))`
pub fn wave_terms<T: Real>(theta: T) -> Terms<T> {
    let k = T::lit(0.5) * T::FRAC_1_SQRT_2();
    let e = eith(theta);
    let x = (Complex::from(T::one()) - e) * k;
    let y = (i::<T>() * e + i::<T>()) * k;
    vec![(tm(A, H), -x), (tm(APrime, V), x), (tm(B, H), -y), (tm(BPrime, V), y)]
}

fn heralded<T: Real>(c_h: Terms<T>, c_v: Terms<T>) -> Result<TwoPhotonState<T>> {
    let r = Complex::from(T::FRAC_1_SQRT_2());
    let entries = c_h
        .into_iter()
        .map(|(t, a)| ((cm(H), t), a * r))
        .chain(c_v.into_iter().map(|(t, a)| ((cm(V), t), a * r)));
    TwoPhotonState::new(entries)
}

/// `(1/√2)(c_H·[particle] + c_V·[wave])`
pub fn eraser_reference<T: Real>(theta: T) -> Result<TwoPhotonState<T>> {
    heralded(particle_terms(theta), wave_terms(theta))
}

/// `(1/√2)(c_H(cos α·[particle] − sin α·[wave]) + c_V(cos α·[wave] + sin α·[particle]))`
pub fn rotated_reference<T: Real>(theta: T, alpha_deg: T) -> Result<TwoPhotonState<T>> {
    let a = alpha_deg.to_radians();
    let (c, s) = (Complex::from(a.cos()), Complex::from(a.sin()));
    let (p, w) = (particle_terms(theta), wave_terms(theta));
    let c_h = [scale(&p, c), scale(&w, -s)].concat();
    let c_v = [scale(&w, c), scale(&p, s)].concat();
    heralded(c_h, c_v)
}

/// Bulk-optics PDBS on arms `a`, `b`. H is routed around the central BS,
/// V goes through it; `x2.H`, `x3.H` are the BS's unused vacuum inputs.
/// Internal paths are `Aux(0..=5)`.
pub fn composite_pdbs<T: Real>(convention: BsConvention) -> Result<Circuit<T>> {
    let modes = [
        &Mode::both(A)[..],
        &Mode::both(B)[..],
        &[Mode::new(Aux(2), H), Mode::new(Aux(3), H)],
    ]
    .concat();
    let zero = T::zero();
    Circuit::new(Side::Test, modes)?
        .with(pbs_rotated(A, Aux(0), Aux(2), zero)?.renamed("PBS in a"))?
        .with(pbs_rotated(B, Aux(1), Aux(3), zero)?.renamed("PBS in b"))?
        .with(beam_splitter_with_convention(
            Aux(2),
            Aux(3),
            Aux(4),
            Aux(5),
            convention,
        )?)?
        .with(pbs_rotated(A, Aux(0), Aux(4), zero)?.inverse().renamed("PBS out a"))?
        .with(pbs_rotated(B, Aux(1), Aux(5), zero)?.inverse().renamed("PBS out b"))
}

/// Largest entry deviation between the `a`/`b` blocks of two elements after
/// each output row of `candidate` is rotated onto `reference`'s phase.
/// Leakage into other ports counts as deviation.
pub fn phase_aligned_deviation<T: Real>(candidate: &OpticalElement<T>, reference: &OpticalElement<T>) -> f64 {
    let ports = [Mode::both(A), Mode::both(B)].concat();
    let mut worst = 0.0f64;
    for out in &ports {
        let row_c: Vec<Complex<T>> = ports.iter().map(|inp| candidate.element(*out, *inp)).collect();
        let row_r: Vec<Complex<T>> = ports.iter().map(|inp| reference.element(*out, *inp)).collect();
        let overlap: Complex<T> = row_c
            .iter()
            .zip(&row_r)
            .map(|(c, r)| r * c.conj())
            .fold(Complex::from(T::zero()), |a, b| a + b);
        let phase = if overlap.norm() > T::zero() {
            overlap / overlap.norm()
        } else {
            Complex::from(T::one())
        };
        for (c, r) in row_c.iter().zip(&row_r) {
            worst = worst.max((*c * phase - *r).norm().to_f64_lossy());
        }
    }
    // anything of an a/b input that ends up outside a/b
    for inp in &ports {
        let kept: f64 = ports
            .iter()
            .map(|o| candidate.element(*o, *inp).norm_sqr().to_f64_lossy())
            .sum();
        worst = worst.max((1.0 - kept).abs());
    }
    worst
}

/// Basis inputs on `a`, `b` plus superpositions spanning both paths and
/// both polarizations.
pub fn spanning_inputs<T: Real>() -> Result<Vec<TwoPhotonState<T>>> {
    let one = Complex::<T>::from(T::one());
    let mut out = Vec::new();
    for t in [tm(A, H), tm(A, V), tm(B, H), tm(B, V)] {
        out.push(TwoPhotonState::new([((cm(H), t), one)])?);
    }
    let iphase = i::<T>();
    out.push(TwoPhotonState::new([
        ((cm(H), tm(A, H)), one),
        ((cm(H), tm(A, V)), one),
    ])?);
    out.push(TwoPhotonState::new([
        ((cm(H), tm(A, V)), one),
        ((cm(H), tm(B, V)), iphase),
    ])?);
    out.push(TwoPhotonState::new([
        ((cm(H), tm(A, H)), one),
        ((cm(V), tm(B, V)), one),
    ])?);
    out.push(TwoPhotonState::new([
        ((cm(H), tm(A, H)), one),
        ((cm(H), tm(A, V)), iphase),
        ((cm(V), tm(B, H)), -one),
        ((cm(V), tm(B, V)), one),
    ])?);
    out.push(TwoPhotonState::phi_plus());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// `1 − fidelity` or an absolute deviation; lower is better.
    pub deviation: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: impl Into<String>, deviation: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            deviation,
            threshold,
            passed: deviation <= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub convention: String,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn worst_infidelity<I>(pairs: I) -> Result<f64>
where
    I: IntoIterator<Item = Result<(TwoPhotonState<f64>, TwoPhotonState<f64>)>>,
{
    let mut worst = 0.0f64;
    for pair in pairs {
        let (a, b) = pair?;
        worst = worst.max(1.0 - a.fidelity(&b));
    }
    Ok(worst)
}

/// Heralded correlation computed from amplitudes with the given splitter.
fn conditional_ha(apparatus: &QdcApparatus<f64>) -> Result<f64> {
    let state = apparatus.evolve(&TwoPhotonState::phi_plus())?;
    let cat = CoincidenceCategory::HA;
    let herald = DetectorId::DH;
    let den = state.marginal_probability(|c, _| herald.sees(c));
    let num = state.marginal_probability(|c, t| herald.sees(c) && cat.group.detectors().iter().any(|d| d.sees(t)));
    Ok(num / den)
}

pub fn check_front_end(convention: BsConvention) -> Result<CheckResult> {
    let worst = worst_infidelity(CHECK_THETAS.iter().map(|&th| {
        let app = QdcApparatus::with_convention(&ExperimentSettings::new(th, 0.0), convention)?;
        Ok((
            app.after_front_end(&TwoPhotonState::phi_plus())?,
            front_end_reference(th)?,
        ))
    }))?;
    Ok(CheckResult::new("state after PDBS", worst, FIDELITY_THRESHOLD))
}

pub fn check_erasers(convention: BsConvention) -> Result<CheckResult> {
    let worst = worst_infidelity(CHECK_THETAS.iter().map(|&th| {
        let app = QdcApparatus::with_convention(&ExperimentSettings::new(th, 0.0), convention)?;
        Ok((app.after_erasers(&TwoPhotonState::phi_plus())?, eraser_reference(th)?))
    }))?;
    Ok(CheckResult::new("state after erasers", worst, FIDELITY_THRESHOLD))
}

pub fn check_rotated(convention: BsConvention, alpha_deg: f64) -> Result<CheckResult> {
    let worst = worst_infidelity(CHECK_THETAS.iter().map(|&th| {
        let app = QdcApparatus::with_convention(&ExperimentSettings::new(th, alpha_deg), convention)?;
        Ok((
            app.evolve(&TwoPhotonState::phi_plus())?,
            rotated_reference(th, alpha_deg)?,
        ))
    }))?;
    Ok(CheckResult::new(
        format!("state after rotator α={alpha_deg}°"),
        worst,
        FIDELITY_THRESHOLD,
    ))
}

/// Heralded correlation against the closed form on an `n × n` grid over
/// θ ∈ [0, 2π], α ∈ [0°, 90°].
pub fn check_oracle_grid(convention: BsConvention, n: usize) -> Result<CheckResult> {
    let thetas = GridSpec::new(0.0, std::f64::consts::TAU, n)?;
    let alphas = GridSpec::new(0.0, 90.0, n)?;
    let mut worst = 0.0f64;
    for alpha in alphas.values() {
        for theta in thetas.values() {
            let app = QdcApparatus::with_convention(&ExperimentSettings::new(theta, alpha), convention)?;
            worst = worst.max((conditional_ha(&app)? - closed_form_ia(theta, alpha)).abs());
        }
    }
    Ok(CheckResult::new(
        format!("closed-form correlation on {n}×{n} grid"),
        worst,
        ORACLE_THRESHOLD,
    ))
}

pub fn check_composite_pdbs(convention: BsConvention) -> Result<Vec<CheckResult>> {
    let composite = composite_pdbs::<f64>(convention)?;
    let ideal = pdbs::<f64>(A, B, A, B)?;
    let worst = worst_infidelity(
        spanning_inputs::<f64>()?
            .into_iter()
            .map(|s| Ok((composite.apply(&s)?, ideal.apply(&s)?))),
    )?;
    let matrix = phase_aligned_deviation(&composite.compose()?, &ideal);
    Ok(vec![
        CheckResult::new("composite PDBS on spanning inputs", worst, FIDELITY_THRESHOLD),
        CheckResult::new(
            "composite PDBS matrix up to port phases",
            matrix,
            PHASE_MATRIX_THRESHOLD,
        ),
    ])
}

pub fn check_unitarity(convention: BsConvention) -> Result<CheckResult> {
    let app = QdcApparatus::<f64>::with_convention(&ExperimentSettings::new(1.0, 30.0), convention)?;
    let composite = composite_pdbs::<f64>(convention)?;
    let worst = [&app.front_end, &app.erasers, &app.corroborative, &composite]
        .iter()
        .flat_map(|c| c.stages())
        .map(|e| e.check_unitary().max_deviation)
        .fold(0.0f64, f64::max);
    Ok(CheckResult::new("element unitarity", worst, f64::UNITARY_TOL))
}

/// Every check, in a fixed order. `grid` sets the closed-form grid size.
pub fn run_all(convention: BsConvention, grid: usize) -> Result<VerifyReport> {
    let mut checks = vec![
        check_unitarity(convention)?,
        check_front_end(convention)?,
        check_erasers(convention)?,
    ];
    for alpha in CHECK_ALPHAS_DEG {
        checks.push(check_rotated(convention, alpha)?);
    }
    checks.push(check_oracle_grid(convention, grid)?);
    checks.extend(check_composite_pdbs(convention)?);
    Ok(VerifyReport {
        convention: format!("{convention:?}").to_lowercase(),
        checks,
    })
}
