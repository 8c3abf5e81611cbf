//! The delayed-choice apparatus: an entangled pair, a Mach-Zehnder front end
//! closed by a polarization-dependent beam-splitter, 45° erasers on both
//! outputs, and a polarization rotator on the corroborative photon.
//!
//! Evolution is exact; every probability below comes from the evolved state.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{
    beam_splitter_50_50, beam_splitter_with_convention, pbs_rotated, pdbs, phase_shifter, polarization_rotator,
    BsConvention, Circuit, Side,
};
use crate::scalar::{deg_to_rad, Real};
use crate::state::{cm, MixedState, Mode, PathLabel, Polarization, PolarizationState, TwoPhotonState};

/// Orientation of the eraser splitters. The −45° form transmits the
/// anti-diagonal component and lands on the port labelling of the particle
/// and wave operators as printed.
pub const ERASER_ANGLE_DEG: f64 = -45.0;

/// Test-side polarization rotation that turns the H/V analysis into the
/// diagonal one. For Φ+ this equals advancing the corroborative rotator by
/// +45°.
pub const DA_TEST_ROTATION_DEG: f64 = -45.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisBasis {
    #[default]
    HV,
    DA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// Φ+
    #[default]
    Entangled,
    /// ½|HH⟩⟨HH| + ½|VV⟩⟨VV|
    Mixture,
}

macro_rules! cli_enum {
    ($ty:ty { $($s:literal => $v:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($s => Ok($v),)+
                    other => Err(Error::Parse(format!("unknown {} `{other}`", stringify!($ty)))),
                }
            }
        }
    };
}

cli_enum!(AnalysisBasis { "hv" => AnalysisBasis::HV, "da" => AnalysisBasis::DA });
cli_enum!(InputKind { "entangled" => InputKind::Entangled, "mixture" => InputKind::Mixture });

impl fmt::Display for AnalysisBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnalysisBasis::HV => "hv",
            AnalysisBasis::DA => "da",
        })
    }
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputKind::Entangled => "entangled",
            InputKind::Mixture => "mixture",
        })
    }
}

/// The six detectors, in the canonical index order used by count tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DetectorId {
    #[serde(rename = "D_H")]
    DH,
    #[serde(rename = "D_V")]
    DV,
    #[serde(rename = "D_a")]
    Da,
    #[serde(rename = "D_a'")]
    DaPrime,
    #[serde(rename = "D_b")]
    Db,
    #[serde(rename = "D_b'")]
    DbPrime,
}

impl DetectorId {
    pub const ALL: [DetectorId; 6] = [
        DetectorId::DH,
        DetectorId::DV,
        DetectorId::Da,
        DetectorId::DaPrime,
        DetectorId::Db,
        DetectorId::DbPrime,
    ];
    pub const TEST: [DetectorId; 4] = [DetectorId::Da, DetectorId::DaPrime, DetectorId::Db, DetectorId::DbPrime];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_corroborative(self) -> bool {
        matches!(self, DetectorId::DH | DetectorId::DV)
    }

    /// Whether this detector fires for a photon in `mode`. Test detectors
    /// ignore polarization.
    ///
    /// The A group sits behind the eraser fed by the arm that carries the
    /// `i(1 + e^{iθ})` wave amplitude (path `b` of the PDBS output), so that
    /// its D_H-conditioned rate has the `cos²(θ/2)` fringe; the B group sits
    /// behind the other eraser. Swapping the two only exchanges
    /// `cos²(θ/2) ↔ sin²(θ/2)`.
    pub fn sees(self, mode: &Mode) -> bool {
        match self {
            DetectorId::DH => *mode == cm(Polarization::H),
            DetectorId::DV => *mode == cm(Polarization::V),
            DetectorId::Da => mode.path == PathLabel::B,
            DetectorId::DaPrime => mode.path == PathLabel::BPrime,
            DetectorId::Db => mode.path == PathLabel::A,
            DetectorId::DbPrime => mode.path == PathLabel::APrime,
        }
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorId::DH => "D_H",
            DetectorId::DV => "D_V",
            DetectorId::Da => "D_a",
            DetectorId::DaPrime => "D_a'",
            DetectorId::Db => "D_b",
            DetectorId::DbPrime => "D_b'",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CorroborativeDetector {
    H,
    V,
}

impl CorroborativeDetector {
    pub fn detector(self) -> DetectorId {
        match self {
            CorroborativeDetector::H => DetectorId::DH,
            CorroborativeDetector::V => DetectorId::DV,
        }
    }

    pub fn other(self) -> Self {
        match self {
            CorroborativeDetector::H => CorroborativeDetector::V,
            CorroborativeDetector::V => CorroborativeDetector::H,
        }
    }
}

/// XOR group of test detectors: exactly one of the pair fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TestGroup {
    A,
    B,
}

impl TestGroup {
    pub fn detectors(self) -> [DetectorId; 2] {
        match self {
            TestGroup::A => [DetectorId::Da, DetectorId::DaPrime],
            TestGroup::B => [DetectorId::Db, DetectorId::DbPrime],
        }
    }

    pub fn of(detector: DetectorId) -> Option<Self> {
        match detector {
            DetectorId::Da | DetectorId::DaPrime => Some(TestGroup::A),
            DetectorId::Db | DetectorId::DbPrime => Some(TestGroup::B),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            TestGroup::A => TestGroup::B,
            TestGroup::B => TestGroup::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CoincidenceCategory {
    pub corroborative: CorroborativeDetector,
    pub group: TestGroup,
}

impl CoincidenceCategory {
    /// `(D_H, A)`, the correlation plotted as the morphing surface.
    pub const HA: Self = Self::new(CorroborativeDetector::H, TestGroup::A);
    pub const HB: Self = Self::new(CorroborativeDetector::H, TestGroup::B);
    pub const VA: Self = Self::new(CorroborativeDetector::V, TestGroup::A);
    pub const VB: Self = Self::new(CorroborativeDetector::V, TestGroup::B);
    pub const ALL: [Self; 4] = [Self::HA, Self::HB, Self::VA, Self::VB];

    pub const fn new(corroborative: CorroborativeDetector, group: TestGroup) -> Self {
        Self { corroborative, group }
    }

    pub fn index(self) -> usize {
        2 * self.corroborative as usize + self.group as usize
    }

    /// Category sharing the test group but heralded by the other
    /// corroborative detector.
    pub fn partner(self) -> Self {
        Self::new(self.corroborative.other(), self.group)
    }

    pub fn label(self) -> &'static str {
        match self.index() {
            0 => "H-A",
            1 => "H-B",
            2 => "V-A",
            _ => "V-B",
        }
    }
}

impl fmt::Display for CoincidenceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CoincidenceCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown category `{s}` (expected H-A, H-B, V-A or V-B)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    /// Interferometer phase, radians.
    pub theta: f64,
    /// Corroborative rotator angle, degrees.
    pub alpha_deg: f64,
    pub basis: AnalysisBasis,
    pub input: InputKind,
}

impl ExperimentSettings {
    pub fn new(theta: f64, alpha_deg: f64) -> Self {
        Self {
            theta,
            alpha_deg,
            basis: AnalysisBasis::HV,
            input: InputKind::Entangled,
        }
    }

    pub fn basis(mut self, basis: AnalysisBasis) -> Self {
        self.basis = basis;
        self
    }

    pub fn input(mut self, input: InputKind) -> Self {
        self.input = input;
        self
    }
}

/// Closed-form heralded correlation `cos²(θ/2)·sin²α + ½·cos²α`, with `alpha_deg` in degrees.
pub fn closed_form_ia<T: Real>(theta: T, alpha_deg: T) -> T {
    let half = T::lit(0.5);
    let a = deg_to_rad(alpha_deg);
    let c = (theta * half).cos();
    c * c * a.sin() * a.sin() + half * a.cos() * a.cos()
}

fn test_modes() -> Vec<Mode> {
    [Mode::both(PathLabel::A), Mode::both(PathLabel::B)].concat()
}

/// The apparatus split at the two intermediate states worth inspecting.
#[derive(Debug, Clone)]
pub struct QdcApparatus<T> {
    /// Optional DA rotation, entrance BS, phase θ on arm b, PDBS.
    pub front_end: Circuit<T>,
    /// Eraser splitters on both PDBS outputs.
    pub erasers: Circuit<T>,
    /// Rotator on the corroborative photon.
    pub corroborative: Circuit<T>,
}

impl<T: Real> QdcApparatus<T> {
    pub fn new(settings: &ExperimentSettings) -> Result<Self> {
        Self::with_convention(settings, BsConvention::Symmetric)
    }

    /// Same apparatus with the entrance splitter built in `convention`.
    pub fn with_convention(settings: &ExperimentSettings, convention: BsConvention) -> Result<Self> {
        use PathLabel::{APrime, BPrime, A, B};
        let mut front_end = Circuit::new(Side::Test, test_modes())?;
        if settings.basis == AnalysisBasis::DA {
            front_end.push(polarization_rotator(A, T::lit(DA_TEST_ROTATION_DEG))?.renamed("DA rotation"))?;
        }
        front_end.push(beam_splitter_with_convention(A, B, A, B, convention)?)?;
        front_end.push(phase_shifter(B, T::lit(settings.theta))?)?;
        front_end.push(pdbs(A, B, A, B)?)?;

        let mut erasers = Circuit::new(Side::Test, test_modes())?;
        erasers.push(pbs_rotated(A, A, APrime, T::lit(ERASER_ANGLE_DEG))?.renamed("PBS1"))?;
        erasers.push(pbs_rotated(B, B, BPrime, T::lit(ERASER_ANGLE_DEG))?.renamed("PBS2"))?;

        let mut corroborative = Circuit::new(Side::Corroborative, Mode::both(PathLabel::C).to_vec())?;
        corroborative.push(polarization_rotator(PathLabel::C, T::lit(settings.alpha_deg))?.renamed("EOM"))?;

        Ok(Self {
            front_end,
            erasers,
            corroborative,
        })
    }

    pub fn after_front_end(&self, input: &TwoPhotonState<T>) -> Result<TwoPhotonState<T>> {
        self.front_end.apply(input)
    }

    pub fn after_erasers(&self, input: &TwoPhotonState<T>) -> Result<TwoPhotonState<T>> {
        self.erasers.apply(&self.after_front_end(input)?)
    }

    pub fn evolve(&self, input: &TwoPhotonState<T>) -> Result<TwoPhotonState<T>> {
        self.corroborative.apply(&self.after_erasers(input)?)
    }
}

/// Evolved output: pure for the entangled input, an ensemble for the mixture.
#[derive(Debug, Clone, PartialEq)]
pub enum QdcState<T> {
    Pure(TwoPhotonState<T>),
    Mixed(MixedState<T>),
}

impl<T: Real> QdcState<T> {
    pub fn probability<F>(&self, pred: F) -> T
    where
        F: FnMut(&Mode, &Mode) -> bool,
    {
        match self {
            QdcState::Pure(s) => s.marginal_probability(pred),
            QdcState::Mixed(m) => m.ensemble_probability(pred),
        }
    }

    pub fn detector_pair_probability(&self, corroborative: DetectorId, test: DetectorId) -> T {
        self.probability(|c, t| corroborative.sees(c) && test.sees(t))
    }
}

/// Input prepared at the source: Φ+ or its dephased mixture.
pub fn source_state<T: Real>(input: InputKind) -> QdcState<T> {
    match input {
        InputKind::Entangled => QdcState::Pure(TwoPhotonState::phi_plus()),
        InputKind::Mixture => QdcState::Mixed(MixedState::dephased_phi_plus()),
    }
}

pub fn build_qdc_state<T: Real>(settings: &ExperimentSettings) -> Result<QdcState<T>> {
    let apparatus = QdcApparatus::<T>::new(settings)?;
    Ok(match source_state::<T>(settings.input) {
        QdcState::Pure(s) => QdcState::Pure(apparatus.evolve(&s)?),
        QdcState::Mixed(m) => QdcState::Mixed(m.try_map(|s| apparatus.evolve(s))?),
    })
}

/// Joint probability of one corroborative detector and one test detector
/// firing, indexed `[corroborative][test]` in [`DetectorId::TEST`] order.
pub type JointTable<T> = [[T; 4]; 2];

pub fn joint_detector_probabilities<T: Real>(settings: &ExperimentSettings) -> Result<JointTable<T>> {
    let state = build_qdc_state::<T>(settings)?;
    let mut table = [[T::zero(); 4]; 2];
    for (i, c) in [DetectorId::DH, DetectorId::DV].into_iter().enumerate() {
        for (j, t) in DetectorId::TEST.into_iter().enumerate() {
            table[i][j] = state.detector_pair_probability(c, t);
        }
    }
    Ok(table)
}

fn joint_from_table<T: Real>(table: &JointTable<T>, category: CoincidenceCategory) -> T {
    let row = &table[category.corroborative as usize];
    let base = 2 * category.group as usize;
    row[base] + row[base + 1]
}

/// Unconditioned probability of the coincidence category. The four
/// categories partition all two-fold coincidences.
pub fn joint_probability<T: Real>(settings: &ExperimentSettings, category: CoincidenceCategory) -> Result<T> {
    Ok(joint_from_table(
        &joint_detector_probabilities::<T>(settings)?,
        category,
    ))
}

/// Probability of the test group given that the category's corroborative
/// detector fired. This is the quantity the closed form describes.
pub fn category_probability<T: Real>(settings: &ExperimentSettings, category: CoincidenceCategory) -> Result<T> {
    let table = joint_detector_probabilities::<T>(settings)?;
    conditional_from_table(&table, category)
}

pub(crate) fn conditional_from_table<T: Real>(table: &JointTable<T>, category: CoincidenceCategory) -> Result<T> {
    let herald = joint_from_table(table, CoincidenceCategory::new(category.corroborative, TestGroup::A))
        + joint_from_table(table, CoincidenceCategory::new(category.corroborative, TestGroup::B));
    if herald <= T::zero() {
        return Err(Error::NoConditionedCounts);
    }
    Ok(joint_from_table(table, category) / herald)
}

/// `1 − P(group | other corroborative detector)`: the complementary
/// correlation paired with `category`.
pub fn complementary_probability<T: Real>(settings: &ExperimentSettings, category: CoincidenceCategory) -> Result<T> {
    Ok(T::one() - category_probability::<T>(settings, category.partner())?)
}

/// Named single-photon and two-photon configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    OpenMzi,
    ClosedMzi,
    Qdc,
}

cli_enum!(Preset { "open-mzi" => Preset::OpenMzi, "closed-mzi" => Preset::ClosedMzi, "qdc" => Preset::Qdc });

/// Detection probabilities `[P(D_a), P(D_b)]` of a single photon entering
/// port `a` of a Mach-Zehnder interferometer with phase `theta` on arm `b`.
/// Without the output splitter (`closed = false`) the arms go straight to
/// the detectors.
pub fn mach_zehnder<T: Real>(theta: T, closed: bool) -> Result<[T; 2]> {
    use PathLabel::{A, B};
    let mut circuit = Circuit::new(Side::Test, test_modes())?;
    circuit.push(beam_splitter_50_50(A, B, A, B)?)?;
    circuit.push(phase_shifter(B, theta)?)?;
    if closed {
        circuit.push(beam_splitter_50_50(A, B, A, B)?)?;
    }
    // The corroborative photon only spectates.
    let input = TwoPhotonState::product(PolarizationState::H, PolarizationState::V, A)?;
    let out = circuit.apply(&input)?;
    Ok([
        out.marginal_probability(|_, t| t.path == A),
        out.marginal_probability(|_, t| t.path == B),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn evolved(settings: &ExperimentSettings) -> TwoPhotonState<f64> {
        match build_qdc_state::<f64>(settings).unwrap() {
            QdcState::Pure(s) => s,
            QdcState::Mixed(_) => unreachable!(),
        }
    }

    /// Enumerates amplitudes by hand: Σ over the group's terminal modes of
    /// |amp|², divided by Σ over the herald's keys.
    fn brute_force_conditional(state: &TwoPhotonState<f64>, category: CoincidenceCategory) -> f64 {
        let herald = category.corroborative.detector();
        let mut num = 0.0;
        let mut den = 0.0;
        for ((c, t), a) in state.iter() {
            if !herald.sees(c) {
                continue;
            }
            den += a.norm_sqr();
            if category.group.detectors().iter().any(|d| d.sees(t)) {
                num += a.norm_sqr();
            }
        }
        num / den
    }

    #[test]
    fn closed_form_examples() {
        assert_abs_diff_eq!(closed_form_ia(0.0, 90.0), 1.0, epsilon = 1e-15);
        for th in [0.0, FRAC_PI_2, PI] {
            assert_abs_diff_eq!(closed_form_ia(th, 0.0), 0.5, epsilon = 1e-15);
        }
        // 0.5·0.75 + 0.5·0.25
        assert_abs_diff_eq!(closed_form_ia(FRAC_PI_2, 60.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn category_probability_examples() {
        for th in [0.0, 1.1, PI, 4.0] {
            let p = category_probability::<f64>(&ExperimentSettings::new(th, 0.0), CoincidenceCategory::HA).unwrap();
            assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
        }
        let p = category_probability::<f64>(&ExperimentSettings::new(0.0, 90.0), CoincidenceCategory::HA).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
        let p = category_probability::<f64>(&ExperimentSettings::new(PI, 45.0), CoincidenceCategory::HA).unwrap();
        assert_abs_diff_eq!(p, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn state_vector_matches_brute_force_expansion() {
        for basis in [AnalysisBasis::HV, AnalysisBasis::DA] {
            for (th, al) in [(0.3, 10.0), (2.0, 70.0), (5.5, -20.0)] {
                let s = ExperimentSettings::new(th, al).basis(basis);
                let st = evolved(&s);
                for cat in CoincidenceCategory::ALL {
                    let engine = category_probability::<f64>(&s, cat).unwrap();
                    assert_abs_diff_eq!(engine, brute_force_conditional(&st, cat), epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn pre_eraser_amplitude() {
        let th = 0.8;
        let app = QdcApparatus::<f64>::new(&ExperimentSettings::new(th, 0.0)).unwrap();
        let s = app.after_front_end(&TwoPhotonState::phi_plus()).unwrap();
        let a = s.amplitude(cm(Polarization::H), crate::state::tm(PathLabel::B, Polarization::H));
        let want = num_complex::Complex::new(0.0, 0.5) * num_complex::Complex::from_polar(1.0, th);
        assert_abs_diff_eq!((a - want).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn categories_partition() {
        for input in [InputKind::Entangled, InputKind::Mixture] {
            for basis in [AnalysisBasis::HV, AnalysisBasis::DA] {
                let s = ExperimentSettings::new(1.9, 33.0).basis(basis).input(input);
                let total: f64 = CoincidenceCategory::ALL
                    .iter()
                    .map(|c| joint_probability::<f64>(&s, *c).unwrap())
                    .sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn complementary_examples() {
        let s = ExperimentSettings::new(0.0, 90.0);
        assert_abs_diff_eq!(
            complementary_probability::<f64>(&s, CoincidenceCategory::VA).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        let s = ExperimentSettings::new(2.3, 52.0);
        let ha = joint_probability::<f64>(&s, CoincidenceCategory::HA).unwrap();
        let va = joint_probability::<f64>(&s, CoincidenceCategory::VA).unwrap();
        let marginal = build_qdc_state::<f64>(&s)
            .unwrap()
            .probability(|_, t| TestGroup::A.detectors().iter().any(|d| d.sees(t)));
        assert_abs_diff_eq!(ha + va, marginal, epsilon = 1e-12);
        let hb = category_probability::<f64>(&s, CoincidenceCategory::HB).unwrap();
        let ha_c = category_probability::<f64>(&s, CoincidenceCategory::HA).unwrap();
        assert_abs_diff_eq!(hb, 1.0 - ha_c, epsilon = 1e-12);
    }

    #[test]
    fn da_basis_equals_advanced_corroborative_rotator() {
        // Independent route: no test-side rotation, rotator at α + 45°.
        for (th, al) in [(0.0, 0.0), (1.3, 20.0), (3.0, 45.0), (5.0, -60.0)] {
            let da = evolved(&ExperimentSettings::new(th, al).basis(AnalysisBasis::DA));
            let shifted = evolved(&ExperimentSettings::new(th, al + 45.0));
            assert_abs_diff_eq!(da.fidelity(&shifted), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mixture_matches_entangled_in_hv() {
        // Cross terms between particle and wave amplitudes cancel inside an
        // XOR group, so H/V analysis cannot tell the two inputs apart.
        for (th, al) in [(0.4, 15.0), (2.2, 65.0)] {
            let e = category_probability::<f64>(&ExperimentSettings::new(th, al), CoincidenceCategory::HA).unwrap();
            let m = category_probability::<f64>(
                &ExperimentSettings::new(th, al).input(InputKind::Mixture),
                CoincidenceCategory::HA,
            )
            .unwrap();
            assert_abs_diff_eq!(e, m, epsilon = 1e-12);
        }
    }

    #[test]
    fn mixture_uncorrelated_in_da() {
        for th in [0.0, 1.0, 2.5, TAU] {
            let mut seen = Vec::new();
            for al in [-45.0, 0.0, 30.0, 45.0] {
                let s = ExperimentSettings::new(th, al)
                    .basis(AnalysisBasis::DA)
                    .input(InputKind::Mixture);
                let h = category_probability::<f64>(&s, CoincidenceCategory::HA).unwrap();
                let v = category_probability::<f64>(&s, CoincidenceCategory::VA).unwrap();
                assert_abs_diff_eq!(h, v, epsilon = 1e-12);
                seen.push(h);
            }
            for p in &seen {
                assert_abs_diff_eq!(*p, seen[0], epsilon = 1e-12);
            }
            // marginal fringe of the test photon alone: ¼ + ½cos²(θ/2)
            let c = (th / 2.0).cos();
            assert_abs_diff_eq!(seen[0], 0.25 + 0.5 * c * c, epsilon = 1e-12);
        }
    }

    #[test]
    fn mzi_baselines() {
        for th in [0.0, 0.7, PI, 4.4] {
            let closed = mach_zehnder::<f64>(th, true).unwrap();
            assert_abs_diff_eq!(closed[0], (th / 2.0).sin().powi(2), epsilon = 1e-12);
            assert_abs_diff_eq!(closed[1], (th / 2.0).cos().powi(2), epsilon = 1e-12);
            let open = mach_zehnder::<f64>(th, false).unwrap();
            assert_abs_diff_eq!(open[0], 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(open[1], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn parsing() {
        assert_eq!("DA".parse::<AnalysisBasis>().unwrap(), AnalysisBasis::DA);
        assert_eq!("mixture".parse::<InputKind>().unwrap(), InputKind::Mixture);
        assert_eq!("v-b".parse::<CoincidenceCategory>().unwrap(), CoincidenceCategory::VB);
        assert_eq!("closed-mzi".parse::<Preset>().unwrap(), Preset::ClosedMzi);
        assert!("xy".parse::<AnalysisBasis>().is_err());
    }

    #[test]
    fn single_precision_pipeline() {
        let p = category_probability::<f32>(&ExperimentSettings::new(0.9, 37.0), CoincidenceCategory::HA).unwrap();
        assert!((p - closed_form_ia(0.9f32, 37.0)).abs() < 1e-5);
    }
}
