//! Mode labels and the two-photon amplitude algebra.
//!
//! A state is a sparse map from `(corroborative mode, test mode)` to a complex
//! amplitude. Every key describes one photon on each side sitting on top of
//! the vacuum, so the vacuum itself never appears.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use num_traits::Zero;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::scalar::{is_finite, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const ALL: [Polarization; 2] = [Polarization::H, Polarization::V];

    pub fn orthogonal(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::H => "H",
            Polarization::V => "V",
        })
    }
}

/// Polarization states used to prepare inputs. Only `H` and `V` are basis
/// labels; the diagonal states expand into them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarizationState {
    H,
    V,
    /// (H + V)/√2
    D,
    /// (H − V)/√2
    A,
}

impl PolarizationState {
    pub fn components<T: Real>(self) -> Vec<(Polarization, Complex<T>)> {
        let one = Complex::new(T::one(), T::zero());
        let r = Complex::new(T::FRAC_1_SQRT_2(), T::zero());
        match self {
            PolarizationState::H => vec![(Polarization::H, one)],
            PolarizationState::V => vec![(Polarization::V, one)],
            PolarizationState::D => vec![(Polarization::H, r), (Polarization::V, r)],
            PolarizationState::A => vec![(Polarization::H, r), (Polarization::V, -r)],
        }
    }
}

/// Spatial path of a photon. `C` is the corroborative photon's only path;
/// the remaining labels belong to the test photon. `Aux` labels are internal
/// ports of composite devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathLabel {
    C,
    A,
    B,
    APrime,
    BPrime,
    Aux(u8),
}

impl PathLabel {
    pub fn is_corroborative(self) -> bool {
        self == PathLabel::C
    }
}

impl fmt::Display for PathLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathLabel::C => f.write_str("c"),
            PathLabel::A => f.write_str("a"),
            PathLabel::B => f.write_str("b"),
            PathLabel::APrime => f.write_str("a'"),
            PathLabel::BPrime => f.write_str("b'"),
            PathLabel::Aux(n) => write!(f, "x{n}"),
        }
    }
}

impl FromStr for PathLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "c" => PathLabel::C,
            "a" => PathLabel::A,
            "b" => PathLabel::B,
            "a'" | "a′" => PathLabel::APrime,
            "b'" | "b′" => PathLabel::BPrime,
            other => match other.strip_prefix('x').map(str::parse::<u8>) {
                Some(Ok(n)) => PathLabel::Aux(n),
                _ => return Err(Error::Parse(format!("unknown path label `{other}`"))),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mode {
    pub path: PathLabel,
    pub pol: Polarization,
}

impl Mode {
    pub const fn new(path: PathLabel, pol: Polarization) -> Self {
        Self { path, pol }
    }

    /// Both polarization modes of one path.
    pub fn both(path: PathLabel) -> [Mode; 2] {
        [Mode::new(path, Polarization::H), Mode::new(path, Polarization::V)]
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.path, self.pol)
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (path, pol) = s
            .rsplit_once('.')
            .ok_or_else(|| Error::Parse(format!("mode `{s}` lacks a `.`")))?;
        let pol = match pol {
            "H" => Polarization::H,
            "V" => Polarization::V,
            other => return Err(Error::Parse(format!("unknown polarization `{other}`"))),
        };
        Ok(Mode::new(path.parse()?, pol))
    }
}

/// Shorthand for the corroborative mode with the given polarization.
pub const fn cm(pol: Polarization) -> Mode {
    Mode::new(PathLabel::C, pol)
}

/// Shorthand for a test-photon mode.
pub const fn tm(path: PathLabel, pol: Polarization) -> Mode {
    Mode::new(path, pol)
}

pub type ModePair = (Mode, Mode);

/// Normalized pure state of the corroborative/test photon pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonState<T> {
    amps: BTreeMap<ModePair, Complex<T>>,
}

impl<T: Real> TwoPhotonState<T> {
    /// Builds a normalized state. Duplicate keys are summed first.
    pub fn new<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ModePair, Complex<T>)>,
    {
        let mut amps = BTreeMap::new();
        let mut any = false;
        for ((cm, tm), amp) in entries {
            any = true;
            check_sides(cm, tm)?;
            if !is_finite(&amp) {
                return Err(Error::NonFinite);
            }
            *amps.entry((cm, tm)).or_insert_with(Complex::zero) += amp;
        }
        if !any {
            return Err(Error::EmptyState);
        }
        amps.retain(|_, a: &mut Complex<T>| !a.is_zero());
        let norm = amps.values().fold(T::zero(), |acc, a| acc + a.norm_sqr()).sqrt();
        if norm.is_zero() {
            return Err(Error::DegenerateState);
        }
        for a in amps.values_mut() {
            *a /= norm;
        }
        Ok(Self { amps })
    }

    /// The maximally entangled `(|H⟩_c|H⟩_a + |V⟩_c|V⟩_a)/√2`.
    pub fn phi_plus() -> Self {
        use Polarization::{H, V};
        let one = Complex::new(T::one(), T::zero());
        Self::new([((cm(H), tm(PathLabel::A, H)), one), ((cm(V), tm(PathLabel::A, V)), one)]).expect("static state")
    }

    /// Product state `|c⟩ ⊗ |test⟩` of two polarization states.
    pub fn product(corroborative: PolarizationState, test: PolarizationState, path: PathLabel) -> Result<Self> {
        let mut entries = Vec::new();
        for (pc, ac) in corroborative.components::<T>() {
            for (pt, at) in test.components::<T>() {
                entries.push(((cm(pc), tm(path, pt)), ac * at));
            }
        }
        Self::new(entries)
    }

    /// Wraps amplitudes produced by a norm-preserving map.
    pub(crate) fn from_evolved(amps: BTreeMap<ModePair, Complex<T>>) -> Self {
        Self { amps }
    }

    pub fn amplitude(&self, corroborative: Mode, test: Mode) -> Complex<T> {
        self.amps
            .get(&(corroborative, test))
            .copied()
            .unwrap_or_else(Complex::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ModePair, &Complex<T>)> {
        self.amps.iter()
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.values().fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> Complex<T> {
        let (small, large, flip) = if self.amps.len() <= other.amps.len() {
            (&self.amps, &other.amps, false)
        } else {
            (&other.amps, &self.amps, true)
        };
        let mut acc = Complex::zero();
        for (k, a) in small {
            if let Some(b) = large.get(k) {
                acc += if flip { b.conj() * a } else { a.conj() * b };
            }
        }
        acc
    }

    /// `|⟨self|other⟩|²`, blind to global phase.
    pub fn fidelity(&self, other: &Self) -> T {
        self.inner(other).norm_sqr()
    }

    /// Total probability of the keys selected by `pred`.
    pub fn marginal_probability<F>(&self, mut pred: F) -> T
    where
        F: FnMut(&Mode, &Mode) -> bool,
    {
        self.amps
            .iter()
            .filter(|((c, t), _)| pred(c, t))
            .fold(T::zero(), |acc, (_, a)| acc + a.norm_sqr())
    }

    /// Multiplies every amplitude by `e^{iφ}`.
    pub fn with_global_phase(&self, phi: T) -> Self {
        let p = Complex::from_polar(T::one(), phi);
        Self {
            amps: self.amps.iter().map(|(k, a)| (*k, *a * p)).collect(),
        }
    }

    /// JSON object `"cPath.cPol|tPath.tPol" → [re, im]`.
    pub fn to_dump_json(&self) -> Value {
        let mut map = Map::new();
        for ((c, t), a) in &self.amps {
            map.insert(
                format!("{c}|{t}"),
                Value::Array(vec![a.re.to_f64_lossy().into(), a.im.to_f64_lossy().into()]),
            );
        }
        Value::Object(map)
    }

    /// Parses the dump format and renormalizes.
    pub fn from_dump_json(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("state dump must be an object".into()))?;
        let mut entries = Vec::with_capacity(obj.len());
        for (key, v) in obj {
            let (c, t) = key
                .split_once('|')
                .ok_or_else(|| Error::Parse(format!("key `{key}` lacks `|`")))?;
            let pair = v
                .as_array()
                .filter(|a| a.len() == 2)
                .and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)))
                .ok_or_else(|| Error::Parse(format!("value of `{key}` must be [re, im]")))?;
            entries.push(((c.parse()?, t.parse()?), Complex::new(T::lit(pair.0), T::lit(pair.1))));
        }
        Self::new(entries)
    }
}

fn check_sides(c: Mode, t: Mode) -> Result<()> {
    if !c.path.is_corroborative() {
        return Err(Error::WrongSide {
            mode: c,
            side: "corroborative",
        });
    }
    if t.path.is_corroborative() {
        return Err(Error::WrongSide { mode: t, side: "test" });
    }
    Ok(())
}

/// Free-function form of [`TwoPhotonState::new`].
pub fn make_state<T: Real>(entries: Vec<(ModePair, Complex<T>)>) -> Result<TwoPhotonState<T>> {
    TwoPhotonState::new(entries)
}

pub fn fidelity<T: Real>(s1: &TwoPhotonState<T>, s2: &TwoPhotonState<T>) -> T {
    s1.fidelity(s2)
}

/// Classical ensemble of pure states.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedState<T> {
    components: Vec<(T, TwoPhotonState<T>)>,
}

impl<T: Real> MixedState<T> {
    pub fn new(components: Vec<(T, TwoPhotonState<T>)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyMixture);
        }
        let mut total = T::zero();
        for (w, _) in &components {
            if !w.is_finite() || *w < T::zero() {
                return Err(Error::NegativeWeight(w.to_f64_lossy()));
            }
            total += *w;
        }
        if (total - T::one()).abs() > T::NORM_TOL {
            return Err(Error::WeightSum(total.to_f64_lossy()));
        }
        Ok(Self { components })
    }

    /// `½|HH⟩⟨HH| + ½|VV⟩⟨VV|` on the source output paths: the dephased
    /// counterpart of [`TwoPhotonState::phi_plus`].
    pub fn dephased_phi_plus() -> Self {
        let half = T::lit(0.5);
        let hh = TwoPhotonState::product(PolarizationState::H, PolarizationState::H, PathLabel::A);
        let vv = TwoPhotonState::product(PolarizationState::V, PolarizationState::V, PathLabel::A);
        Self::new(vec![(half, hh.expect("static")), (half, vv.expect("static"))]).expect("static mixture")
    }

    pub fn components(&self) -> &[(T, TwoPhotonState<T>)] {
        &self.components
    }

    /// Applies a per-component map, keeping weights.
    pub fn try_map<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&TwoPhotonState<T>) -> Result<TwoPhotonState<T>>,
    {
        let components = self
            .components
            .iter()
            .map(|(w, s)| Ok((*w, f(s)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    pub fn ensemble_probability<F>(&self, mut pred: F) -> T
    where
        F: FnMut(&Mode, &Mode) -> bool,
    {
        self.components
            .iter()
            .fold(T::zero(), |acc, (w, s)| acc + *w * s.marginal_probability(&mut pred))
    }
}

pub fn mix<T: Real>(components: Vec<(T, TwoPhotonState<T>)>) -> Result<MixedState<T>> {
    MixedState::new(components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use PathLabel::{A, B};
    use Polarization::{H, V};

    fn one() -> Complex<f64> {
        Complex::new(1.0, 0.0)
    }

    fn hh() -> TwoPhotonState<f64> {
        TwoPhotonState::new([((cm(H), tm(A, H)), one())]).unwrap()
    }

    fn vv() -> TwoPhotonState<f64> {
        TwoPhotonState::new([((cm(V), tm(A, V)), one())]).unwrap()
    }

    #[test]
    fn bell_state_amplitudes() {
        let s = make_state(vec![((cm(H), tm(A, H)), one()), ((cm(V), tm(A, V)), one())]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(s.amplitude(cm(H), tm(A, H)).re, r, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitude(cm(V), tm(A, V)).re, r, epsilon = 1e-15);
        assert_abs_diff_eq!(s.fidelity(&TwoPhotonState::phi_plus()), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn already_normalized_single_term() {
        let s = hh();
        assert_eq!(s.amplitude(cm(H), tm(A, H)), one());
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn three_four_five() {
        let s = make_state(vec![
            ((cm(H), tm(A, H)), Complex::new(3.0, 0.0)),
            ((cm(H), tm(A, V)), Complex::new(4.0, 0.0)),
        ])
        .unwrap();
        assert_abs_diff_eq!(s.amplitude(cm(H), tm(A, H)).re, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitude(cm(H), tm(A, V)).re, 0.8, epsilon = 1e-15);
    }

    #[test]
    fn duplicates_summed_before_normalizing() {
        let s = make_state(vec![
            ((cm(H), tm(A, H)), Complex::new(1.5, 0.0)),
            ((cm(H), tm(A, H)), Complex::new(1.5, 0.0)),
            ((cm(H), tm(A, V)), Complex::new(4.0, 0.0)),
        ])
        .unwrap();
        assert_abs_diff_eq!(s.amplitude(cm(H), tm(A, H)).re, 0.6, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_and_empty_rejected() {
        let zero = Complex::new(0.0, 0.0);
        assert!(matches!(
            make_state(vec![((cm(H), tm(A, H)), zero), ((cm(V), tm(A, V)), zero)]),
            Err(Error::DegenerateState)
        ));
        assert!(matches!(
            make_state(vec![((cm(H), tm(A, H)), one()), ((cm(H), tm(A, H)), -one())]),
            Err(Error::DegenerateState)
        ));
        assert!(matches!(make_state::<f64>(vec![]), Err(Error::EmptyState)));
        assert!(matches!(
            make_state(vec![((cm(H), tm(A, H)), Complex::new(f64::NAN, 0.0))]),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn side_labels_enforced() {
        let err = make_state(vec![((tm(A, H), tm(A, H)), one())]).unwrap_err();
        assert!(matches!(
            err,
            Error::WrongSide {
                side: "corroborative",
                ..
            }
        ));
        let err = make_state(vec![((cm(H), cm(H)), one())]).unwrap_err();
        assert!(matches!(err, Error::WrongSide { side: "test", .. }));
    }

    #[test]
    fn fidelity_basics() {
        let psi = TwoPhotonState::<f64>::phi_plus();
        assert_abs_diff_eq!(psi.fidelity(&psi), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(psi.fidelity(&psi.with_global_phase(0.731)), 1.0, epsilon = 1e-12);
        assert_eq!(hh().fidelity(&vv()), 0.0);
    }

    #[test]
    fn marginals_of_bell_state() {
        let psi = TwoPhotonState::<f64>::phi_plus();
        assert_abs_diff_eq!(psi.marginal_probability(|c, _| c.pol == H), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.marginal_probability(|_, _| true), 1.0, epsilon = 1e-15);
        assert_eq!(psi.marginal_probability(|_, t| t.path == B), 0.0);
    }

    #[test]
    fn mixture_probabilities() {
        let m = mix(vec![(0.5, hh()), (0.5, vv())]).unwrap();
        assert_abs_diff_eq!(m.ensemble_probability(|c, _| c.pol == H), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.ensemble_probability(|_, t| t.pol == V), 0.5, epsilon = 1e-15);
        assert_eq!(m, MixedState::dephased_phi_plus());

        let single = mix(vec![(1.0, TwoPhotonState::phi_plus())]).unwrap();
        let pure = TwoPhotonState::<f64>::phi_plus();
        assert_eq!(
            single.ensemble_probability(|c, t| c.pol == H && t.pol == H),
            pure.marginal_probability(|c, t| c.pol == H && t.pol == H)
        );
    }

    #[test]
    fn mixture_weight_validation() {
        assert!(matches!(
            mix(vec![(-0.5, hh()), (1.5, vv())]),
            Err(Error::NegativeWeight(_))
        ));
        assert!(matches!(mix(vec![(0.5, hh()), (0.4, vv())]), Err(Error::WeightSum(_))));
        assert!(matches!(mix::<f64>(vec![]), Err(Error::EmptyMixture)));
    }

    #[test]
    fn diagonal_product_matches_bell_expansion() {
        // (|DD⟩ + |AA⟩)/√2 is the same vector as Φ+.
        let mut entries = Vec::new();
        for ps in [PolarizationState::D, PolarizationState::A] {
            for (pc, ac) in ps.components::<f64>() {
                for (pt, at) in ps.components::<f64>() {
                    entries.push(((cm(pc), tm(A, pt)), ac * at));
                }
            }
        }
        let da = make_state(entries).unwrap();
        assert_abs_diff_eq!(da.fidelity(&TwoPhotonState::phi_plus()), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dump_round_trip() {
        let s = make_state(vec![
            ((cm(H), tm(PathLabel::APrime, H)), Complex::new(0.3, -0.1)),
            ((cm(V), tm(B, V)), Complex::new(0.0, 0.7)),
        ])
        .unwrap();
        let json = s.to_dump_json();
        assert!(json.get("c.V|b.V").is_some());
        assert!(json.get("c.H|a'.H").is_some());
        let back = TwoPhotonState::<f64>::from_dump_json(&json).unwrap();
        assert_abs_diff_eq!(back.fidelity(&s), 1.0, epsilon = 1e-12);
        assert!(TwoPhotonState::<f64>::from_dump_json(&serde_json::json!({"c.H": [1, 0]})).is_err());
    }

    #[test]
    fn single_precision_state() {
        let s = TwoPhotonState::<f32>::phi_plus();
        assert!((s.norm_sqr() - 1.0).abs() < f32::NORM_TOL);
    }
}
