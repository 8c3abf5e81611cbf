//! Single-photon optical elements and their action on two-photon states.
//!
//! An element is a unitary between an ordered list of input modes and an
//! ordered list of output modes of one photon. Output labels may differ from
//! the input labels (a polarizing beam-splitter sends one input path to two
//! output paths), so the matrix doubles as the relabeling map.
//!
//! Conventions: beam-splitters put a factor `i` on reflection, polarizing
//! beam-splitters add no phase, and angles are given in degrees.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{deg_to_rad, is_finite, Real};
use crate::state::{Mode, PathLabel, Polarization, TwoPhotonState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Corroborative,
    Test,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Corroborative => "corroborative",
            Side::Test => "test",
        })
    }
}

/// Phase convention of a 50/50 beam-splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BsConvention {
    /// `[[1, i], [i, 1]]/√2`
    #[default]
    Symmetric,
    /// `[[1, 1], [1, −1]]/√2`. Unitary but does not reproduce the QBS
    /// amplitudes; kept for self-check tests.
    Hadamard,
}

/// Result of a unitarity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitaryCheck<T> {
    pub max_deviation: T,
    pub passed: bool,
}

/// `‖U†U − I‖_max` of a square row-major matrix of dimension `dim`.
pub fn check_unitary_matrix<T: Real>(dim: usize, matrix: &[Complex<T>]) -> Result<UnitaryCheck<T>> {
    if matrix.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            got: matrix.len(),
        });
    }
    let mut worst = T::zero();
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = Complex::<T>::zero();
            for k in 0..dim {
                acc += matrix[k * dim + i].conj() * matrix[k * dim + j];
            }
            if i == j {
                acc -= Complex::one();
            }
            let dev = acc.norm();
            if !(dev <= worst) {
                worst = dev;
            }
        }
    }
    Ok(UnitaryCheck {
        max_deviation: worst,
        passed: worst <= T::UNITARY_TOL,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpticalElement<T> {
    name: String,
    side: Side,
    inputs: Vec<Mode>,
    outputs: Vec<Mode>,
    /// Row-major `outputs × inputs`.
    matrix: Vec<Complex<T>>,
}

impl<T: Real> OpticalElement<T> {
    /// Validated constructor. Column `j` is the image of `inputs[j]`.
    pub fn from_matrix(
        name: impl Into<String>,
        inputs: Vec<Mode>,
        outputs: Vec<Mode>,
        matrix: Vec<Complex<T>>,
    ) -> Result<Self> {
        let name = name.into();
        let n = inputs.len();
        if outputs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: outputs.len(),
            });
        }
        distinct(&inputs)?;
        distinct(&outputs)?;
        let side = side_of(&name, inputs.iter().chain(outputs.iter()))?;
        if matrix.iter().any(|z| !is_finite(z)) {
            return Err(Error::NonFinite);
        }
        let check = check_unitary_matrix(n, &matrix)?;
        if !check.passed {
            return Err(Error::NotUnitary {
                name,
                deviation: check.max_deviation.to_f64_lossy(),
            });
        }
        Ok(Self {
            name,
            side,
            inputs,
            outputs,
            matrix,
        })
    }

    pub fn identity(modes: Vec<Mode>) -> Result<Self> {
        let n = modes.len();
        Self::from_matrix("identity", modes.clone(), modes, diag(n))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn inputs(&self) -> &[Mode] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Mode] {
        &self.outputs
    }

    pub fn dim(&self) -> usize {
        self.inputs.len()
    }

    /// `⟨out|U|in⟩`, zero for undeclared modes.
    pub fn element(&self, output: Mode, input: Mode) -> Complex<T> {
        match (self.out_index(output), self.in_index(input)) {
            (Some(i), Some(j)) => self.matrix[i * self.dim() + j],
            _ => Complex::zero(),
        }
    }

    pub fn check_unitary(&self) -> UnitaryCheck<T> {
        check_unitary_matrix(self.dim(), &self.matrix).expect("square by construction")
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Adjoint element, mapping the outputs back onto the inputs.
    pub fn inverse(&self) -> Self {
        let n = self.dim();
        let mut m = vec![Complex::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                m[j * n + i] = self.matrix[i * n + j].conj();
            }
        }
        Self {
            name: format!("{}⁻¹", self.name),
            side: self.side,
            inputs: self.outputs.clone(),
            outputs: self.inputs.clone(),
            matrix: m,
        }
    }

    /// Block-diagonal combination of two elements on disjoint modes.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        let inputs: Vec<Mode> = self.inputs.iter().chain(&other.inputs).copied().collect();
        let outputs: Vec<Mode> = self.outputs.iter().chain(&other.outputs).copied().collect();
        let (n1, n2) = (self.dim(), other.dim());
        let n = n1 + n2;
        let mut m = vec![Complex::zero(); n * n];
        for i in 0..n1 {
            for j in 0..n1 {
                m[i * n + j] = self.matrix[i * n1 + j];
            }
        }
        for i in 0..n2 {
            for j in 0..n2 {
                m[(n1 + i) * n + n1 + j] = other.matrix[i * n2 + j];
            }
        }
        Self::from_matrix(format!("{} ⊕ {}", self.name, other.name), inputs, outputs, m)
    }

    /// `self` followed by `next`; `next` must consume exactly `self`'s outputs.
    pub fn then(&self, next: &Self) -> Result<Self> {
        let mine: BTreeSet<_> = self.outputs.iter().collect();
        let theirs: BTreeSet<_> = next.inputs.iter().collect();
        if mine != theirs {
            return Err(Error::ModeMismatch(format!(
                "`{}` outputs do not match `{}` inputs",
                self.name, next.name
            )));
        }
        let n = self.dim();
        let mut m = vec![Complex::zero(); n * n];
        for (k, mode) in next.inputs.iter().enumerate() {
            let mid = self.out_index(*mode).expect("sets equal");
            for i in 0..n {
                let a = next.matrix[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    m[i * n + j] += a * self.matrix[mid * n + j];
                }
            }
        }
        Self::from_matrix(
            format!("{} ∘ {}", next.name, self.name),
            self.inputs.clone(),
            next.outputs.clone(),
            m,
        )
    }

    /// Adds identity action on `modes`, which must not clash with the
    /// element's own ports.
    pub fn extend_identity(&self, modes: &[Mode]) -> Result<Self> {
        if modes.is_empty() {
            return Ok(self.clone());
        }
        let id = Self::identity(modes.to_vec())?;
        Ok(self.direct_sum(&id)?.renamed(self.name.clone()))
    }

    /// Transforms the amplitudes of the acting photon.
    pub fn apply(&self, state: &TwoPhotonState<T>) -> Result<TwoPhotonState<T>> {
        let n = self.dim();
        let mut out: BTreeMap<(Mode, Mode), Complex<T>> = BTreeMap::new();
        for (&(c, t), &amp) in state.iter() {
            let acting = match self.side {
                Side::Corroborative => c,
                Side::Test => t,
            };
            let j = self.in_index(acting).ok_or_else(|| Error::UndeclaredMode {
                element: self.name.clone(),
                mode: acting,
            })?;
            for i in 0..n {
                let u = self.matrix[i * n + j];
                if u.is_zero() {
                    continue;
                }
                let key = match self.side {
                    Side::Corroborative => (self.outputs[i], t),
                    Side::Test => (c, self.outputs[i]),
                };
                *out.entry(key).or_insert_with(Complex::zero) += u * amp;
            }
        }
        out.retain(|_, a| !a.is_zero());
        if out.values().any(|a| !is_finite(a)) {
            return Err(Error::NonFinite);
        }
        Ok(TwoPhotonState::from_evolved(out))
    }

    fn in_index(&self, m: Mode) -> Option<usize> {
        self.inputs.iter().position(|x| *x == m)
    }

    fn out_index(&self, m: Mode) -> Option<usize> {
        self.outputs.iter().position(|x| *x == m)
    }
}

/// Free-function form of [`OpticalElement::apply`].
pub fn apply<T: Real>(element: &OpticalElement<T>, state: &TwoPhotonState<T>) -> Result<TwoPhotonState<T>> {
    element.apply(state)
}

pub fn check_unitary<T: Real>(element: &OpticalElement<T>) -> UnitaryCheck<T> {
    element.check_unitary()
}

fn diag<T: Real>(n: usize) -> Vec<Complex<T>> {
    let mut m = vec![Complex::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = Complex::one();
    }
    m
}

fn distinct(modes: &[Mode]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for m in modes {
        if !seen.insert(*m) {
            return Err(Error::RepeatedMode(*m));
        }
    }
    Ok(())
}

fn side_of<'a>(name: &str, mut modes: impl Iterator<Item = &'a Mode>) -> Result<Side> {
    let first = match modes.next() {
        Some(m) => m.path.is_corroborative(),
        None => return Ok(Side::Test),
    };
    if modes.any(|m| m.path.is_corroborative() != first) {
        return Err(Error::MixedSides(name.to_string()));
    }
    Ok(if first { Side::Corroborative } else { Side::Test })
}

fn distinct_paths(paths: &[PathLabel]) -> Result<()> {
    for (i, p) in paths.iter().enumerate() {
        if paths[..i].contains(p) {
            return Err(Error::RepeatedPath(*p));
        }
    }
    Ok(())
}

/// 2×2 block `[[t11, t12], [t21, t22]]` per polarization. Input `inᵢ` feeds
/// column `i`, output `outᵢ` row `i`.
fn two_path_element<T: Real>(
    name: &str,
    ins: [PathLabel; 2],
    outs: [PathLabel; 2],
    block: impl Fn(Polarization) -> [[Complex<T>; 2]; 2],
) -> Result<OpticalElement<T>> {
    let mut inputs = Vec::with_capacity(4);
    let mut outputs = Vec::with_capacity(4);
    for pol in Polarization::ALL {
        for k in 0..2 {
            inputs.push(Mode::new(ins[k], pol));
            outputs.push(Mode::new(outs[k], pol));
        }
    }
    let mut m = vec![Complex::zero(); 16];
    for (p, pol) in Polarization::ALL.into_iter().enumerate() {
        let b = block(pol);
        for i in 0..2 {
            for j in 0..2 {
                m[(2 * p + i) * 4 + 2 * p + j] = b[i][j];
            }
        }
    }
    OpticalElement::from_matrix(name, inputs, outputs, m)
}

fn bs_block<T: Real>(convention: BsConvention) -> [[Complex<T>; 2]; 2] {
    let r = T::FRAC_1_SQRT_2();
    let re = |x: T| Complex::new(x, T::zero());
    match convention {
        BsConvention::Symmetric => [[re(r), Complex::new(T::zero(), r)], [Complex::new(T::zero(), r), re(r)]],
        BsConvention::Hadamard => [[re(r), re(r)], [re(r), re(-r)]],
    }
}

/// Polarization-independent 50/50 beam-splitter: `in1 → (out1 + i·out2)/√2`,
/// `in2 → (i·out1 + out2)/√2`.
pub fn beam_splitter_50_50<T: Real>(
    in1: PathLabel,
    in2: PathLabel,
    out1: PathLabel,
    out2: PathLabel,
) -> Result<OpticalElement<T>> {
    beam_splitter_with_convention(in1, in2, out1, out2, BsConvention::Symmetric)
}

pub fn beam_splitter_with_convention<T: Real>(
    in1: PathLabel,
    in2: PathLabel,
    out1: PathLabel,
    out2: PathLabel,
    convention: BsConvention,
) -> Result<OpticalElement<T>> {
    distinct_paths(&[in1, in2])?;
    distinct_paths(&[out1, out2])?;
    let block = bs_block::<T>(convention);
    two_path_element("BS", [in1, in2], [out1, out2], |_| block)
}

/// Multiplies both polarizations on `path` by `e^{iθ}` (`theta` in radians).
pub fn phase_shifter<T: Real>(path: PathLabel, theta: T) -> Result<OpticalElement<T>> {
    let p = Complex::from_polar(T::one(), theta);
    let modes = Mode::both(path).to_vec();
    let z = Complex::zero();
    OpticalElement::from_matrix("phase", modes.clone(), modes, vec![p, z, z, p])
}

/// Polarization-dependent beam-splitter: H passes straight through
/// (`in_a → out_a`, `in_b → out_b`), V sees the symmetric 50/50 splitter.
pub fn pdbs<T: Real>(
    in_a: PathLabel,
    in_b: PathLabel,
    out_a: PathLabel,
    out_b: PathLabel,
) -> Result<OpticalElement<T>> {
    distinct_paths(&[in_a, in_b])?;
    distinct_paths(&[out_a, out_b])?;
    let bs = bs_block::<T>(BsConvention::Symmetric);
    let (o, z) = (Complex::one(), Complex::zero());
    two_path_element("PDBS", [in_a, in_b], [out_a, out_b], |pol| match pol {
        Polarization::H => [[o, z], [z, o]],
        Polarization::V => bs,
    })
}

/// Polarizing beam-splitter whose axes are rotated by `angle_deg` from H/V.
///
/// The component along `cos·H + sin·V` leaves on `path_t` (labelled H), the
/// component along `−sin·H + cos·V` on `path_r` (labelled V). Angles in
/// `[−90°, 90°]`; a −45° splitter is a +45° one with its ports swapped.
pub fn pbs_rotated<T: Real>(
    path_in: PathLabel,
    path_t: PathLabel,
    path_r: PathLabel,
    angle_deg: T,
) -> Result<OpticalElement<T>> {
    distinct_paths(&[path_t, path_r])?;
    if !(angle_deg.abs() <= T::lit(90.0)) {
        return Err(Error::AngleOutOfRange(angle_deg.to_f64_lossy()));
    }
    let a = deg_to_rad(angle_deg);
    let (s, c) = (Complex::new(a.sin(), T::zero()), Complex::new(a.cos(), T::zero()));
    OpticalElement::from_matrix(
        "PBS",
        Mode::both(path_in).to_vec(),
        vec![Mode::new(path_t, Polarization::H), Mode::new(path_r, Polarization::V)],
        vec![c, s, -s, c],
    )
}

/// Real polarization rotation by `alpha_deg`: `H → cos·H + sin·V`,
/// `V → −sin·H + cos·V`.
pub fn polarization_rotator<T: Real>(path: PathLabel, alpha_deg: T) -> Result<OpticalElement<T>> {
    let a = deg_to_rad(alpha_deg);
    let (s, c) = (Complex::new(a.sin(), T::zero()), Complex::new(a.cos(), T::zero()));
    let modes = Mode::both(path).to_vec();
    OpticalElement::from_matrix("rotator", modes.clone(), modes, vec![c, -s, s, c])
}

/// Ordered stages acting on one photon. Each pushed element is padded with
/// identity on the modes it leaves alone, so consecutive stages always chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit<T> {
    side: Side,
    input_modes: Vec<Mode>,
    modes: Vec<Mode>,
    stages: Vec<OpticalElement<T>>,
}

impl<T: Real> Circuit<T> {
    /// Starts a circuit over `modes`, which must include any vacuum ports
    /// later elements read from.
    pub fn new(side: Side, modes: Vec<Mode>) -> Result<Self> {
        distinct(&modes)?;
        if modes
            .iter()
            .any(|m| m.path.is_corroborative() != (side == Side::Corroborative))
        {
            return Err(Error::MixedSides(format!("{side} circuit")));
        }
        Ok(Self {
            side,
            input_modes: modes.clone(),
            modes,
            stages: Vec::new(),
        })
    }

    pub fn push(&mut self, element: OpticalElement<T>) -> Result<&mut Self> {
        if element.side() != self.side {
            return Err(Error::ModeMismatch(format!(
                "`{}` acts on the {} photon, circuit on the {}",
                element.name(),
                element.side(),
                self.side
            )));
        }
        for m in element.inputs() {
            if !self.modes.contains(m) {
                return Err(Error::ModeMismatch(format!(
                    "`{}` reads {m}, which is not present",
                    element.name()
                )));
            }
        }
        let untouched: Vec<Mode> = self
            .modes
            .iter()
            .filter(|m| !element.inputs().contains(m))
            .copied()
            .collect();
        if let Some(clash) = untouched.iter().find(|m| element.outputs().contains(m)) {
            return Err(Error::ModeMismatch(format!(
                "`{}` writes {clash}, which is still occupied",
                element.name()
            )));
        }
        let staged = element.extend_identity(&untouched)?;
        self.modes = staged.outputs().to_vec();
        self.stages.push(staged);
        Ok(self)
    }

    pub fn with(mut self, element: OpticalElement<T>) -> Result<Self> {
        self.push(element)?;
        Ok(self)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn stages(&self) -> &[OpticalElement<T>] {
        &self.stages
    }

    pub fn input_modes(&self) -> &[Mode] {
        &self.input_modes
    }

    pub fn output_modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn apply(&self, state: &TwoPhotonState<T>) -> Result<TwoPhotonState<T>> {
        let mut s = state.clone();
        for stage in &self.stages {
            s = stage.apply(&s)?;
        }
        Ok(s)
    }

    /// End-to-end element from the input modes to the output modes.
    pub fn compose(&self) -> Result<OpticalElement<T>> {
        let mut acc = OpticalElement::identity(self.input_modes.clone())?;
        for stage in &self.stages {
            acc = acc.then(stage)?;
        }
        Ok(acc.renamed("circuit"))
    }

    /// Concatenates `next` after `self`.
    pub fn then(&self, next: &Circuit<T>) -> Result<Self> {
        let mut out = self.clone();
        for stage in &next.stages {
            out.push(stage.clone())?;
        }
        Ok(out)
    }
}
