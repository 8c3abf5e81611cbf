//! Randomized checks of the algebraic invariants across modules.

use crate::experiment::{joint_probability, ExperimentSettings};
use crate::optics::{
    beam_splitter_50_50, pbs_rotated, pdbs, phase_shifter, polarization_rotator, Circuit, OpticalElement, Side,
};
use crate::state::{cm, make_state, mix, tm, TwoPhotonState};
use crate::{AnalysisBasis, CoincidenceCategory, InputKind, Mode, PathLabel, Polarization};
use num_complex::Complex64 as C;
use proptest::prelude::*;

use PathLabel::{APrime, A, B};
use Polarization::{H, V};

fn test_modes() -> Vec<Mode> {
    vec![tm(A, H), tm(A, V), tm(B, H), tm(B, V)]
}

fn all_keys() -> Vec<(Mode, Mode)> {
    let mut keys = Vec::new();
    for c in [cm(H), cm(V)] {
        for t in test_modes() {
            keys.push((c, t));
        }
    }
    keys
}

fn arb_state() -> impl Strategy<Value = TwoPhotonState<f64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8).prop_filter_map("degenerate", |amps| {
        let entries = all_keys()
            .into_iter()
            .zip(amps)
            .map(|(k, (re, im))| (k, C::new(re, im)))
            .collect();
        make_state(entries).ok()
    })
}

/// Elements acting on the four `a`/`b` test modes and returning to them.
fn arb_element() -> impl Strategy<Value = OpticalElement<f64>> {
    let path = prop_oneof![Just(A), Just(B)];
    prop_oneof![
        Just(beam_splitter_50_50(A, B, A, B).unwrap()),
        Just(beam_splitter_50_50(B, A, A, B).unwrap()),
        Just(pdbs(A, B, A, B).unwrap()),
        (path.clone(), -10.0f64..10.0).prop_map(|(p, th)| phase_shifter(p, th).unwrap()),
        (path, -180.0f64..180.0).prop_map(|(p, al)| polarization_rotator(p, al).unwrap()),
    ]
    .prop_map(|e| {
        let rest: Vec<Mode> = test_modes().into_iter().filter(|m| !e.inputs().contains(m)).collect();
        e.extend_identity(&rest).unwrap()
    })
}

fn max_matrix_diff(x: &OpticalElement<f64>, y: &OpticalElement<f64>) -> f64 {
    let mut worst = 0.0f64;
    for o in test_modes() {
        for i in test_modes() {
            worst = worst.max((x.element(o, i) - y.element(o, i)).norm());
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn apply_preserves_norm(s in arb_state(), e in arb_element()) {
        let out = e.apply(&s).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn every_element_is_unitary(e in arb_element(), angle in -90.0f64..90.0) {
        prop_assert!(e.check_unitary().max_deviation < 1e-12);
        let pbs = pbs_rotated::<f64>(A, A, APrime, angle).unwrap();
        prop_assert!(pbs.check_unitary().max_deviation < 1e-12);
    }

    #[test]
    fn composition_is_associative(e1 in arb_element(), e2 in arb_element(), e3 in arb_element(), s in arb_state()) {
        let left = e1.then(&e2).unwrap().then(&e3).unwrap();
        let right = e1.then(&e2.then(&e3).unwrap()).unwrap();
        prop_assert!(max_matrix_diff(&left, &right) < 1e-12);
        let circuit = Circuit::new(Side::Test, test_modes()).unwrap()
            .with(e1.clone()).unwrap()
            .with(e2.clone()).unwrap()
            .with(e3.clone()).unwrap();
        let stepwise = circuit.apply(&s).unwrap();
        let composed = left.apply(&s).unwrap();
        prop_assert!(1.0 - stepwise.fidelity(&composed) < 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric_and_phase_blind(a in arb_state(), b in arb_state(), phi in -10.0f64..10.0) {
        let f = a.fidelity(&b);
        prop_assert!((f - b.fidelity(&a)).abs() < 1e-14);
        prop_assert!((a.with_global_phase(phi).fidelity(&b) - f).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        prop_assert!((a.fidelity(&a.with_global_phase(phi)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginals_over_a_partition_sum_to_one(s in arb_state(), mask in 0u8..=255) {
        let keys = all_keys();
        let in_set = |c: &Mode, t: &Mode| {
            let k = keys.iter().position(|x| x == &(*c, *t)).unwrap();
            mask & (1 << k) != 0
        };
        let p = s.marginal_probability(in_set);
        let q = s.marginal_probability(|c, t| !in_set(c, t));
        prop_assert!((p + q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ensemble_probability_is_affine(a in arb_state(), b in arb_state(), w in 0.0f64..=1.0) {
        let pred = |c: &Mode, t: &Mode| c.pol == H && t.path == A;
        let m = mix(vec![(w, a.clone()), (1.0 - w, b.clone())]).unwrap();
        let expected = w * a.marginal_probability(pred) + (1.0 - w) * b.marginal_probability(pred);
        prop_assert!((m.ensemble_probability(pred) - expected).abs() < 1e-12);
    }

    #[test]
    fn categories_partition_everywhere(theta in 0.0f64..std::f64::consts::TAU, alpha in -90.0f64..90.0, da in any::<bool>(), mixed in any::<bool>()) {
        let s = ExperimentSettings::new(theta, alpha)
            .basis(if da { AnalysisBasis::DA } else { AnalysisBasis::HV })
            .input(if mixed { InputKind::Mixture } else { InputKind::Entangled });
        let total: f64 = CoincidenceCategory::ALL.iter().map(|c| joint_probability::<f64>(&s, *c).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
