//! Property tests for the affect-space algebra, checked against a direct
//! evaluator written in the neutral-plus-offsets form.

use hybrid_face::face::DEFAULT_BASIS_TOML;
use hybrid_face::{
    blend_affect3d, blend_affect3d_raw, blend_categorical, blend_categorical_raw, clamp, load_basis, AffectPoint,
    BasisSet, CategoricalWeights, Dof, Emotion, FaceState, DOF_COUNT,
};
use proptest::prelude::*;

/// `neutral + Σ wᵢ·(bᵢ − neutral)`, term by term.
fn direct_categorical(basis: &BasisSet, w: &[f64; 8]) -> [f64; DOF_COUNT] {
    let n = basis.neutral().to_array();
    let mut out = [0.0; DOF_COUNT];
    for k in 0..DOF_COUNT {
        let mut acc = 0.0;
        for (i, e) in Emotion::BASIS.iter().enumerate() {
            acc += (basis.get(*e).to_array()[k] - n[k]) * w[i];
        }
        out[k] = acc + n[k];
    }
    out
}

fn direct_affect(basis: &BasisSet, a: f64, b: f64, g: f64) -> [f64; DOF_COUNT] {
    let n = basis.neutral().to_array();
    let d = |e: Emotion, k: usize| basis.get(e).to_array()[k] - n[k];
    let mut out = [0.0; DOF_COUNT];
    for k in 0..DOF_COUNT {
        out[k] = a.max(0.0) * d(Emotion::Happy, k)
            + (-a).max(0.0) * d(Emotion::Sad, k)
            + b.max(0.0) * d(Emotion::Surprise, k)
            + (-b).max(0.0) * d(Emotion::Tired, k)
            + g.max(0.0) * d(Emotion::Angry, k)
            + (-g).max(0.0) * d(Emotion::Afraid, k)
            + n[k];
    }
    out
}

fn state_strategy() -> impl Strategy<Value = FaceState> {
    let comps: Vec<_> = Dof::ALL
        .iter()
        .map(|d| {
            let (lo, hi) = d.range();
            lo..=hi
        })
        .collect();
    comps.prop_map(|v| {
        let arr: [f64; DOF_COUNT] = v.try_into().unwrap();
        FaceState::from_array(arr).unwrap()
    })
}

fn basis_strategy() -> impl Strategy<Value = BasisSet> {
    (state_strategy(), prop::collection::vec(state_strategy(), 8))
        .prop_map(|(n, states)| BasisSet::new(n, Emotion::BASIS.into_iter().zip(states)).unwrap())
}

fn weights_strategy() -> impl Strategy<Value = [f64; 8]> {
    prop::array::uniform8(0.0..=1.0f64)
}

fn coord() -> impl Strategy<Value = f64> {
    prop_oneof![Just(-1.0), Just(0.0), Just(1.0), -1.0..=1.0f64]
}

fn close(a: &[f64; DOF_COUNT], b: &[f64; DOF_COUNT], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn categorical_matches_direct(basis in basis_strategy(), w in weights_strategy()) {
        let got = blend_categorical_raw(&basis, &CategoricalWeights::from_array(w).unwrap());
        prop_assert!(close(&got, &direct_categorical(&basis, &w), 1e-12));
    }

    #[test]
    fn affect_matches_direct(basis in basis_strategy(), a in coord(), b in coord(), g in coord()) {
        let got = blend_affect3d_raw(&basis, &AffectPoint::new(a, b, g).unwrap());
        prop_assert!(close(&got, &direct_affect(&basis, a, b, g), 1e-12));
    }

    #[test]
    fn corner_identity(basis in basis_strategy()) {
        for axis_end in 0..6 {
            let mut c = [0.0; 3];
            c[axis_end / 2] = if axis_end % 2 == 0 { 1.0 } else { -1.0 };
            let p = AffectPoint::new(c[0], c[1], c[2]).unwrap();
            let e = p.activations()[axis_end].0;
            prop_assert_eq!(blend_affect3d(&basis, &p).unwrap(), *basis.get(e));
        }
        for e in Emotion::BASIS {
            let w = CategoricalWeights::single(e).unwrap();
            prop_assert_eq!(blend_categorical(&basis, &w), *basis.get(e));
        }
    }

    #[test]
    fn neutral_fixed_point(basis in basis_strategy()) {
        prop_assert_eq!(blend_categorical(&basis, &CategoricalWeights::zero()), *basis.neutral());
        prop_assert_eq!(blend_affect3d(&basis, &AffectPoint::ORIGIN).unwrap(), *basis.neutral());
    }

    #[test]
    fn categorical_additivity(basis in basis_strategy(), w in weights_strategy(), split in weights_strategy()) {
        // w = w1 + w2 with both parts in [0, 1].
        let w1: [f64; 8] = std::array::from_fn(|i| w[i] * split[i]);
        let w2: [f64; 8] = std::array::from_fn(|i| w[i] - w1[i]);
        let sum: [f64; 8] = std::array::from_fn(|i| w1[i] + w2[i]);
        let f = |x: [f64; 8]| blend_categorical_raw(&basis, &CategoricalWeights::from_array(x).unwrap());
        let (a, b, c) = (f(w1), f(w2), f(sum));
        let n = basis.neutral().to_array();
        let lhs: [f64; DOF_COUNT] = std::array::from_fn(|k| a[k] + b[k] - n[k]);
        prop_assert!(close(&lhs, &c, 1e-12));
    }

    #[test]
    fn opposite_suppression(basis in basis_strategy(), other in state_strategy(), a in 0.0..=1.0f64, b in coord(), g in coord(), axis in 0usize..6) {
        // A positive coordinate on an axis makes the negative pole irrelevant
        // and vice versa.
        let mut c = [a, b, g];
        // (suppressed pole, sign of the active coordinate)
        let (neg, sign) = match axis {
            0 => (Emotion::Sad, 1.0),
            1 => (Emotion::Happy, -1.0),
            2 => (Emotion::Tired, 1.0),
            3 => (Emotion::Surprise, -1.0),
            4 => (Emotion::Afraid, 1.0),
            _ => (Emotion::Angry, -1.0),
        };
        c[axis / 2] = sign * a.max(1e-9);
        let p = AffectPoint::new(c[0], c[1], c[2]).unwrap();
        let perturbed = basis.with(neg, other).unwrap();
        prop_assert_eq!(blend_affect3d_raw(&basis, &p), blend_affect3d_raw(&perturbed, &p));
    }

    #[test]
    fn clamp_idempotent(raw in prop::array::uniform13(-3.0..3.0f64)) {
        let once = clamp(raw).unwrap();
        prop_assert_eq!(clamp(once.to_array()).unwrap(), once);
        for d in Dof::ALL {
            let (lo, hi) = d.range();
            let v = raw[d.index()];
            if (lo..=hi).contains(&v) {
                prop_assert_eq!(once.get(d), v);
            }
        }
    }
}

#[test]
fn stern_and_disgust_unreachable_in_affect_space() {
    // Perturbing stern/disgust never changes an affect-space blend.
    let basis = BasisSet::default_set();
    let weird = *basis.get(Emotion::Happy);
    let alt = basis
        .with(Emotion::Stern, weird)
        .unwrap()
        .with(Emotion::Disgust, weird)
        .unwrap();
    for p in [(0.3, -0.2, 0.9), (-1.0, 1.0, -1.0), (0.0, 0.0, 0.0)] {
        let p = AffectPoint::new(p.0, p.1, p.2).unwrap();
        assert_eq!(blend_affect3d(&basis, &p).unwrap(), blend_affect3d(&alt, &p).unwrap());
    }
}

#[test]
fn shipped_basis_loads_in_strict_mode() {
    let b = load_basis(DEFAULT_BASIS_TOML, false).unwrap();
    assert_eq!(b, BasisSet::default_set());
}
