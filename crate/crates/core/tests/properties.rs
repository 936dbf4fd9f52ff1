use std::sync::Arc;

use assb_core::analytic::{asymptotic_entropy, entanglement_spectrum, exact_entropy, stirling_sandwich};
use assb_core::channel::{build_superoperator, unvectorize, vectorize, Block, DoubledBasis};
use assb_core::hilbert::{dicke_state, swap_bits, total_sz, PureState, SectorBasis};
use assb_core::ops::{
    ancilla_cswap_branches, apply_pauli_projector, apply_sigma_z, apply_swap_projector, swap_branches, Axis, Sign,
};
use assb_core::scaling::{collapse_cost, collapse_fit, CollapsePoint};
use assb_core::trajectory::{random_state, run_trajectory, ModelParams, Observable, ObservableSpec};
use assb_core::Complex64;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params_strategy(max_sites: usize) -> impl Strategy<Value = ModelParams> {
    (2..=max_sites, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(l, a, b, c, d)| {
        let t = a + b + c + d + 1e-9;
        let (s, x, y) = (a / t, b / t, c / t);
        ModelParams::new(l, s, x, y, (1.0 - s - x - y).max(0.0)).unwrap()
    })
}

fn state_strategy(sites: usize) -> impl Strategy<Value = PureState> {
    any::<u64>().prop_map(move |seed| random_state(sites, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sector_index_round_trip(l in 1usize..=14, frac in 0.0..=1.0f64) {
        let n = (frac * l as f64).round() as usize;
        let s = SectorBasis::new(l, n).unwrap();
        for (k, &b) in s.states().iter().enumerate() {
            prop_assert_eq!(s.index_of(b), Some(k));
        }
    }

    #[test]
    fn dicke_invariants(l in 2usize..=8, frac in 0.0..=1.0f64) {
        let n = (frac * l as f64).round() as usize;
        let d = dicke_state(l, n).unwrap();
        prop_assert_eq!(total_sz(&d), n as f64 - l as f64 / 2.0);
        for i in 0..l {
            for j in i + 1..l {
                let amps = d.amplitudes();
                for (b, a) in amps.iter().enumerate() {
                    let s = swap_bits(b as u64, i, j) as usize;
                    prop_assert!((amps[s] - a).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn projector_completeness_and_idempotence(psi in state_strategy(4), bond in 0usize..3, site in 0usize..4) {
        let (plus, pp) = apply_swap_projector(&psi, bond, Sign::Plus).unwrap();
        let (_, pm) = apply_swap_projector(&psi, bond, Sign::Minus).unwrap();
        prop_assert!((pp + pm - 1.0).abs() < 1e-12);
        let (twice, p2) = apply_swap_projector(&plus, bond, Sign::Plus).unwrap();
        prop_assert!((p2 - pp).abs() < 1e-12);
        prop_assert!(twice.amplitudes().iter().zip(plus.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-12));
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let (proj, a) = apply_pauli_projector(&psi, site, axis, Sign::Plus).unwrap();
            let (_, b) = apply_pauli_projector(&psi, site, axis, Sign::Minus).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
            let (again, a2) = apply_pauli_projector(&proj, site, axis, Sign::Plus).unwrap();
            prop_assert!((a2 - a).abs() < 1e-12);
            prop_assert!(again.amplitudes().iter().zip(proj.amplitudes()).all(|(x, y)| (x - y).norm() < 1e-12));
        }
        let z = apply_sigma_z(&psi, site).unwrap();
        prop_assert_eq!(z.norm_sqr(), psi.norm_sqr());
    }

    #[test]
    fn ancilla_matches_direct(l in 2usize..=6, seed in any::<u64>()) {
        let psi = random_state(l, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for bond in 0..l - 1 {
            let d = swap_branches(&psi, bond).unwrap();
            let a = ancilla_cswap_branches(&psi, bond).unwrap();
            for (x, y) in d.iter().zip(&a) {
                prop_assert!((x.probability - y.probability).abs() < 1e-12);
                if let (Some(u), Some(v)) = (&x.state, &y.state) {
                    prop_assert!(u.fidelity(v).unwrap() > 1.0 - 1e-12);
                }
            }
        }
    }

    #[test]
    fn trajectories_conserve_norm_and_charge(params in params_strategy(5), seed in any::<u64>(), bits in any::<u64>()) {
        let l = params.sites;
        let charge = params.conserves_charge();
        let start = PureState::product(l, bits & ((1 << l) - 1)).unwrap();
        let obs = [ObservableSpec::every_step(Observable::TotalSz)];
        let a = run_trajectory(&params, &start, 5, &obs, seed).unwrap();
        let b = run_trajectory(&params, &start, 5, &obs, seed).unwrap();
        prop_assert_eq!(&a, &b);
        if charge {
            let q = total_sz(&start);
            prop_assert!(a.values("total_sz").all(|(_, v)| (v - q).abs() < 1e-12));
        }
    }

    #[test]
    fn charge_conserving_trajectories(l in 2usize..=6, p_z in 0.0..=1.0f64, seed in any::<u64>(), bits in any::<u64>()) {
        let params = ModelParams::with_z(l, p_z).unwrap();
        let start = PureState::product(l, bits & ((1 << l) - 1)).unwrap();
        let q = total_sz(&start);
        let obs = [ObservableSpec::every_step(Observable::TotalSz)];
        let r = run_trajectory(&params, &start, 8, &obs, seed).unwrap();
        prop_assert!(r.values("total_sz").all(|(_, v)| (v - q).abs() < 1e-12));
    }

    #[test]
    fn superoperator_preserves_trace_and_hermiticity(params in params_strategy(4), seed in any::<u64>()) {
        let s = build_superoperator(&params, Block::Full).unwrap();
        prop_assert!(s.trace_defect() < 1e-10);
        let psi = random_state(params.sites, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let phi = random_state(params.sites, &mut ChaCha8Rng::seed_from_u64(seed ^ 1)).unwrap();
        // ρ = |ψ⟩⟨ψ| - 2|φ⟩⟨φ| is Hermitian but not positive.
        let basis = s.basis().clone();
        let a = assb_core::channel::DoubledVector::projector(basis.clone(), &psi).unwrap();
        let b = assb_core::channel::DoubledVector::projector(basis.clone(), &phi).unwrap();
        let mix: Vec<Complex64> = a.data().iter().zip(b.data()).map(|(x, y)| x - y * 2.0).collect();
        let rho = assb_core::channel::DoubledVector::new(basis, mix).unwrap();
        let out = s.apply(&rho).unwrap();
        prop_assert!(out.hermiticity_defect() < 1e-10);
        prop_assert!((out.trace() - rho.trace()).norm() < 1e-10);
    }

    #[test]
    fn vectorize_round_trip(l in 1usize..=3, seed in any::<u64>()) {
        let d = 1usize << l;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(d, d, |_, _| {
            let re: f64 = rand::Rng::random(&mut rng);
            let im: f64 = rand::Rng::random(&mut rng);
            Complex64::new(re, im)
        });
        let basis = Arc::new(DoubledBasis::new(l, Block::Full).unwrap());
        let v = vectorize(basis, &m).unwrap();
        prop_assert_eq!(unvectorize(&v), m);
    }

    #[test]
    fn spectrum_sums_to_one(l in 2usize..=200, nf in 0.0..=1.0f64, af in 0.0..=1.0f64) {
        let n = (nf * l as f64).round() as usize;
        let a = 1 + (af * (l - 2) as f64).round() as usize;
        let s = entanglement_spectrum(l, n, a).unwrap();
        prop_assert!((s.total() - 1.0).abs() < 1e-12);
        prop_assert!(s.weights.iter().all(|w| w.1 >= 0.0));
    }

    #[test]
    fn entropy_symmetries(l in 2usize..=300, nf in 0.0..=1.0f64, af in 0.0..=1.0f64) {
        let n = (nf * l as f64).round() as usize;
        let a = 1 + (af * (l - 2) as f64).round() as usize;
        let s = exact_entropy(l, n, a).unwrap();
        prop_assert!((s - exact_entropy(l, l - n, a).unwrap()).abs() < 1e-10);
        prop_assert!((s - exact_entropy(l, n, l - a).unwrap()).abs() < 1e-10);
        if n >= 1 && n < l {
            let x = entanglement_spectrum(l, n, a).unwrap();
            let y = entanglement_spectrum(l, a, n).unwrap();
            prop_assert_eq!(x.weights.len(), y.weights.len());
            for (p, q) in x.weights.iter().zip(&y.weights) {
                prop_assert_eq!(p.0, q.0);
                prop_assert!((p.1 - q.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sandwich_brackets_exact(l in 4usize..=100, nf in 0.0..=1.0f64, af in 0.0..=1.0f64, kf in 0.0..=1.0f64) {
        let n = 1 + (nf * (l - 2) as f64).round() as usize;
        let a = 1 + (af * (l - 2) as f64).round() as usize;
        let b = l - a;
        let lo = n.saturating_sub(b) + 1;
        let hi = n.min(a).saturating_sub(1);
        prop_assume!(lo <= hi);
        let k = lo + (kf * (hi - lo) as f64).round() as usize;
        prop_assume!(k >= 1 && k < a && k < n && n - k < b);
        let (lower, upper) = stirling_sandwich(l, n, a, k).unwrap();
        let p = entanglement_spectrum(l, n, a).unwrap().weights.iter().find(|w| w.0 == k).unwrap().1;
        prop_assert!(lower < p && p < upper, "{} {} {}", lower, p, upper);
    }

    #[test]
    fn asymptotic_symmetric_in_a(l in 2.0..1e5f64, a in 0.01..0.99f64, n in 0.01..0.99f64) {
        let x = asymptotic_entropy(l, a, n).unwrap();
        let y = asymptotic_entropy(l, 1.0 - a, n).unwrap();
        prop_assert!((x - y).abs() < 1e-12);
    }

    #[test]
    fn collapse_invariant_under_rescaling_p(c in 0.05..20.0f64, nu in 0.3..1.2f64) {
        let mut pts = Vec::new();
        for l in [4usize, 6, 8] {
            for p in [0.01, 0.03, 0.05, 0.1, 0.2, 0.3] {
                let x = (l as f64).powf(1.0 / 0.5) * p;
                pts.push(CollapsePoint::new(l, p, (-x).exp(), 0.0).unwrap());
            }
        }
        let scaled: Vec<_> = pts.iter().map(|p| CollapsePoint { p: p.p * c, ..*p }).collect();
        let a = collapse_cost(&pts, nu).unwrap();
        let b = collapse_cost(&scaled, nu).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-300));
    }
}

#[test]
fn sandwich_narrows_with_size() {
    let mut last = f64::INFINITY;
    for l in [40usize, 160, 640, 2560] {
        let (a, n) = (l / 2, l / 2);
        let k = l / 4;
        let (lo, hi) = stirling_sandwich(l, n, a, k).unwrap();
        let p = entanglement_spectrum(l, n, a)
            .unwrap()
            .weights
            .iter()
            .find(|w| w.0 == k)
            .unwrap()
            .1;
        let width = (hi - lo) / p;
        assert!(width < last, "L={l}: {width}");
        last = width;
    }
}

#[test]
fn fixed_charge_entropy_stays_bounded() {
    let mut prev = 0.0;
    let mut values = Vec::new();
    for l in [100usize, 200, 500, 1000, 2000, 5000, 10_000] {
        let s = exact_entropy(l, 4, l / 2).unwrap();
        assert!(s > prev, "entropy must approach its limit from below");
        prev = s;
        values.push(s);
    }
    // Limit for a fair split of 4 particles: entropy of Binomial(4, 1/2).
    let limit: f64 = [1.0, 4.0, 6.0, 4.0, 1.0]
        .iter()
        .map(|c| -(c / 16.0) * (c / 16.0f64).ln())
        .sum();
    assert!(values.iter().all(|&s| s < limit));
    assert!(limit - values.last().unwrap() < 1e-3);
}

#[test]
fn collapse_tolerates_small_noise() {
    let nu = 0.5;
    let mut clean = Vec::new();
    for l in [4usize, 5, 6, 7, 8] {
        for p in [0.01, 0.02, 0.05, 0.1, 0.2, 0.3] {
            let x = (l as f64).powf(1.0 / nu) * p;
            clean.push(CollapsePoint::new(l, p, 1.0 / (1.0 + x), 0.0).unwrap());
        }
    }
    let base = collapse_fit(&clean, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for a in [0.001, 0.005, 0.01] {
        let noisy: Vec<_> = clean
            .iter()
            .map(|p| {
                let u: f64 = rand::Rng::random(&mut rng);
                CollapsePoint {
                    y: p.y + a * (2.0 * u - 1.0),
                    ..*p
                }
            })
            .collect();
        let fit = collapse_fit(&noisy, 0).unwrap();
        assert!((fit.nu - base.nu).abs() < 0.05, "a={a}: {} vs {}", fit.nu, base.nu);
        assert!(
            (fit.cost - base.cost).abs() <= 2.0 * a * a,
            "a={a}: {} vs {}",
            fit.cost,
            base.cost
        );
    }
}
