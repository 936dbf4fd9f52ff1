//! Projectors, gates and measurements on [`PureState`]s.
//!
//! Projectors return the *unnormalized* post-measurement vector together with
//! its squared norm (the Born probability); measurements sample an outcome
//! and return the normalized post-state.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::hilbert::{swap_bits, z_sign, Basis, PureState};

/// Branches with Born weight below this are never selected or normalized.
pub const NULL_BRANCH: f64 = 1e-14;

/// Eigenvalue sign of a two-outcome measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        })
    }
}

/// Single-qubit Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Record of one sampled measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementOutcome {
    pub sign: Sign,
    /// Born probability of `sign` in the pre-measurement state.
    pub probability: f64,
    /// Whether `σᶻ` feedback followed (only after an odd SWAP result).
    pub feedback_applied: bool,
}

/// One outcome of a measurement: its sign, probability and normalized
/// post-state (`None` for a null branch).
#[derive(Debug, Clone)]
pub struct Branch {
    pub sign: Sign,
    pub probability: f64,
    pub state: Option<PureState>,
}

fn check_bond(state: &PureState, bond: usize) -> Result<()> {
    if state.sites() < 2 || bond + 1 >= state.sites() {
        return Err(domain!(
            "bond {bond} out of range for L = {} (bonds are 0..L-1)",
            state.sites()
        ));
    }
    Ok(())
}

fn check_site(state: &PureState, site: usize) -> Result<()> {
    if site >= state.sites() {
        return Err(domain!("site {site} out of range for L = {}", state.sites()));
    }
    Ok(())
}

/// Index of the basis state with sites `i`, `j` exchanged. Swaps preserve
/// charge, so the partner always exists in the same basis.
#[inline]
fn swapped_index(basis: &Basis, k: usize, i: usize, j: usize) -> usize {
    let bits = basis.bits(k);
    basis
        .index_of(swap_bits(bits, i, j))
        .expect("swap preserves the charge sector")
}

/// `Π^± = (1 ± SWAP_{i,i+1}) / 2` applied to `state`, with the squared norm
/// of the result.
pub fn apply_swap_projector(state: &PureState, bond: usize, sign: Sign) -> Result<(PureState, f64)> {
    check_bond(state, bond)?;
    let basis = state.basis();
    let amps = state.amplitudes();
    let s = sign.value();
    let out: Vec<Complex64> = (0..amps.len())
        .map(|k| {
            let partner = swapped_index(basis, k, bond, bond + 1);
            (amps[k] + amps[partner] * s) * 0.5
        })
        .collect();
    let prob = out.iter().map(|a| a.norm_sqr()).sum();
    Ok((PureState::from_amplitudes(basis.clone(), out)?, prob))
}

/// `(1 ± σ^axis_site) / 2` applied to `state`, with the squared norm of the
/// result. `x` and `y` leave charge sectors, so they need a full-basis state.
pub fn apply_pauli_projector(state: &PureState, site: usize, axis: Axis, sign: Sign) -> Result<(PureState, f64)> {
    check_site(state, site)?;
    let basis = state.basis();
    if axis != Axis::Z && !basis.is_full() {
        return Err(domain!(
            "σ^{axis} measurement does not conserve charge; expand the state in the full basis first"
        ));
    }
    let amps = state.amplitudes();
    let s = sign.value();
    let mask = 1u64 << site;
    let out: Vec<Complex64> = (0..amps.len())
        .map(|k| {
            let bits = basis.bits(k);
            // (σ^axis ψ)(b) = Σ_b' ⟨b|σ|b'⟩ ψ(b')
            let sigma_psi = match axis {
                Axis::Z => amps[k] * z_sign(bits, site),
                Axis::X => amps[(bits ^ mask) as usize],
                // σʸ|↓⟩ = -i|↑⟩, σʸ|↑⟩ = i|↓⟩
                Axis::Y => {
                    let phase = if bits & mask != 0 {
                        Complex64::new(0.0, -1.0)
                    } else {
                        Complex64::new(0.0, 1.0)
                    };
                    amps[(bits ^ mask) as usize] * phase
                }
            };
            (amps[k] + sigma_psi * s) * 0.5
        })
        .collect();
    let prob = out.iter().map(|a| a.norm_sqr()).sum();
    Ok((PureState::from_amplitudes(basis.clone(), out)?, prob))
}

/// `σᶻ` on one site: flips the sign of every amplitude with that site down.
pub fn apply_sigma_z(state: &PureState, site: usize) -> Result<PureState> {
    check_site(state, site)?;
    let mut out = state.clone();
    let basis = state.basis().clone();
    for (k, a) in out.amplitudes_mut().iter_mut().enumerate() {
        if basis.bits(k) >> site & 1 == 0 {
            *a = -*a;
        }
    }
    Ok(out)
}

/// Pick an outcome from `(p_plus, p_minus)` with one uniform draw. Null
/// branches are never chosen, so the caller never normalizes a zero vector.
fn born_sample<R: Rng + ?Sized>(p_plus: f64, p_minus: f64, rng: &mut R) -> Result<Sign> {
    let u: f64 = rng.random();
    if p_plus < NULL_BRANCH && p_minus < NULL_BRANCH {
        return Err(Error::Internal(format!(
            "both measurement branches vanish (p+ = {p_plus:e}, p- = {p_minus:e})"
        )));
    }
    if p_minus < NULL_BRANCH {
        return Ok(Sign::Plus);
    }
    if p_plus < NULL_BRANCH {
        return Ok(Sign::Minus);
    }
    Ok(if u * (p_plus + p_minus) < p_plus {
        Sign::Plus
    } else {
        Sign::Minus
    })
}

/// Both outcomes of a SWAP measurement on `bond`, without feedback.
pub fn swap_branches(state: &PureState, bond: usize) -> Result<[Branch; 2]> {
    let branch = |sign| -> Result<Branch> {
        let (post, p) = apply_swap_projector(state, bond, sign)?;
        Ok(Branch {
            sign,
            probability: p,
            state: if p < NULL_BRANCH {
                None
            } else {
                Some(post.normalized()?)
            },
        })
    };
    Ok([branch(Sign::Plus)?, branch(Sign::Minus)?])
}

/// Measure SWAP on `bond` (sites `bond`, `bond + 1`) by the Born rule. After
/// an odd (singlet) result `σᶻ` is applied to site `bond`, pumping the
/// singlet into the `S = 1, Sᶻ = 0` triplet.
pub fn swap_measure_with_feedback<R: Rng + ?Sized>(
    state: &PureState,
    bond: usize,
    rng: &mut R,
) -> Result<(PureState, MeasurementOutcome)> {
    let (plus, p_plus) = apply_swap_projector(state, bond, Sign::Plus)?;
    let (minus, p_minus) = apply_swap_projector(state, bond, Sign::Minus)?;
    let sign = born_sample(p_plus, p_minus, rng)?;
    let (post, probability, feedback_applied) = match sign {
        Sign::Plus => (plus.normalized()?, p_plus, false),
        Sign::Minus => (apply_sigma_z(&minus.normalized()?, bond)?, p_minus, true),
    };
    Ok((
        post,
        MeasurementOutcome {
            sign,
            probability,
            feedback_applied,
        },
    ))
}

/// Born-rule measurement of `σ^axis` on `site`. No feedback.
pub fn pauli_measure<R: Rng + ?Sized>(
    state: &PureState,
    site: usize,
    axis: Axis,
    rng: &mut R,
) -> Result<(PureState, MeasurementOutcome)> {
    let (plus, p_plus) = apply_pauli_projector(state, site, axis, Sign::Plus)?;
    let (minus, p_minus) = apply_pauli_projector(state, site, axis, Sign::Minus)?;
    let sign = born_sample(p_plus, p_minus, rng)?;
    let (post, probability) = match sign {
        Sign::Plus => (plus, p_plus),
        Sign::Minus => (minus, p_minus),
    };
    Ok((
        post.normalized()?,
        MeasurementOutcome {
            sign,
            probability,
            feedback_applied: false,
        },
    ))
}

/// Both outcomes of the ancilla protocol: an ancilla prepared in `|+⟩`
/// controls a SWAP of sites `bond`, `bond + 1` (applied when the ancilla is
/// down) and is then measured in the x basis. The system is simulated on
/// `L + 1` qubits with the ancilla as the most significant bit; the ancilla
/// is projected out after the measurement.
pub fn ancilla_cswap_branches(state: &PureState, bond: usize) -> Result<[Branch; 2]> {
    check_bond(state, bond)?;
    let sys = state.to_full();
    let l = sys.sites();
    let dim = 1usize << l;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let psi = sys.amplitudes();

    // |+⟩|ψ⟩, ancilla at bit l.
    let mut joint = vec![Complex64::new(0.0, 0.0); 2 * dim];
    for b in 0..dim {
        joint[b | dim] = psi[b] * r;
        joint[b] = psi[b] * r;
    }
    // Controlled SWAP: acts on the ancilla-down half.
    let mut after = joint.clone();
    for b in 0..dim {
        after[b] = joint[swap_bits(b as u64, bond, bond + 1) as usize];
    }

    let branch = |sign: Sign| -> Result<Branch> {
        // ⟨±|_anc = (⟨↑| ± ⟨↓|)/√2
        let s = sign.value();
        let amps: Vec<Complex64> = (0..dim).map(|b| (after[b | dim] + after[b] * s) * r).collect();
        let cond = PureState::from_amplitudes(Basis::Full { sites: l }, amps)?;
        let p = cond.norm_sqr();
        let state = if p < NULL_BRANCH {
            None
        } else {
            let full = cond.normalized()?;
            Some(match state.basis() {
                Basis::Sector(sec) => full.to_sector(sec.clone(), 1e-10)?,
                Basis::Full { .. } => full,
            })
        };
        Ok(Branch {
            sign,
            probability: p,
            state,
        })
    };
    Ok([branch(Sign::Plus)?, branch(Sign::Minus)?])
}

/// SWAP measurement realised through [`ancilla_cswap_branches`], sampled by
/// the Born rule. Feedback is left to the caller.
pub fn ancilla_cswap_measure<R: Rng + ?Sized>(
    state: &PureState,
    bond: usize,
    rng: &mut R,
) -> Result<(PureState, MeasurementOutcome)> {
    let [plus, minus] = ancilla_cswap_branches(state, bond)?;
    let sign = born_sample(plus.probability, minus.probability, rng)?;
    let chosen = if sign == Sign::Plus { plus } else { minus };
    let post = chosen
        .state
        .ok_or_else(|| Error::Internal("sampled a null branch".into()))?;
    Ok((
        post,
        MeasurementOutcome {
            sign,
            probability: chosen.probability,
            feedback_applied: false,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{dicke_state, dicke_state_in_sector, SectorBasis};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn state(sites: usize, amps: &[(u64, Complex64)]) -> PureState {
        let mut v = vec![c(0.0); 1 << sites];
        for &(b, a) in amps {
            v[b as usize] = a;
        }
        PureState::from_amplitudes(Basis::Full { sites }, v).unwrap()
    }

    fn singlet() -> PureState {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        state(2, &[(0b01, c(r)), (0b10, c(-r))])
    }

    fn assert_same_ray(a: &PureState, b: &PureState) {
        let f = a.fidelity(b).unwrap();
        assert!((f - 1.0).abs() < 1e-12, "fidelity {f}");
    }

    #[test]
    fn swap_projector_examples() {
        let up_up = PureState::product(2, 0b11).unwrap();
        let (out, p) = apply_swap_projector(&up_up, 0, Sign::Plus).unwrap();
        assert_eq!(out, up_up);
        assert_eq!(p, 1.0);

        let ud = PureState::product(2, 0b01).unwrap();
        let (out, p) = apply_swap_projector(&ud, 0, Sign::Minus).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!((out.amplitude(0b01) - c(0.5)).norm() < 1e-15);
        assert!((out.amplitude(0b10) - c(-0.5)).norm() < 1e-15);

        let d = dicke_state(4, 2).unwrap();
        for bond in 0..3 {
            let (out, p) = apply_swap_projector(&d, bond, Sign::Minus).unwrap();
            assert!(p < 1e-30);
            assert!(out.norm_sqr() < 1e-30);
        }
        assert!(matches!(apply_swap_projector(&d, 3, Sign::Plus), Err(Error::Domain(_))));
    }

    #[test]
    fn pauli_projector_examples() {
        let up = PureState::product(1, 0b1).unwrap();
        let (out, p) = apply_pauli_projector(&up, 0, Axis::Z, Sign::Plus).unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(out, up);

        let (out, p) = apply_pauli_projector(&up, 0, Axis::X, Sign::Plus).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!((out.amplitude(0) - c(0.5)).norm() < 1e-15);
        assert!((out.amplitude(1) - c(0.5)).norm() < 1e-15);

        // Dicke(2,1) projected onto site 0 down leaves |↓↑⟩ = bits 0b10.
        let d = dicke_state(2, 1).unwrap();
        let (out, p) = apply_pauli_projector(&d, 0, Axis::Z, Sign::Minus).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert_same_ray(&out.normalized().unwrap(), &PureState::product(2, 0b10).unwrap());

        assert!(apply_pauli_projector(&up, 1, Axis::Z, Sign::Plus).is_err());
        let sec = dicke_state_in_sector(Arc::new(SectorBasis::new(3, 1).unwrap()));
        assert!(apply_pauli_projector(&sec, 0, Axis::X, Sign::Plus).is_err());
        assert!(apply_pauli_projector(&sec, 0, Axis::Z, Sign::Plus).is_ok());
    }

    #[test]
    fn pauli_y_eigenstates() {
        // |+i⟩ = (|↑⟩ + i|↓⟩)/√2 has σʸ = +1.
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let plus_i = state(1, &[(1, c(r)), (0, Complex64::new(0.0, r))]);
        let (_, p) = apply_pauli_projector(&plus_i, 0, Axis::Y, Sign::Plus).unwrap();
        assert!((p - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sigma_z_pumps_singlet() {
        let pumped = apply_sigma_z(&singlet(), 0).unwrap();
        assert_same_ray(&pumped, &dicke_state(2, 1).unwrap());
        assert!((pumped.inner(&dicke_state(2, 1).unwrap()).unwrap() - c(1.0)).norm() < 1e-14);

        let all_up = PureState::product(3, 0b111).unwrap();
        assert_eq!(apply_sigma_z(&all_up, 1).unwrap(), all_up);
        let d = dicke_state(4, 2).unwrap();
        assert_eq!(apply_sigma_z(&apply_sigma_z(&d, 2).unwrap(), 2).unwrap(), d);
    }

    #[test]
    fn swap_measurement_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = dicke_state(5, 2).unwrap();
        for bond in 0..4 {
            let (post, out) = swap_measure_with_feedback(&d, bond, &mut rng).unwrap();
            assert_eq!(out.sign, Sign::Plus);
            assert!(!out.feedback_applied);
            assert_same_ray(&post, &d);
        }

        let ud = PureState::product(2, 0b01).unwrap();
        let triplet = dicke_state(2, 1).unwrap();
        let mut seen = [0usize; 2];
        for _ in 0..200 {
            let (post, out) = swap_measure_with_feedback(&ud, 0, &mut rng).unwrap();
            assert!((out.probability - 0.5).abs() < 1e-15);
            assert_eq!(out.feedback_applied, out.sign == Sign::Minus);
            assert_same_ray(&post, &triplet);
            seen[(out.sign == Sign::Minus) as usize] += 1;
        }
        assert!(seen[0] > 50 && seen[1] > 50);

        let (_, out) = swap_measure_with_feedback(&PureState::product(2, 3).unwrap(), 0, &mut rng).unwrap();
        assert_eq!((out.sign, out.probability), (Sign::Plus, 1.0));
    }

    #[test]
    fn ancilla_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (_, out) = ancilla_cswap_measure(&PureState::product(2, 3).unwrap(), 0, &mut rng).unwrap();
        assert_eq!(out.sign, Sign::Plus);
        assert!((out.probability - 1.0).abs() < 1e-15);

        let [plus, minus] = ancilla_cswap_branches(&PureState::product(2, 1).unwrap(), 0).unwrap();
        assert!((plus.probability - 0.5).abs() < 1e-15);
        assert!((minus.probability - 0.5).abs() < 1e-15);

        let [plus, minus] = ancilla_cswap_branches(&singlet(), 0).unwrap();
        assert!(plus.probability < 1e-30 && plus.state.is_none());
        assert!((minus.probability - 1.0).abs() < 1e-15);
        let (post, out) = ancilla_cswap_measure(&singlet(), 0, &mut rng).unwrap();
        assert_eq!(out.sign, Sign::Minus);
        assert_same_ray(&post, &singlet());
    }

    #[test]
    fn sector_states_measure_like_full_states() {
        let sector = Arc::new(SectorBasis::new(4, 2).unwrap());
        let full = crate::hilbert::neel_state(4).unwrap();
        let sec = full.to_sector(sector, 1e-14).unwrap();
        for bond in 0..3 {
            for sign in [Sign::Plus, Sign::Minus] {
                let (a, pa) = apply_swap_projector(&full, bond, sign).unwrap();
                let (b, pb) = apply_swap_projector(&sec, bond, sign).unwrap();
                assert!((pa - pb).abs() < 1e-15);
                assert_eq!(a, b.to_full());
            }
            let [a, _] = ancilla_cswap_branches(&sec, bond).unwrap();
            assert!(a.state.unwrap().basis() == sec.basis());
        }
    }
}
