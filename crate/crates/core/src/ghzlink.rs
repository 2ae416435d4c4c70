//! Noisy GHZ resources and the teleported (non-local) fan-out CNOT.
//!
//! One fan-out session implements CNOTs from a server qubit onto `m` remote
//! target qubits using a fresh GHZ state on `m+1` qubits, local gates and
//! classical messages only:
//!
//! 1. the server applies CNOT from its data qubit onto its GHZ qubit,
//!    measures it and broadcasts the bit (the *entangle-round* message);
//!    each receiver applies X to its GHZ qubit if the bit was 1;
//! 2. each receiver applies CNOT from its (corrected) GHZ qubit onto its
//!    target qubit, then H on the GHZ qubit, measures it and sends the bit
//!    back (the *disentangle-round* messages); the server applies Z to its
//!    data qubit for every 1 received.
//!
//! Because a CNOT fan-out is self-inverse, the same session both attaches
//! copies (entangle) and detaches them again (disentangle); the two public
//! ops differ only in how the session is labelled in the transcript. Every
//! session consumes one GHZ resource, whose qubits carry link noise applied
//! at generation time.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use rand::Rng;

use crate::noise::{apply_link_noise, apply_link_noise_sampled, NoiseModel};
use crate::qkernel::{CMatrix, DensityMatrix, KrausChannel, Unitary};
use crate::{Error, Result};

// Supplies f64 math (sqrt, cos, ...) when no dependency pulls in std.
// Whenever std does enter the build graph (tests, std-enabled consumers),
// the inherent methods shadow these and the import goes unused.
#[allow(unused_imports)]
use num_traits::Float;

/// A GHZ state on `size` qubits with link noise already applied.
#[derive(Clone, Debug)]
pub struct GhzResource {
    state: DensityMatrix,
    size: usize,
}

impl GhzResource {
    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

fn ideal_ghz(size: usize) -> Result<DensityMatrix> {
    if size < 2 {
        return Err(Error::InvalidConfig(alloc::format!(
            "a GHZ resource needs at least 2 qubits, got {size}"
        )));
    }
    let dim = 1usize << size;
    let amp = Complex64::new(1.0 / 2.0f64.sqrt(), 0.0);
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    amps[0] = amp;
    amps[dim - 1] = amp;
    DensityMatrix::from_amplitudes(&amps)
}

/// `(|0…0⟩ + |1…1⟩)/√2` followed by one application of `noise` to every
/// qubit — the exact (averaged) noisy resource.
pub fn generate_noisy_ghz(size: usize, noise: &NoiseModel) -> Result<GhzResource> {
    let ghz = ideal_ghz(size)?;
    let qubits: Vec<usize> = (0..size).collect();
    Ok(GhzResource { state: apply_link_noise(&ghz, noise, &qubits)?, size })
}

/// Trajectory form of [`generate_noisy_ghz`]: one sampled Pauli per qubit.
pub fn generate_noisy_ghz_sampled<R: Rng + ?Sized>(
    size: usize,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<(GhzResource, Vec<usize>)> {
    let ghz = ideal_ghz(size)?;
    let qubits: Vec<usize> = (0..size).collect();
    let (state, picks) = apply_link_noise_sampled(&ghz, noise, &qubits, rng)?;
    Ok((GhzResource { state, size }, picks))
}

/// Which half of the adder a session implements: attaching value copies to
/// the receivers or detaching them again.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SessionKind {
    Entangle,
    Disentangle,
}

/// Phase of a classical message inside one session: the server broadcast that
/// completes the GHZ attachment, or a receiver's teardown result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum MessageRound {
    Entangle,
    Disentangle,
}

/// One classical bit sent during a session. `sender` 0 is the server,
/// `1..=m` are the receivers in target order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassicalMessage {
    pub sender: usize,
    pub round: MessageRound,
    pub bit: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CorrectionKind {
    /// X on every receiver's GHZ qubit, triggered by the server broadcast.
    FlipReceivers,
    /// Z on the server data qubit, triggered by one receiver's result.
    PhaseServer,
}

/// A conditional Pauli correction and whether its trigger bit fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrectionRecord {
    /// Index into the session's message list.
    pub message: usize,
    pub kind: CorrectionKind,
    pub applied: bool,
}

/// Classical record of one fan-out session: exactly one entangle-round
/// message and `m` disentangle-round messages, each with its correction.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SessionTranscript {
    pub session: SessionKind,
    pub server_qubit: usize,
    pub receiver_qubits: Vec<usize>,
    pub messages: Vec<ClassicalMessage>,
    pub corrections: Vec<CorrectionRecord>,
}

/// One forced-outcome branch of a session (see [`fanout_branch`]).
#[derive(Clone, Debug)]
pub struct FanoutBranch {
    pub probability: f64,
    pub state: DensityMatrix,
    pub transcript: SessionTranscript,
}

fn validate_layout(reg: &DensityMatrix, server: usize, receivers: &[usize], ghz: &GhzResource) -> Result<()> {
    let n = reg.num_qubits();
    if receivers.is_empty() {
        return Err(Error::InvalidConfig("fan-out needs at least one receiver".into()));
    }
    if ghz.size != receivers.len() + 1 {
        return Err(Error::DimensionMismatch { expected: receivers.len() + 1, got: ghz.size });
    }
    if server >= n {
        return Err(Error::QubitOutOfRange { qubit: server, num_qubits: n });
    }
    let mut seen = vec![server];
    for &r in receivers {
        if r >= n {
            return Err(Error::QubitOutOfRange { qubit: r, num_qubits: n });
        }
        if seen.contains(&r) {
            return Err(Error::DuplicateTarget(r));
        }
        seen.push(r);
    }
    Ok(())
}

/// Complete dephasing as exact projectors; turns a measured-and-forgotten
/// qubit into a classical control without any floating-point rounding.
fn projector_dephase() -> KrausChannel {
    let mut p0 = CMatrix::zeros(2);
    p0.set(0, 0, Complex64::new(1.0, 0.0));
    let mut p1 = CMatrix::zeros(2);
    p1.set(1, 1, Complex64::new(1.0, 0.0));
    KrausChannel::new(vec![p0, p1]).expect("projector pair is a valid channel")
}

/// Exact fan-out as a channel: measurements and classical feed-forward are
/// replaced by dephasing plus controlled gates (deferred measurement), so the
/// result is the average over all outcome branches. No transcript exists in
/// this form.
pub fn fanout_deferred(
    reg: &DensityMatrix,
    server: usize,
    receivers: &[usize],
    ghz: &GhzResource,
) -> Result<DensityMatrix> {
    validate_layout(reg, server, receivers, ghz)?;
    let n = reg.num_qubits();
    let m = receivers.len();
    let dephase = projector_dephase();
    let cnot = Unitary::cnot();

    let mut w = reg.tensor(&ghz.state);
    // Server half: attach data to the GHZ qubit A (index n), then defer its
    // measurement; the broadcast becomes CNOTs from A onto every B_i.
    w.apply_unitary_in_place(&cnot, &[server, n])?;
    w.apply_kraus_in_place(&dephase, &[n])?;
    for i in 0..m {
        w.apply_unitary_in_place(&cnot, &[n, n + 1 + i])?;
    }
    let keep: Vec<usize> = (0..w.num_qubits()).filter(|&q| q != n).collect();
    w = w.partial_trace(&keep)?;
    // Receiver halves: after each teardown the GHZ qubit B_i sits at index n.
    for i in 0..m {
        w.apply_unitary_in_place(&cnot, &[n, receivers[i]])?;
        w.apply_unitary_in_place(&Unitary::hadamard(), &[n])?;
        w.apply_kraus_in_place(&dephase, &[n])?;
        w.apply_unitary_in_place(&Unitary::cz(), &[n, server])?;
        let keep: Vec<usize> = (0..w.num_qubits()).filter(|&q| q != n).collect();
        w = w.partial_trace(&keep)?;
    }
    Ok(w)
}

fn run_fanout(
    reg: &DensityMatrix,
    server: usize,
    receivers: &[usize],
    ghz: &GhzResource,
    session: SessionKind,
    measure: &mut dyn FnMut(&DensityMatrix, usize) -> Result<(u8, f64, DensityMatrix)>,
) -> Result<(f64, DensityMatrix, SessionTranscript)> {
    validate_layout(reg, server, receivers, ghz)?;
    let n = reg.num_qubits();
    let m = receivers.len();
    let cnot = Unitary::cnot();
    let x = Unitary::pauli_x();
    let z = Unitary::pauli_z();
    let h = Unitary::hadamard();

    let mut messages = Vec::with_capacity(1 + m);
    let mut corrections = Vec::with_capacity(1 + m);
    let mut probability = 1.0f64;

    let mut w = reg.tensor(&ghz.state);
    w.apply_unitary_in_place(&cnot, &[server, n])?;
    let (b, p, next) = measure(&w, n)?;
    probability *= p;
    w = next;
    messages.push(ClassicalMessage { sender: 0, round: MessageRound::Entangle, bit: b });
    corrections.push(CorrectionRecord { message: 0, kind: CorrectionKind::FlipReceivers, applied: b == 1 });
    if b == 1 {
        for i in 0..m {
            w.apply_unitary_in_place(&x, &[n + 1 + i])?;
        }
    }
    let keep: Vec<usize> = (0..w.num_qubits()).filter(|&q| q != n).collect();
    w = w.partial_trace(&keep)?;

    for i in 0..m {
        w.apply_unitary_in_place(&cnot, &[n, receivers[i]])?;
        w.apply_unitary_in_place(&h, &[n])?;
        let (c, p, next) = measure(&w, n)?;
        probability *= p;
        w = next;
        messages.push(ClassicalMessage { sender: i + 1, round: MessageRound::Disentangle, bit: c });
        corrections.push(CorrectionRecord {
            message: 1 + i,
            kind: CorrectionKind::PhaseServer,
            applied: c == 1,
        });
        if c == 1 {
            w.apply_unitary_in_place(&z, &[server])?;
        }
        let keep: Vec<usize> = (0..w.num_qubits()).filter(|&q| q != n).collect();
        w = w.partial_trace(&keep)?;
    }

    let transcript = SessionTranscript {
        session,
        server_qubit: server,
        receiver_qubits: receivers.to_vec(),
        messages,
        corrections,
    };
    Ok((probability, w, transcript))
}

/// Run one fan-out session with sampled measurement outcomes, attaching value
/// copies to the receivers. Consumes one GHZ resource.
pub fn entangle_fanout<R: Rng + ?Sized>(
    reg: &DensityMatrix,
    server: usize,
    receivers: &[usize],
    ghz: &GhzResource,
    rng: &mut R,
) -> Result<(DensityMatrix, SessionTranscript)> {
    sampled_fanout(reg, server, receivers, ghz, SessionKind::Entangle, rng)
}

/// The inverse session: the identical circuit (a CNOT fan-out is
/// self-inverse), labelled as the detach half in the transcript.
pub fn disentangle_fanout<R: Rng + ?Sized>(
    reg: &DensityMatrix,
    server: usize,
    receivers: &[usize],
    ghz: &GhzResource,
    rng: &mut R,
) -> Result<(DensityMatrix, SessionTranscript)> {
    sampled_fanout(reg, server, receivers, ghz, SessionKind::Disentangle, rng)
}

fn sampled_fanout<R: Rng + ?Sized>(
    reg: &DensityMatrix,
    server: usize,
    receivers: &[usize],
    ghz: &GhzResource,
    session: SessionKind,
    rng: &mut R,
) -> Result<(DensityMatrix, SessionTranscript)> {
    let mut measure = |w: &DensityMatrix, q: usize| -> Result<(u8, f64, DensityMatrix)> {
        let (bit, state) = w.project_measure(q, rng)?;
        // Sampled runs carry no branch weight; the draw already accounted
        // for the probability.
        Ok((bit, 1.0, state))
    };
    let (_, state, transcript) = run_fanout(reg, server, receivers, ghz, session, &mut measure)?;
    Ok((state, transcript))
}

/// Run one session with all `1 + m` measurement outcomes forced, returning
/// the branch probability alongside the conditioned state. Branches with zero
/// probability error with [`Error::ZeroProbabilityBranch`].
pub fn fanout_branch(
    reg: &DensityMatrix,
    server: usize,
    receivers: &[usize],
    ghz: &GhzResource,
    session: SessionKind,
    outcomes: &[u8],
) -> Result<FanoutBranch> {
    if outcomes.len() != receivers.len() + 1 {
        return Err(Error::DimensionMismatch { expected: receivers.len() + 1, got: outcomes.len() });
    }
    let mut next = 0usize;
    let mut measure = |w: &DensityMatrix, q: usize| -> Result<(u8, f64, DensityMatrix)> {
        let bit = outcomes[next];
        next += 1;
        let p = w.outcome_probability(q, bit)?;
        let (_, state) = w.project_onto(q, bit)?;
        Ok((bit, p, state))
    };
    let (probability, state, transcript) =
        run_fanout(reg, server, receivers, ghz, session, &mut measure)?;
    Ok(FanoutBranch { probability, state, transcript })
}

/// All outcome branches of a session that have nonzero probability.
pub fn enumerate_fanout_branches(
    reg: &DensityMatrix,
    server: usize,
    receivers: &[usize],
    ghz: &GhzResource,
    session: SessionKind,
) -> Result<Vec<FanoutBranch>> {
    let m = receivers.len();
    let mut branches = Vec::new();
    for pattern in 0u32..(1u32 << (m + 1)) {
        let outcomes: Vec<u8> = (0..=m).map(|j| ((pattern >> j) & 1) as u8).collect();
        match fanout_branch(reg, server, receivers, ghz, session, &outcomes) {
            Ok(branch) => branches.push(branch),
            Err(Error::ZeroProbabilityBranch) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(branches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn server_plus_targets(m: usize) -> DensityMatrix {
        // Server in (|0⟩ + e^{0.7i}|1⟩)/√2 at qubit 0, m empty targets after.
        let mut reg = DensityMatrix::zero_state(1 + m);
        reg = reg.apply_unitary(&Unitary::hadamard(), &[0]).unwrap();
        reg = reg.apply_unitary(&Unitary::phase(0.7), &[0]).unwrap();
        reg
    }

    fn receivers(m: usize) -> Vec<usize> {
        (1..=m).collect()
    }

    #[test]
    fn ghz_state_structure() {
        let ghz = generate_noisy_ghz(3, &NoiseModel::none()).unwrap();
        let s = ghz.state();
        assert!((s.entry(0, 0).re - 0.5).abs() < 1e-15);
        assert!((s.entry(7, 7).re - 0.5).abs() < 1e-15);
        assert!((s.entry(0, 7).re - 0.5).abs() < 1e-15);
        assert!((s.entry(1, 1).norm()) < 1e-15);
    }

    #[test]
    fn noisy_ghz_corner_coherence_damps_per_qubit() {
        for kind in [NoiseKind::Dephasing, NoiseKind::Depolarising] {
            let p = 0.2;
            let size = 3;
            let noise = NoiseModel::new(kind, p).unwrap();
            let ghz = generate_noisy_ghz(size, &noise).unwrap();
            let corner = ghz.state().entry(0, (1 << size) - 1);
            assert!(
                (corner.re - 0.5 * (1.0 - p).powi(size as i32)).abs() < 1e-15,
                "{kind:?}"
            );
            assert!(corner.im.abs() < 1e-15);
        }
    }

    #[test]
    fn noiseless_fanout_equals_direct_cnots() {
        for m in 1..=3 {
            let reg = server_plus_targets(m);
            let ghz = generate_noisy_ghz(m + 1, &NoiseModel::none()).unwrap();
            let out = fanout_deferred(&reg, 0, &receivers(m), &ghz).unwrap();
            let mut ideal = reg.clone();
            for t in receivers(m) {
                ideal = ideal.apply_unitary(&Unitary::cnot(), &[0, t]).unwrap();
            }
            assert!(out.max_abs_diff(&ideal) < 1e-13, "m={m}");
        }
    }

    #[test]
    fn every_forced_branch_of_noiseless_fanout_is_ideal() {
        // The corrections exist precisely so that each of the 2^(m+1) outcome
        // patterns yields the same final state; this pins the convention that
        // outcome 1 triggers X at the receivers / Z at the server.
        let m = 2;
        let reg = server_plus_targets(m);
        let ghz = generate_noisy_ghz(m + 1, &NoiseModel::none()).unwrap();
        let mut ideal = reg.clone();
        for t in receivers(m) {
            ideal = ideal.apply_unitary(&Unitary::cnot(), &[0, t]).unwrap();
        }
        let branches =
            enumerate_fanout_branches(&reg, 0, &receivers(m), &ghz, SessionKind::Entangle).unwrap();
        assert_eq!(branches.len(), 1 << (m + 1));
        for br in &branches {
            assert!((br.probability - 1.0 / 8.0).abs() < 1e-13);
            assert!(br.state.max_abs_diff(&ideal) < 1e-12);
        }
    }

    #[test]
    fn deferred_equals_branch_average() {
        for kind in [NoiseKind::Dephasing, NoiseKind::Depolarising] {
            let m = 2;
            let noise = NoiseModel::new(kind, 0.3).unwrap();
            let reg = server_plus_targets(m);
            let ghz = generate_noisy_ghz(m + 1, &noise).unwrap();
            let deferred = fanout_deferred(&reg, 0, &receivers(m), &ghz).unwrap();
            let branches =
                enumerate_fanout_branches(&reg, 0, &receivers(m), &ghz, SessionKind::Entangle)
                    .unwrap();
            let mut avg = CMatrix::zeros(deferred.dim());
            let mut total = 0.0;
            for br in &branches {
                total += br.probability;
                avg.add_assign(&br.state.matrix().scale(Complex64::new(br.probability, 0.0)));
            }
            assert!((total - 1.0).abs() < 1e-12, "{kind:?}");
            assert!(avg.max_abs_diff(deferred.matrix()) < 1e-10, "{kind:?}");
        }
    }

    #[test]
    fn transcript_has_one_broadcast_and_m_returns() {
        let m = 3;
        let reg = server_plus_targets(m);
        let ghz = generate_noisy_ghz(m + 1, &NoiseModel::none()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let (_, tr) = entangle_fanout(&reg, 0, &receivers(m), &ghz, &mut rng).unwrap();
        assert_eq!(tr.session, SessionKind::Entangle);
        assert_eq!(tr.messages.len(), 1 + m);
        assert_eq!(tr.messages[0].round, MessageRound::Entangle);
        assert_eq!(tr.messages[0].sender, 0);
        for i in 1..=m {
            assert_eq!(tr.messages[i].round, MessageRound::Disentangle);
            assert_eq!(tr.messages[i].sender, i);
        }
        assert_eq!(tr.corrections.len(), 1 + m);
        assert_eq!(tr.corrections[0].kind, CorrectionKind::FlipReceivers);
        for i in 1..=m {
            assert_eq!(tr.corrections[i].kind, CorrectionKind::PhaseServer);
            assert_eq!(tr.corrections[i].applied, tr.messages[i].bit == 1);
        }
    }

    #[test]
    fn entangle_then_disentangle_restores_register_with_phase() {
        // Attach copies, rotate each copy, detach: the server qubit keeps the
        // accumulated phase and every receiver returns to |0⟩.
        let m = 2;
        let phi = [0.4, 1.1];
        let reg = server_plus_targets(m);
        let ghz = generate_noisy_ghz(m + 1, &NoiseModel::none()).unwrap();
        let mut w = fanout_deferred(&reg, 0, &receivers(m), &ghz).unwrap();
        for (i, &angle) in phi.iter().enumerate() {
            w = w.apply_unitary(&Unitary::phase(angle), &[1 + i]).unwrap();
        }
        let ghz2 = generate_noisy_ghz(m + 1, &NoiseModel::none()).unwrap();
        w = fanout_deferred(&w, 0, &receivers(m), &ghz2).unwrap();

        let expected = reg
            .apply_unitary(&Unitary::phase(phi.iter().sum()), &[0])
            .unwrap();
        assert!(w.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn round_trip_coherence_damps_as_minus_p_to_the_2m2() {
        // Both noise kinds multiply the server coherence by (1-p) once per
        // GHZ qubit per session: (1-p)^(2(m+1)) after attach + detach.
        for kind in [NoiseKind::Dephasing, NoiseKind::Depolarising] {
            for m in 1..=2 {
                let p = 0.15;
                let noise = NoiseModel::new(kind, p).unwrap();
                let reg = server_plus_targets(m);
                let before = reg.partial_trace(&[0]).unwrap().entry(0, 1);
                let ghz1 = generate_noisy_ghz(m + 1, &noise).unwrap();
                let mut w = fanout_deferred(&reg, 0, &receivers(m), &ghz1).unwrap();
                let ghz2 = generate_noisy_ghz(m + 1, &noise).unwrap();
                w = fanout_deferred(&w, 0, &receivers(m), &ghz2).unwrap();
                let server = w.partial_trace(&[0]).unwrap();
                let expected = before * (1.0 - p).powi(2 * (m as i32 + 1));
                assert!(
                    (server.entry(0, 1) - expected).norm() < 1e-12,
                    "kind={kind:?} m={m}"
                );
                // Populations stay exactly balanced.
                assert!((server.entry(0, 0).re - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fully_depolarised_link_leaves_no_correlation() {
        // With p = 1 the GHZ resource is I/d, so the session can transfer no
        // information: the joint outcome distribution over (server, targets)
        // factorises, i.e. the classical mutual information is zero.
        let m = 2;
        let noise = NoiseModel::new(NoiseKind::Depolarising, 1.0).unwrap();
        let reg = server_plus_targets(m);
        let ghz = generate_noisy_ghz(m + 1, &noise).unwrap();
        let out = fanout_deferred(&reg, 0, &receivers(m), &ghz).unwrap();
        let joint = out.measurement_distribution().unwrap();
        let dim = 1 << (m + 1);
        let mut p_server = [0.0f64; 2];
        let mut p_targets = vec![0.0f64; 1 << m];
        for idx in 0..dim {
            let s = idx >> m;
            let t = idx & ((1 << m) - 1);
            p_server[s] += joint[idx];
            p_targets[t] += joint[idx];
        }
        let mut mi = 0.0f64;
        for idx in 0..dim {
            let pj = joint[idx];
            if pj > 1e-15 {
                let s = idx >> m;
                let t = idx & ((1 << m) - 1);
                mi += pj * (pj / (p_server[s] * p_targets[t])).ln();
            }
        }
        assert!(mi.abs() < 1e-12);
    }

    #[test]
    fn sampled_sessions_are_reproducible() {
        let m = 2;
        let noise = NoiseModel::new(NoiseKind::Dephasing, 0.4).unwrap();
        let reg = server_plus_targets(m);
        let run = |seed: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let (ghz, _) = generate_noisy_ghz_sampled(m + 1, &noise, &mut rng).unwrap();
            entangle_fanout(&reg, 0, &receivers(m), &ghz, &mut rng).unwrap()
        };
        let (s1, t1) = run(9);
        let (s2, t2) = run(9);
        assert_eq!(t1, t2);
        assert!(s1.max_abs_diff(&s2) == 0.0);
    }

    #[test]
    fn layout_validation() {
        let reg = server_plus_targets(2);
        let ghz = generate_noisy_ghz(3, &NoiseModel::none()).unwrap();
        assert!(matches!(
            fanout_deferred(&reg, 0, &[1], &ghz),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            fanout_deferred(&reg, 0, &[1, 0], &ghz),
            Err(Error::DuplicateTarget(0))
        ));
        assert!(matches!(
            fanout_deferred(&reg, 0, &[1, 7], &ghz),
            Err(Error::QubitOutOfRange { qubit: 7, .. })
        ));
    }
}

