//! Dense statevector store for the quantum side of the machine.
//!
//! Qubits live in coherence groups: each group carries the joint amplitude
//! vector of its members. Allocation creates one singleton group per qubit,
//! a gate spanning several groups merges them, and only measurement,
//! dissipation and `assert_classical` remove qubits (splitting them out of
//! their group).
//!
//! Within a group the first qubit of `basis_order` is the most significant
//! bit of the amplitude index. Outcome and preparation bit strings are read
//! the same way: first character ↔ first qubit.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::gates::GateSpec;

pub type Amplitude = Complex64;

/// Default ceiling on simultaneously live qubits.
pub const DEFAULT_MAX_QUBITS: usize = 24;
/// Hard upper bound for `max_qubits`; larger requests are clamped.
pub const MAX_QUBITS_CEILING: usize = 30;
/// Default tolerance (probability mass) for `assert_classical`.
pub const DEFAULT_ASSERT_TOL: f64 = 1e-9;
/// Amplitudes below this magnitude are omitted from state dumps.
pub const DUMP_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct QubitId(pub u64);

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QStateError {
    #[error("capacity exceeded: {requested} more qubits with {live} live, maximum {max}")]
    Capacity {
        requested: usize,
        live: usize,
        max: usize,
    },
    #[error("cannot allocate a register of width 0")]
    EmptyAllocation,
    #[error("invalid bit string `{0}`")]
    BadBitString(String),
    #[error("qubit {0} is not live")]
    DeadQubit(QubitId),
    #[error("qubit {0} listed twice")]
    DuplicateQubit(QubitId),
    #[error("gate `{gate}` acts on {expected} qubits, got {got}")]
    ArityMismatch {
        gate: String,
        expected: usize,
        got: usize,
    },
    #[error("expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("qubits {qubits:?} are not in a classical state: best outcome {best} has mass {mass:.12}, distribution {distribution:?}")]
    NotClassical {
        qubits: Vec<QubitId>,
        best: String,
        mass: f64,
        distribution: Vec<(String, f64)>,
    },
    #[error("outcome {0} has probability zero")]
    ImpossibleOutcome(String),
    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("amplitude vector length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("qubit {0} is entangled with qubits outside the requested set")]
    Entangled(QubitId),
}

pub type Result<T, E = QStateError> = std::result::Result<T, E>;

/// Qubits tracked under one joint amplitude vector.
#[derive(Debug, Clone)]
pub struct CoherenceGroup {
    basis_order: Vec<QubitId>,
    amplitudes: Vec<Amplitude>,
}

impl CoherenceGroup {
    pub fn members(&self) -> &[QubitId] {
        &self.basis_order
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn width(&self) -> usize {
        self.basis_order.len()
    }

    /// Bit position (from the least significant end) of member `pos`.
    fn shift(&self, pos: usize) -> usize {
        self.width() - 1 - pos
    }

    fn position(&self, q: QubitId) -> usize {
        self.basis_order
            .iter()
            .position(|&m| m == q)
            .expect("qubit belongs to group")
    }

    fn tensor(self, other: CoherenceGroup) -> CoherenceGroup {
        let mut amplitudes = Vec::with_capacity(self.amplitudes.len() * other.amplitudes.len());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        let mut basis_order = self.basis_order;
        basis_order.extend(other.basis_order);
        CoherenceGroup {
            basis_order,
            amplitudes,
        }
    }

    /// Marginal distribution of `subset` (in the given order), indexed by
    /// the sub-outcome with the first subset qubit most significant.
    fn marginal(&self, subset: &[QubitId]) -> Vec<f64> {
        let shifts: Vec<usize> = subset.iter().map(|&q| self.shift(self.position(q))).collect();
        let mut dist = vec![0.0; 1 << subset.len()];
        for (i, a) in self.amplitudes.iter().enumerate() {
            dist[extract(i, &shifts)] += a.norm_sqr();
        }
        let total: f64 = dist.iter().sum();
        for p in &mut dist {
            *p = (*p / total).min(1.0);
        }
        dist
    }

    /// Projects `subset` onto `outcome`, removes those qubits and
    /// renormalizes. Returns the probability of the outcome.
    fn project_out(&mut self, subset: &[QubitId], outcome: usize) -> f64 {
        let shifts: Vec<usize> = subset.iter().map(|&q| self.shift(self.position(q))).collect();
        let keep: Vec<usize> = (0..self.width())
            .filter(|&p| !subset.contains(&self.basis_order[p]))
            .collect();
        let keep_shifts: Vec<usize> = keep.iter().map(|&p| self.shift(p)).collect();
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << keep.len()];
        let mut prob = 0.0;
        for (i, a) in self.amplitudes.iter().enumerate() {
            if extract(i, &shifts) == outcome {
                amplitudes[extract(i, &keep_shifts)] = *a;
                prob += a.norm_sqr();
            }
        }
        if prob > 0.0 {
            let scale = 1.0 / prob.sqrt();
            for a in &mut amplitudes {
                *a *= scale;
            }
        }
        self.basis_order = keep.iter().map(|&p| self.basis_order[p]).collect();
        self.amplitudes = amplitudes;
        prob
    }

    /// Applies a gate to `targets` (all members of this group).
    fn apply(&mut self, gate: &GateSpec, targets: &[QubitId]) {
        let k = targets.len();
        let shifts: Vec<usize> = targets.iter().map(|&q| self.shift(self.position(q))).collect();
        let mask: usize = shifts.iter().map(|&s| 1usize << s).sum();
        let offsets: Vec<usize> = (0..1usize << k).map(|s| deposit(s, &shifts)).collect();
        let dim = 1usize << k;
        let mut buf = vec![Complex64::new(0.0, 0.0); dim];
        let m = gate.matrix();
        for base in 0..self.amplitudes.len() {
            if base & mask != 0 {
                continue;
            }
            for (s, off) in offsets.iter().enumerate() {
                buf[s] = self.amplitudes[base | off];
            }
            for (r, off) in offsets.iter().enumerate() {
                let row = &m[r * dim..(r + 1) * dim];
                self.amplitudes[base | off] = row.iter().zip(&buf).map(|(g, a)| g * a).sum();
            }
        }
    }
}

/// Gathers the bits of `index` at `shifts` into a compact integer whose most
/// significant bit comes from `shifts[0]`.
fn extract(index: usize, shifts: &[usize]) -> usize {
    shifts
        .iter()
        .fold(0, |acc, &s| (acc << 1) | ((index >> s) & 1))
}

/// Inverse of [`extract`]: scatters the bits of `compact` to `shifts`.
fn deposit(compact: usize, shifts: &[usize]) -> usize {
    let k = shifts.len();
    shifts
        .iter()
        .enumerate()
        .map(|(t, &s)| ((compact >> (k - 1 - t)) & 1) << s)
        .sum()
}

fn to_bits(value: usize, width: usize) -> String {
    (0..width)
        .map(|i| if (value >> (width - 1 - i)) & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn parse_bits(bits: &str) -> Result<Vec<bool>> {
    bits.chars()
        .map(|ch| match ch {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(QStateError::BadBitString(bits.to_string())),
        })
        .collect()
}

/// Outcome of a measurement as recorded in the run log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub qubits: Vec<QubitId>,
    pub outcome: String,
    pub probability: f64,
}

/// The quantum half of the machine.
#[derive(Debug, Clone)]
pub struct QuantumStore {
    groups: BTreeMap<u64, CoherenceGroup>,
    owner: HashMap<QubitId, u64>,
    next_id: u64,
    next_group: u64,
    max_qubits: usize,
    rng: ChaCha8Rng,
}

impl QuantumStore {
    pub fn new(max_qubits: usize, seed: u64) -> Self {
        QuantumStore {
            groups: BTreeMap::new(),
            owner: HashMap::new(),
            next_id: 0,
            next_group: 0,
            max_qubits: max_qubits.min(MAX_QUBITS_CEILING),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn max_qubits(&self) -> usize {
        self.max_qubits
    }

    pub fn live_count(&self) -> usize {
        self.owner.len()
    }

    pub fn is_live(&self, q: QubitId) -> bool {
        self.owner.contains_key(&q)
    }

    pub fn live_qubits(&self) -> Vec<QubitId> {
        let mut v: Vec<QubitId> = self.owner.keys().copied().collect();
        v.sort();
        v
    }

    pub fn groups(&self) -> impl Iterator<Item = &CoherenceGroup> {
        self.groups.values()
    }

    /// Members of the group holding `q`, in basis order.
    pub fn group_of(&self, q: QubitId) -> Result<&[QubitId]> {
        let g = self.owner.get(&q).ok_or(QStateError::DeadQubit(q))?;
        Ok(self.groups[g].members())
    }

    /// Hands out fresh ids without allocating them. Used for qubits that
    /// only exist symbolically (trace recording).
    pub fn reserve_ids(&mut self, n: usize) -> Vec<QubitId> {
        (0..n)
            .map(|_| {
                let id = QubitId(self.next_id);
                self.next_id += 1;
                id
            })
            .collect()
    }

    fn check_capacity(&self, width: usize) -> Result<()> {
        if width == 0 {
            return Err(QStateError::EmptyAllocation);
        }
        if width + self.live_count() > self.max_qubits {
            return Err(QStateError::Capacity {
                requested: width,
                live: self.live_count(),
                max: self.max_qubits,
            });
        }
        Ok(())
    }

    fn insert_group(&mut self, group: CoherenceGroup) -> u64 {
        let key = self.next_group;
        self.next_group += 1;
        for &q in group.members() {
            self.owner.insert(q, key);
        }
        self.groups.insert(key, group);
        key
    }

    /// Allocates `width` qubits in the computational basis state `initial`
    /// (first character ↔ first returned id), one group per qubit.
    pub fn allocate(&mut self, width: usize, initial: &str) -> Result<Vec<QubitId>> {
        let bits = parse_bits(initial)?;
        if bits.len() != width {
            return Err(QStateError::LengthMismatch {
                expected: width,
                got: bits.len(),
            });
        }
        self.allocate_bits(&bits)
    }

    pub fn allocate_bits(&mut self, bits: &[bool]) -> Result<Vec<QubitId>> {
        self.check_capacity(bits.len())?;
        let ids = self.reserve_ids(bits.len());
        for (&q, &b) in ids.iter().zip(bits) {
            let mut amplitudes = vec![Complex64::new(0.0, 0.0); 2];
            amplitudes[b as usize] = Complex64::new(1.0, 0.0);
            self.insert_group(CoherenceGroup {
                basis_order: vec![q],
                amplitudes,
            });
        }
        Ok(ids)
    }

    /// Allocates a register directly in an arbitrary normalized state.
    pub fn prepare(&mut self, amplitudes: &[Amplitude]) -> Result<Vec<QubitId>> {
        let n = amplitudes.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(QStateError::NotPowerOfTwo(n));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 || !norm.is_finite() {
            return Err(QStateError::NotNormalized(norm));
        }
        let width = n.trailing_zeros() as usize;
        self.check_capacity(width)?;
        let ids = self.reserve_ids(width);
        self.insert_group(CoherenceGroup {
            basis_order: ids.clone(),
            amplitudes: amplitudes.to_vec(),
        });
        Ok(ids)
    }

    fn check_targets(&self, qubits: &[QubitId]) -> Result<()> {
        for (i, q) in qubits.iter().enumerate() {
            if !self.is_live(*q) {
                return Err(QStateError::DeadQubit(*q));
            }
            if qubits[..i].contains(q) {
                return Err(QStateError::DuplicateQubit(*q));
            }
        }
        Ok(())
    }

    /// Distinct group keys touched by `qubits`, in order of first appearance.
    fn touched(&self, qubits: &[QubitId]) -> Vec<u64> {
        let mut keys = Vec::new();
        for q in qubits {
            let k = self.owner[q];
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys
    }

    fn merge(&mut self, keys: &[u64]) -> u64 {
        if keys.len() == 1 {
            return keys[0];
        }
        let mut merged = self.groups.remove(&keys[0]).expect("group exists");
        for k in &keys[1..] {
            merged = merged.tensor(self.groups.remove(k).expect("group exists"));
        }
        self.insert_group(merged)
    }

    pub fn apply_unitary(&mut self, gate: &GateSpec, targets: &[QubitId]) -> Result<()> {
        if gate.arity() != targets.len() {
            return Err(QStateError::ArityMismatch {
                gate: gate.name().to_string(),
                expected: gate.arity(),
                got: targets.len(),
            });
        }
        self.check_targets(targets)?;
        let keys = self.touched(targets);
        let key = self.merge(&keys);
        self.groups
            .get_mut(&key)
            .expect("merged group")
            .apply(gate, targets);
        Ok(())
    }

    /// Splits `qubits` by owning group, preserving each qubit's position in
    /// the request.
    fn partition(&self, qubits: &[QubitId]) -> Vec<(u64, Vec<QubitId>, Vec<usize>)> {
        self.touched(qubits)
            .into_iter()
            .map(|k| {
                let mut qs = Vec::new();
                let mut positions = Vec::new();
                for (i, q) in qubits.iter().enumerate() {
                    if self.owner[q] == k {
                        qs.push(*q);
                        positions.push(i);
                    }
                }
                (k, qs, positions)
            })
            .collect()
    }

    /// Exact Born-rule probability of reading `outcome` on `qubits`.
    pub fn probability_of(&self, qubits: &[QubitId], outcome: &str) -> Result<f64> {
        let bits = parse_bits(outcome)?;
        if bits.len() != qubits.len() {
            return Err(QStateError::LengthMismatch {
                expected: qubits.len(),
                got: bits.len(),
            });
        }
        self.check_targets(qubits)?;
        let mut p = 1.0;
        for (k, qs, positions) in self.partition(qubits) {
            let sub = positions
                .iter()
                .fold(0usize, |acc, &i| (acc << 1) | bits[i] as usize);
            p *= self.groups[&k].marginal(&qs)[sub];
        }
        Ok(p)
    }

    /// Joint outcome distribution of `qubits`, nonzero entries only, sorted
    /// by outcome string.
    pub fn outcome_distribution(&self, qubits: &[QubitId]) -> Result<Vec<(String, f64)>> {
        self.check_targets(qubits)?;
        let mut dist: Vec<(Vec<bool>, f64)> = vec![(vec![false; qubits.len()], 1.0)];
        for (k, qs, positions) in self.partition(qubits) {
            let marginal = self.groups[&k].marginal(&qs);
            let mut next = Vec::new();
            for (bits, p) in &dist {
                for (sub, q) in marginal.iter().enumerate() {
                    if *q == 0.0 {
                        continue;
                    }
                    let mut b = bits.clone();
                    for (t, &pos) in positions.iter().enumerate() {
                        b[pos] = (sub >> (qs.len() - 1 - t)) & 1 == 1;
                    }
                    next.push((b, p * q));
                }
            }
            dist = next;
        }
        let mut out: Vec<(String, f64)> = dist
            .into_iter()
            .map(|(b, p)| (b.iter().map(|&x| if x { '1' } else { '0' }).collect(), p))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    fn remove_qubits(&mut self, key: u64, qs: &[QubitId], sub: usize) -> f64 {
        let group = self.groups.get_mut(&key).expect("group exists");
        let p = group.project_out(qs, sub);
        for q in qs {
            self.owner.remove(q);
        }
        if group.width() == 0 {
            self.groups.remove(&key);
        }
        p
    }

    /// Projects `qubits` onto a given outcome and removes them. Returns the
    /// Born probability of that outcome.
    pub fn collapse(&mut self, qubits: &[QubitId], outcome: &str) -> Result<f64> {
        let p = self.probability_of(qubits, outcome)?;
        if p == 0.0 {
            return Err(QStateError::ImpossibleOutcome(outcome.to_string()));
        }
        let bits = parse_bits(outcome)?;
        for (k, qs, positions) in self.partition(qubits) {
            let sub = positions
                .iter()
                .fold(0usize, |acc, &i| (acc << 1) | bits[i] as usize);
            self.remove_qubits(k, &qs, sub);
        }
        Ok(p)
    }

    /// Samples an outcome by the Born rule, collapses and removes the
    /// measured qubits.
    pub fn measure(&mut self, qubits: &[QubitId]) -> Result<MeasurementRecord> {
        self.check_targets(qubits)?;
        let mut outcome = vec!['0'; qubits.len()];
        let mut probability = 1.0;
        for (k, qs, positions) in self.partition(qubits) {
            let marginal = self.groups[&k].marginal(&qs);
            let r: f64 = self.rng.gen();
            let mut acc = 0.0;
            let mut chosen = None;
            for (sub, p) in marginal.iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                acc += p;
                chosen = Some(sub);
                if r < acc {
                    break;
                }
            }
            let sub = chosen.expect("normalized group has support");
            probability *= marginal[sub];
            for (t, &pos) in positions.iter().enumerate() {
                if (sub >> (qs.len() - 1 - t)) & 1 == 1 {
                    outcome[pos] = '1';
                }
            }
            self.remove_qubits(k, &qs, sub);
        }
        Ok(MeasurementRecord {
            qubits: qubits.to_vec(),
            outcome: outcome.into_iter().collect(),
            probability,
        })
    }

    /// Measurement with the outcome discarded.
    pub fn dissipate(&mut self, qubits: &[QubitId]) -> Result<()> {
        if qubits.is_empty() {
            return Ok(());
        }
        self.measure(qubits).map(|_| ())
    }

    /// Returns the classical contents of `qubits` without a measurement,
    /// provided at least `1 - tol` of the probability mass sits on a single
    /// bit string. The qubits are factored out of their groups.
    pub fn assert_classical(&mut self, qubits: &[QubitId], tol: f64) -> Result<String> {
        self.check_targets(qubits)?;
        let parts = self.partition(qubits);
        let mut outcome = vec!['0'; qubits.len()];
        let mut mass = 1.0;
        let mut picks = Vec::new();
        for (k, qs, positions) in &parts {
            let marginal = self.groups[k].marginal(qs);
            let (sub, p) = marginal
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p > best.1 { (i, p) } else { best });
            mass *= p;
            for (t, &pos) in positions.iter().enumerate() {
                if (sub >> (qs.len() - 1 - t)) & 1 == 1 {
                    outcome[pos] = '1';
                }
            }
            picks.push((*k, qs.clone(), sub));
        }
        let best: String = outcome.into_iter().collect();
        if mass < 1.0 - tol {
            let mut distribution = self.outcome_distribution(qubits)?;
            distribution.sort_by(|a, b| b.1.total_cmp(&a.1));
            distribution.truncate(8);
            return Err(QStateError::NotClassical {
                qubits: qubits.to_vec(),
                best,
                mass,
                distribution,
            });
        }
        for (k, qs, sub) in picks {
            self.remove_qubits(k, &qs, sub);
        }
        Ok(best)
    }

    /// Joint amplitude vector of exactly `qubits` (first listed is most
    /// significant). Fails if any of them shares a group with a qubit
    /// outside the list.
    pub fn joint_state(&self, qubits: &[QubitId]) -> Result<Vec<Amplitude>> {
        self.check_targets(qubits)?;
        let keys = self.touched(qubits);
        let mut order = Vec::new();
        let mut amps = vec![Complex64::new(1.0, 0.0)];
        for k in keys {
            let g = &self.groups[&k];
            if let Some(outside) = g.members().iter().find(|q| !qubits.contains(q)) {
                return Err(QStateError::Entangled(*outside));
            }
            let mut next = Vec::with_capacity(amps.len() * g.amplitudes.len());
            for a in &amps {
                for b in &g.amplitudes {
                    next.push(a * b);
                }
            }
            amps = next;
            order.extend_from_slice(g.members());
        }
        let n = qubits.len();
        // order[p] sits at shift n-1-p in `amps`; permute into request order.
        let shifts: Vec<usize> = qubits
            .iter()
            .map(|q| n - 1 - order.iter().position(|o| o == q).unwrap())
            .collect();
        Ok((0..1usize << n).map(|i| amps[deposit(i, &shifts)]).collect())
    }

    /// State dump: one line per nonzero amplitude of the full store,
    /// `|bits⟩ re im`, qubits in ascending id order, sorted by bit string.
    pub fn dump_lines(&self) -> Vec<String> {
        let live = self.live_qubits();
        let index_of: HashMap<QubitId, usize> =
            live.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let mut entries: Vec<(Vec<u8>, Amplitude)> =
            vec![(vec![b'0'; live.len()], Complex64::new(1.0, 0.0))];
        for g in self.groups.values() {
            let support: Vec<(usize, Amplitude)> = g
                .amplitudes
                .iter()
                .copied()
                .enumerate()
                .filter(|(_, a)| a.norm() > DUMP_EPSILON)
                .collect();
            let mut next = Vec::with_capacity(entries.len() * support.len());
            for (bits, amp) in &entries {
                for (i, a) in &support {
                    let mut b = bits.clone();
                    for (p, q) in g.members().iter().enumerate() {
                        if (i >> g.shift(p)) & 1 == 1 {
                            b[index_of[q]] = b'1';
                        }
                    }
                    next.push((b, amp * a));
                }
            }
            entries = next;
        }
        entries.retain(|(_, a)| a.norm() > DUMP_EPSILON);
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        entries
            .into_iter()
            .map(|(bits, a)| {
                format!(
                    "|{}⟩ {:.16e} {:.16e}",
                    String::from_utf8(bits).expect("ascii"),
                    a.re + 0.0,
                    a.im + 0.0
                )
            })
            .collect()
    }

    /// Verifies the partition and normalization invariants.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut seen = 0;
        for (k, g) in &self.groups {
            if g.amplitudes.len() != 1 << g.width() {
                return Err(format!("group {k} has wrong amplitude count"));
            }
            let n = g.norm_sqr();
            if (n - 1.0).abs() > 1e-9 {
                return Err(format!("group {k} has norm² {n}"));
            }
            if g.amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
                return Err(format!("group {k} has non-finite amplitudes"));
            }
            for q in g.members() {
                if self.owner.get(q) != Some(k) {
                    return Err(format!("{q} ownership mismatch"));
                }
                seen += 1;
            }
        }
        if seen != self.owner.len() {
            return Err("groups do not cover live qubits".into());
        }
        Ok(())
    }
}

/// Formats `value` as a `width`-bit string, most significant first.
pub fn bit_string(value: usize, width: usize) -> String {
    to_bits(value, width)
}
