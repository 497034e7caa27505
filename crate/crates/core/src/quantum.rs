//! Quantum-rule generators: measurement chains and singlet pairs.
//!
//! A measurement along axis `b` of a particle prepared along oriented axis
//! `c` yields +1 with probability `(1 + dot(c, b)) / 2` and re-prepares the
//! particle along `b` oriented by the outcome. An unpolarized particle
//! yields a fair coin. Pairs are sampled sequentially: the first-measured
//! side is a fair coin, its partner is prepared along the reversed,
//! outcome-oriented axis and then measured under the same rule. A direct
//! sampler from the closed-form joint law is provided as a cross-check.

use serde::{Deserialize, Serialize};

use crate::axis::{axis_dot, Axis};
use crate::error::{Error, Result};
use crate::event::Side;
use crate::outcome::Outcome;
use crate::prep::PreparationState;
use crate::rng::{chunk_bounds, collect_chunked, rng_stream, stream_id, RngStream, StreamKind};
use crate::time::{
    LogicalTime, PairTimes, PAIR_CREATED_TICK, PAIR_FIRST_TICK, PAIR_HORIZON_TICK,
    PAIR_SECOND_TICK,
};

/// Probability of a +1 outcome along `measured` for a particle prepared
/// along oriented axis `prepared`.
pub fn transition_prob_plus(prepared: Axis, measured: Axis) -> f64 {
    (1.0 + axis_dot(prepared, measured)) / 2.0
}

/// One particle's ordered measurement history.
///
/// If the chain was built with an initial preparation, element 0 records it
/// (at the creation tick) and the sampled measurements follow; otherwise
/// element 0 is the first sampled measurement. Times are strictly
/// increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleParticleChain {
    pub axes: Vec<Axis>,
    pub outcomes: Vec<Outcome>,
    pub times: Vec<LogicalTime>,
    /// Whether element 0 is an initial preparation rather than a draw.
    pub prepared: bool,
}

impl SingleParticleChain {
    pub fn len(&self) -> usize {
        self.axes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }

    /// Product of the outcomes at slots `i` and `j`.
    pub fn product(&self, i: usize, j: usize) -> i8 {
        self.outcomes[i].product(self.outcomes[j])
    }

    /// The preparation intervals implied by this history, in time order.
    /// The initial preparation, when present, follows the same
    /// re-preparation rule as a measurement.
    pub fn preparation_history(&self) -> Vec<PreparationState> {
        let mut states = Vec::with_capacity(self.len() + 1);
        let horizon = LogicalTime::later(self.times.last().map_or(1, |t| t.tick) + 1);
        if !self.prepared {
            states.push(PreparationState::source(
                LogicalTime::creation(0),
                self.times[0],
            ));
        }
        for k in 0..self.len() {
            let until = if k + 1 < self.len() { self.times[k + 1] } else { horizon };
            states.push(PreparationState::from_measurement(
                self.axes[k],
                self.outcomes[k],
                self.times[k],
                until,
            ));
        }
        states
    }
}

/// Measures one particle along `axes` in order, starting from an optional
/// prepared state `(axis, outcome)`.
pub fn measure_chain(
    initial_prep: Option<(Axis, Outcome)>,
    axes: &[Axis],
    stream: &mut RngStream,
) -> Result<SingleParticleChain> {
    if axes.is_empty() {
        return Err(Error::EmptyAxes);
    }
    let prepared = initial_prep.is_some();
    let mut chain = SingleParticleChain {
        axes: Vec::with_capacity(axes.len() + 1),
        outcomes: Vec::with_capacity(axes.len() + 1),
        times: Vec::with_capacity(axes.len() + 1),
        prepared,
    };
    let mut current: Option<Axis> = None;
    if let Some((axis, outcome)) = initial_prep {
        chain.axes.push(axis);
        chain.outcomes.push(outcome);
        chain.times.push(LogicalTime::creation(0));
        current = Some(axis.oriented(outcome));
    }
    for (k, &axis) in axes.iter().enumerate() {
        let outcome = match current {
            None => stream.coin(),
            Some(prep) => stream.outcome_with_prob(transition_prob_plus(prep, axis)),
        };
        let tick = k as u64 + 1;
        let time = if k == 0 {
            LogicalTime::first_measure(tick)
        } else {
            LogicalTime::later(tick)
        };
        chain.axes.push(axis);
        chain.outcomes.push(outcome);
        chain.times.push(time);
        current = Some(axis.oriented(outcome));
    }
    Ok(chain)
}

/// Closed-form two-step chain correlation: for consecutive measurements at
/// `a0, a1, a2`, `E[s0 * s2] = dot(a0, a1) * dot(a1, a2)`.
pub fn chain_two_step_correlation(a0: Axis, a1: Axis, a2: Axis) -> f64 {
    axis_dot(a0, a1) * axis_dot(a1, a2)
}

/// Empirical mean of `s(prep) * s(probe)` over `n` chains prepared +1 along
/// `prep_axis`, then measured along `erase_axis` and `probe_axis`.
///
/// Expected value: `dot(prep, erase) * dot(erase, probe)`; the intermediate
/// measurement washes out the preparation whenever the axes are orthogonal.
pub fn erase_check(
    prep_axis: Axis,
    erase_axis: Axis,
    probe_axis: Axis,
    n: u64,
    stream: &mut RngStream,
) -> f64 {
    assert!(n >= 1, "erase_check needs at least one chain");
    let axes = [erase_axis, probe_axis];
    let mut sum: i64 = 0;
    for _ in 0..n {
        let chain = measure_chain(Some((prep_axis, Outcome::Plus)), &axes, stream)
            .expect("two axes are provided");
        sum += i64::from(chain.product(0, 2));
    }
    sum as f64 / n as f64
}

/// One generated pair: both settings, both outcomes, and the measurement
/// order that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingletPair {
    pub pair_index: u64,
    pub axis_p: Axis,
    pub axis_pp: Axis,
    pub outcome_p: Outcome,
    pub outcome_pp: Outcome,
    pub time_p: LogicalTime,
    pub time_pp: LogicalTime,
    pub first_measured: Side,
    pub created: LogicalTime,
}

impl SingletPair {
    pub fn axis(&self, side: Side) -> Axis {
        match side {
            Side::P => self.axis_p,
            Side::PPrime => self.axis_pp,
        }
    }

    pub fn outcome(&self, side: Side) -> Outcome {
        match side {
            Side::P => self.outcome_p,
            Side::PPrime => self.outcome_pp,
        }
    }

    pub fn time(&self, side: Side) -> LogicalTime {
        match side {
            Side::P => self.time_p,
            Side::PPrime => self.time_pp,
        }
    }

    /// Product of the two outcomes.
    pub fn product(&self) -> i8 {
        self.outcome_p.product(self.outcome_pp)
    }

    /// The pair's clock layout.
    pub fn times(&self) -> PairTimes {
        let (first, second) = if self.first_measured == Side::P {
            (self.time_p, self.time_pp)
        } else {
            (self.time_pp, self.time_p)
        };
        PairTimes {
            created: self.created,
            first,
            second,
            horizon: LogicalTime::later(PAIR_HORIZON_TICK),
        }
    }

    /// The preparation intervals of one side, in time order: unpolarized
    /// from creation, partner-collapsed if the other side fired first, then
    /// re-prepared by its own measurement.
    pub fn preparation_history(&self, side: Side) -> Vec<PreparationState> {
        let horizon = LogicalTime::later(PAIR_HORIZON_TICK);
        let own_time = self.time(side);
        let mut states = Vec::with_capacity(3);
        if self.first_measured == side {
            states.push(PreparationState::source(self.created, own_time));
        } else {
            let partner = side.other();
            let partner_time = self.time(partner);
            states.push(PreparationState::source(self.created, partner_time));
            states.push(PreparationState::from_partner_collapse(
                self.axis(partner),
                self.outcome(partner),
                partner_time,
                own_time,
            ));
        }
        states.push(PreparationState::from_measurement(
            self.axis(side),
            self.outcome(side),
            own_time,
            horizon,
        ));
        states
    }
}

/// Which side gets measured first in a generated pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderPolicy {
    PFirst,
    PPrimeFirst,
    /// Fair coin per pair, drawn from a dedicated order stream so the
    /// choice cannot correlate with outcome draws.
    Random,
}

/// Generates one pair measured along `(axis_p, axis_pp)`, `first` side
/// first. Consumes exactly two draws from `stream`.
pub fn generate_singlet(
    pair_index: u64,
    axis_p: Axis,
    axis_pp: Axis,
    first: Side,
    stream: &mut RngStream,
) -> SingletPair {
    let first_axis = match first {
        Side::P => axis_p,
        Side::PPrime => axis_pp,
    };
    let first_outcome = stream.coin();
    let collapsed = first_axis.reversed().oriented(first_outcome);
    let second_axis = match first {
        Side::P => axis_pp,
        Side::PPrime => axis_p,
    };
    let second_outcome = stream.outcome_with_prob(transition_prob_plus(collapsed, second_axis));
    let (outcome_p, outcome_pp, time_p, time_pp) = match first {
        Side::P => (
            first_outcome,
            second_outcome,
            LogicalTime::first_measure(PAIR_FIRST_TICK),
            LogicalTime::first_measure(PAIR_SECOND_TICK),
        ),
        Side::PPrime => (
            second_outcome,
            first_outcome,
            LogicalTime::first_measure(PAIR_SECOND_TICK),
            LogicalTime::first_measure(PAIR_FIRST_TICK),
        ),
    };
    SingletPair {
        pair_index,
        axis_p,
        axis_pp,
        outcome_p,
        outcome_pp,
        time_p,
        time_pp,
        first_measured: first,
        created: LogicalTime::creation(PAIR_CREATED_TICK),
    }
}

/// Reference sampler: draws `(outcome_p, outcome_pp)` directly from the
/// closed-form joint law `P(s, s') = (1 - s*s'*dot(a, a')) / 4`. Used to
/// cross-check the sequential path; consumes one draw.
pub fn sample_joint_direct(axis_p: Axis, axis_pp: Axis, stream: &mut RngStream) -> (Outcome, Outcome) {
    let d = axis_dot(axis_p, axis_pp);
    let anti = (1.0 + d) / 4.0; // each unequal-sign cell
    let equal = (1.0 - d) / 4.0; // each equal-sign cell
    let u = stream.uniform();
    if u < equal {
        (Outcome::Plus, Outcome::Plus)
    } else if u < equal + anti {
        (Outcome::Plus, Outcome::Minus)
    } else if u < 2.0 * equal + anti {
        (Outcome::Minus, Outcome::Minus)
    } else {
        (Outcome::Minus, Outcome::Plus)
    }
}

/// A batch of pairs sharing settings and a stream namespace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBatchSpec {
    /// Stream namespace; distinct batches must use distinct values.
    pub batch: u32,
    /// Pair index of the first pair; indices are `base_index..base_index+n`.
    pub base_index: u64,
    pub n: u64,
    pub axis_p: Axis,
    pub axis_pp: Axis,
    pub order: OrderPolicy,
}

fn generate_chunk(spec: &PairBatchSpec, seed: u64, chunk: u64) -> Vec<SingletPair> {
    let (lo, hi) = chunk_bounds(spec.n, chunk);
    let mut outcome_stream = rng_stream(seed, stream_id(spec.batch, StreamKind::Outcome, chunk));
    let mut order_stream = match spec.order {
        OrderPolicy::Random => {
            Some(rng_stream(seed, stream_id(spec.batch, StreamKind::Order, chunk)))
        }
        _ => None,
    };
    (lo..hi)
        .map(|offset| {
            let first = match spec.order {
                OrderPolicy::PFirst => Side::P,
                OrderPolicy::PPrimeFirst => Side::PPrime,
                OrderPolicy::Random => match order_stream.as_mut().unwrap().coin() {
                    Outcome::Plus => Side::P,
                    Outcome::Minus => Side::PPrime,
                },
            };
            generate_singlet(
                spec.base_index + offset,
                spec.axis_p,
                spec.axis_pp,
                first,
                &mut outcome_stream,
            )
        })
        .collect()
}

/// Generates the batch on the current thread. Identical output to
/// [`generate_singlet_batch`].
pub fn generate_singlet_batch_serial(spec: &PairBatchSpec, seed: u64) -> Vec<SingletPair> {
    collect_chunked(spec.n, false, |chunk| generate_chunk(spec, seed, chunk))
}

/// Generates the batch with chunk-level parallelism. Each chunk owns its
/// streams, so the result is bit-identical to the serial path regardless of
/// thread scheduling.
pub fn generate_singlet_batch(spec: &PairBatchSpec, seed: u64) -> Vec<SingletPair> {
    collect_chunked(spec.n, true, |chunk| generate_chunk(spec, seed, chunk))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CHUNK_LEN;
    use std::f64::consts::PI;

    fn stream() -> RngStream {
        rng_stream(0xC0FFEE, 0)
    }

    #[test]
    fn chain_requires_axes() {
        let mut s = stream();
        assert_eq!(measure_chain(None, &[], &mut s), Err(Error::EmptyAxes));
    }

    #[test]
    fn prepared_remeasurement_is_certain() {
        let a = Axis::new(0.9);
        let mut s = stream();
        for _ in 0..1000 {
            let chain = measure_chain(Some((a, Outcome::Plus)), &[a], &mut s).unwrap();
            assert_eq!(chain.outcomes[1], Outcome::Plus);
        }
    }

    #[test]
    fn prepared_reverse_measurement_is_certainly_opposite() {
        let a = Axis::new(0.9);
        let mut s = stream();
        for _ in 0..1000 {
            let chain = measure_chain(Some((a, Outcome::Plus)), &[a.reversed()], &mut s).unwrap();
            assert_eq!(chain.outcomes[1], Outcome::Minus);
        }
    }

    #[test]
    fn chain_times_strictly_increase() {
        let mut s = stream();
        let axes: Vec<Axis> = (0..5).map(|k| Axis::new(k as f64)).collect();
        let chain = measure_chain(Some((Axis::new(0.0), Outcome::Plus)), &axes, &mut s).unwrap();
        assert_eq!(chain.len(), 6);
        for w in chain.times.windows(2) {
            assert!(w[0].tick < w[1].tick);
        }
        let unprepared = measure_chain(None, &axes, &mut s).unwrap();
        assert_eq!(unprepared.len(), 5);
    }

    /// Independent oracle for the two-step law: enumerate the four outcome
    /// paths of the middle and final measurement with their transition
    /// probabilities and sum `s0 * s2` against them.
    fn two_step_by_path_enumeration(a0: Axis, a1: Axis, a2: Axis) -> f64 {
        let mut expectation = 0.0;
        for s1 in [1.0, -1.0] {
            let p1 = (1.0 + s1 * axis_dot(a0, a1)) / 2.0;
            for s2 in [1.0, -1.0] {
                let p2 = (1.0 + s1 * s2 * axis_dot(a1, a2)) / 2.0;
                expectation += p1 * p2 * s2; // s0 fixed to +1
            }
        }
        expectation
    }

    #[test]
    fn two_step_closed_form_matches_path_enumeration() {
        let cases = [
            (0.0, PI / 2.0, 0.0),
            (0.0, PI / 4.0, 0.0),
            (0.0, PI / 3.0, PI / 6.0),
            (0.3, 1.1, 2.9),
            (5.0, 0.2, 4.4),
        ];
        for (x, y, z) in cases {
            let (a0, a1, a2) = (Axis::new(x), Axis::new(y), Axis::new(z));
            let closed = chain_two_step_correlation(a0, a1, a2);
            let enumerated = two_step_by_path_enumeration(a0, a1, a2);
            assert!(
                (closed - enumerated).abs() < 1e-12,
                "closed {closed} vs enumerated {enumerated}"
            );
        }
    }

    #[test]
    fn two_step_empirical_matches_closed_form() {
        let mut s = stream();
        let (a0, a1, a2) = (Axis::new(0.0), Axis::new(PI / 3.0), Axis::new(PI / 6.0));
        let n = 200_000;
        let mut sum = 0i64;
        for _ in 0..n {
            let chain = measure_chain(Some((a0, Outcome::Plus)), &[a1, a2], &mut s).unwrap();
            sum += i64::from(chain.product(0, 2));
        }
        let mean = sum as f64 / n as f64;
        let expected = chain_two_step_correlation(a0, a1, a2);
        assert!((mean - expected).abs() < 3.0 / (n as f64).sqrt() + 1e-9, "mean {mean}");
    }

    #[test]
    fn erasure_washes_out_preparation() {
        let mut s = stream();
        let n = 200_000;
        let orthogonal = erase_check(Axis::new(0.0), Axis::new(PI / 2.0), Axis::new(0.0), n, &mut s);
        assert!(orthogonal.abs() < 3.0 / (n as f64).sqrt(), "got {orthogonal}");
        let diagonal = erase_check(Axis::new(0.0), Axis::new(PI / 4.0), Axis::new(0.0), n, &mut s);
        assert!((diagonal - 0.5).abs() < 3.0 / (n as f64).sqrt(), "got {diagonal}");
    }

    #[test]
    fn erase_control_is_exact() {
        let mut s = stream();
        let a = Axis::new(1.3);
        assert_eq!(erase_check(a, a, a, 10_000, &mut s), 1.0);
        let theta = PI / 3.0;
        let probe = Axis::new(1.3 + theta);
        let control = erase_check(a, a, probe, 200_000, &mut s);
        assert!((control - theta.cos()).abs() < 3.0 / 200_000f64.sqrt());
    }

    #[test]
    fn equal_axes_anticorrelate_exactly() {
        let a = Axis::new(2.2);
        let mut s = stream();
        for i in 0..100_000 {
            let pair = generate_singlet(i, a, a, Side::P, &mut s);
            assert_eq!(pair.product(), -1);
        }
    }

    #[test]
    fn reversed_axes_correlate_exactly() {
        let a = Axis::new(0.8);
        let mut s = stream();
        for i in 0..10_000 {
            let pair = generate_singlet(i, a, a.reversed(), Side::PPrime, &mut s);
            assert_eq!(pair.product(), 1);
        }
    }

    #[test]
    fn pair_correlation_matches_negative_dot() {
        let mut s = stream();
        let n = 500_000u64;
        for theta in [PI / 6.0, PI / 4.0, PI / 2.0, 2.0 * PI / 3.0] {
            let (a, b) = (Axis::new(0.0), Axis::new(theta));
            let mut sum = 0i64;
            for i in 0..n {
                sum += i64::from(generate_singlet(i, a, b, Side::P, &mut s).product());
            }
            let mean = sum as f64 / n as f64;
            let expected = -axis_dot(a, b);
            assert!(
                (mean - expected).abs() < 3.0 / (n as f64).sqrt(),
                "theta {theta}: mean {mean} expected {expected}"
            );
        }
    }

    #[test]
    fn joint_cells_match_closed_form() {
        let mut s = stream();
        let n = 400_000u64;
        let (a, b) = (Axis::new(0.2), Axis::new(0.2 + PI / 3.0));
        let d = axis_dot(a, b);
        let mut counts = [[0u64; 2]; 2];
        for i in 0..n {
            let pair = generate_singlet(i, a, b, Side::P, &mut s);
            let r = usize::from(pair.outcome_p == Outcome::Minus);
            let c = usize::from(pair.outcome_pp == Outcome::Minus);
            counts[r][c] += 1;
        }
        for (r, sp) in [1.0, -1.0].into_iter().enumerate() {
            for (c, spp) in [1.0, -1.0].into_iter().enumerate() {
                let p = (1.0 - sp * spp * d) / 4.0;
                let freq = counts[r][c] as f64 / n as f64;
                let sigma = (p * (1.0 - p) / n as f64).sqrt();
                assert!(
                    (freq - p).abs() < 3.0 * sigma + 1e-9,
                    "cell ({sp},{spp}): freq {freq} expected {p}"
                );
            }
        }
    }

    #[test]
    fn marginals_are_fair_coins() {
        let mut s = stream();
        let n = 400_000u64;
        let (a, b) = (Axis::new(0.0), Axis::new(1.0));
        let mut plus_p = 0u64;
        let mut plus_pp = 0u64;
        for i in 0..n {
            let pair = generate_singlet(i, a, b, Side::PPrime, &mut s);
            plus_p += u64::from(pair.outcome_p == Outcome::Plus);
            plus_pp += u64::from(pair.outcome_pp == Outcome::Plus);
        }
        let tol = 3.0 * 0.5 / (n as f64).sqrt();
        assert!((plus_p as f64 / n as f64 - 0.5).abs() < tol);
        assert!((plus_pp as f64 / n as f64 - 0.5).abs() < tol);
    }

    #[test]
    fn sequential_and_direct_samplers_agree() {
        // Dual route: the sequential collapse path and the closed-form joint
        // sampler must produce the same correlation within Monte Carlo noise.
        let n = 400_000u64;
        let (a, b) = (Axis::new(0.5), Axis::new(0.5 + PI / 4.0));
        let mut s1 = rng_stream(11, 1);
        let mut s2 = rng_stream(11, 2);
        let mut sum_seq = 0i64;
        let mut sum_direct = 0i64;
        for i in 0..n {
            sum_seq += i64::from(generate_singlet(i, a, b, Side::P, &mut s1).product());
            let (x, y) = sample_joint_direct(a, b, &mut s2);
            sum_direct += i64::from(x.product(y));
        }
        let diff = (sum_seq - sum_direct).abs() as f64 / n as f64;
        assert!(diff < 6.0 / (n as f64).sqrt(), "diff {diff}");
    }

    #[test]
    fn pair_times_are_ordered() {
        let mut s = stream();
        for i in 0..100 {
            let side = if i % 2 == 0 { Side::P } else { Side::PPrime };
            let pair = generate_singlet(i, Axis::new(0.1), Axis::new(2.0), side, &mut s);
            assert!(pair.times().is_ordered());
            assert_eq!(pair.time(side).tick, PAIR_FIRST_TICK);
            assert_eq!(pair.time(side.other()).tick, PAIR_SECOND_TICK);
        }
    }

    #[test]
    fn preparation_histories_are_consistent() {
        let mut s = stream();
        for i in 0..500 {
            let pair = generate_singlet(i, Axis::new(0.3), Axis::new(1.9), Side::PPrime, &mut s);
            for side in [Side::P, Side::PPrime] {
                let hist = pair.preparation_history(side);
                for w in hist.windows(2) {
                    assert!(w[0].valid_from.tick <= w[1].valid_from.tick);
                    assert_eq!(w[0].valid_until.tick, w[1].valid_from.tick);
                }
                for (i, a) in hist.iter().enumerate() {
                    for b in &hist[i + 1..] {
                        assert!(!a.conflicts_with(b), "{a:?} vs {b:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn second_side_history_records_partner_collapse() {
        let mut s = stream();
        let (a, b) = (Axis::new(0.0), Axis::new(1.0));
        let pair = generate_singlet(3, a, b, Side::P, &mut s);
        let hist = pair.preparation_history(Side::PPrime);
        assert_eq!(hist.len(), 3);
        let collapse = hist[1];
        assert_eq!(collapse.origin, crate::prep::PrepOrigin::PartnerCollapse);
        let expected = a.reversed().oriented(pair.outcome_p);
        assert!(collapse.prepared_axis.unwrap().approx_eq(expected));
    }

    #[test]
    fn batch_parallel_equals_serial() {
        let spec = PairBatchSpec {
            batch: 2,
            base_index: 100,
            n: 3 * CHUNK_LEN + 17,
            axis_p: Axis::new(0.0),
            axis_pp: Axis::new(PI / 4.0),
            order: OrderPolicy::Random,
        };
        let parallel = generate_singlet_batch(&spec, 99);
        let serial = generate_singlet_batch_serial(&spec, 99);
        assert_eq!(parallel.len(), spec.n as usize);
        assert_eq!(parallel, serial);
        assert_eq!(parallel[0].pair_index, 100);
        assert_eq!(parallel.last().unwrap().pair_index, 100 + spec.n - 1);
    }

    #[test]
    fn batch_replays_identically() {
        let spec = PairBatchSpec {
            batch: 0,
            base_index: 0,
            n: 10_000,
            axis_p: Axis::new(1.0),
            axis_pp: Axis::new(2.0),
            order: OrderPolicy::Random,
        };
        assert_eq!(generate_singlet_batch(&spec, 7), generate_singlet_batch(&spec, 7));
        assert_ne!(generate_singlet_batch(&spec, 7), generate_singlet_batch(&spec, 8));
    }

    #[test]
    fn order_policy_controls_first_side() {
        let spec = PairBatchSpec {
            batch: 1,
            base_index: 0,
            n: 1000,
            axis_p: Axis::new(0.0),
            axis_pp: Axis::new(1.0),
            order: OrderPolicy::PPrimeFirst,
        };
        for pair in generate_singlet_batch(&spec, 5) {
            assert_eq!(pair.first_measured, Side::PPrime);
        }
        let random = PairBatchSpec { order: OrderPolicy::Random, ..spec };
        let firsts: Vec<Side> =
            generate_singlet_batch(&random, 5).iter().map(|p| p.first_measured).collect();
        assert!(firsts.contains(&Side::P) && firsts.contains(&Side::PPrime));
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn conservation_holds_for_any_axis_and_seed(
                angle in -10.0f64..10.0,
                seed in 0u64..1000,
                p_first in proptest::bool::ANY,
            ) {
                let a = Axis::new(angle);
                let side = if p_first { Side::P } else { Side::PPrime };
                let mut s = rng_stream(seed, 0);
                let pair = generate_singlet(0, a, a, side, &mut s);
                prop_assert_eq!(pair.product(), -1);
            }

            #[test]
            fn generated_times_always_ordered(
                x in -10.0f64..10.0,
                y in -10.0f64..10.0,
                seed in 0u64..500,
            ) {
                let mut s = rng_stream(seed, 1);
                let pair = generate_singlet(9, Axis::new(x), Axis::new(y), Side::P, &mut s);
                prop_assert!(pair.times().is_ordered());
            }

            #[test]
            fn histories_never_conflict(
                x in -10.0f64..10.0,
                y in -10.0f64..10.0,
                seed in 0u64..500,
                p_first in proptest::bool::ANY,
            ) {
                let side = if p_first { Side::P } else { Side::PPrime };
                let mut s = rng_stream(seed, 2);
                let pair = generate_singlet(0, Axis::new(x), Axis::new(y), side, &mut s);
                for sd in [Side::P, Side::PPrime] {
                    let hist = pair.preparation_history(sd);
                    for (i, a) in hist.iter().enumerate() {
                        for b in &hist[i + 1..] {
                            prop_assert!(!a.conflicts_with(b));
                        }
                    }
                }
            }

            #[test]
            fn chain_histories_never_conflict(
                angles in prop::collection::vec(-7.0f64..7.0, 1..6),
                seed in 0u64..300,
                prepared in proptest::bool::ANY,
            ) {
                let axes: Vec<Axis> = angles.iter().map(|&a| Axis::new(a)).collect();
                let prep = prepared.then(|| (Axis::new(0.5), Outcome::Plus));
                let mut s = rng_stream(seed, 3);
                let chain = measure_chain(prep, &axes, &mut s).unwrap();
                let hist = chain.preparation_history();
                for (i, a) in hist.iter().enumerate() {
                    for b in &hist[i + 1..] {
                        prop_assert!(!a.conflicts_with(b));
                    }
                }
            }
        }
    }
}
