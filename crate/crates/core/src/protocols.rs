//! The sampling protocols: abstaining consensus sampling, reliable
//! consensus sampling with the trace phase, and the local-coin hybrid.
//!
//! All three share one accept loop. Each round consumes exactly three
//! `f64` variates in fixed order — model pick, inverse-CDF draw,
//! acceptance — so runs with the same seed are bit-reproducible and the
//! round prefix is identical across protocols.

use std::cmp::Ordering;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::group::{ModelGroup, SigmaStats};
use crate::scalar::{sum, Scalar};

/// Which path delivered the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Accept,
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunResult {
    Delivered {
        y: usize,
        origin: usize,
        phase: Phase,
        rounds_used: usize,
    },
    Abstain {
        rounds_used: usize,
    },
}

/// Final protocol result plus its cost in abstract latency units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub result: RunResult,
    pub latency_units: f64,
}

impl Outcome {
    pub fn is_abstain(&self) -> bool {
        matches!(self.result, RunResult::Abstain { .. })
    }

    pub fn delivered(&self) -> Option<(usize, usize, Phase)> {
        match self.result {
            RunResult::Delivered {
                y, origin, phase, ..
            } => Some((y, origin, phase)),
            RunResult::Abstain { .. } => None,
        }
    }

    pub fn rounds_used(&self) -> usize {
        match self.result {
            RunResult::Delivered { rounds_used, .. } | RunResult::Abstain { rounds_used } => {
                rounds_used
            }
        }
    }
}

/// One rejected candidate: the response, its acceptance ratio, the sorted
/// per-model probabilities it was computed from, and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferEntry<T> {
    pub y: usize,
    pub sigma_val: T,
    pub stats: Vec<T>,
    pub origin: usize,
    pub round: usize,
}

/// Abstract cost model: each sampling round costs `round_cost` (the unit
/// `I`), and a trace computation adds `trace_coeff * n^2 * log2(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyModel {
    pub round_cost: f64,
    pub trace_coeff: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            round_cost: 1.0,
            trace_coeff: 1e-6,
        }
    }
}

impl LatencyModel {
    pub fn rounds(&self, rounds_used: usize) -> f64 {
        self.round_cost * rounds_used as f64
    }

    pub fn trace_surcharge(&self, n: usize) -> f64 {
        self.trace_coeff * (n * n) as f64 * (n as f64).log2()
    }
}

/// Runs the shared accept loop. Returns the accepted draw or `None` after
/// `rounds` rejections; rejected rounds are pushed into `buffer` when one
/// is supplied.
fn accept_loop<T: Scalar, R: Rng + ?Sized>(
    group: &ModelGroup<T>,
    rounds: usize,
    mut buffer: Option<&mut Vec<BufferEntry<T>>>,
    rng: &mut R,
) -> Option<(usize, usize, usize)> {
    assert!(rounds >= 1, "at least one round required");
    for round in 1..=rounds {
        let draw = group.mixture_draw(rng);
        let SigmaStats { value, sorted } = group
            .sigma_at(draw.y)
            .expect("a drawn response has positive mixture mass");
        let u: f64 = rng.gen();
        if T::from_float(u) < value {
            return Some((draw.y, draw.origin, round));
        }
        if let Some(buf) = buffer.as_deref_mut() {
            buf.push(BufferEntry {
                y: draw.y,
                sigma_val: value,
                stats: sorted,
                origin: draw.origin,
                round,
            });
        }
    }
    None
}

/// Consensus sampling baseline: accept within `rounds` attempts or abstain.
pub fn run_cs<T: Scalar, R: Rng + ?Sized>(
    group: &ModelGroup<T>,
    rounds: usize,
    latency: &LatencyModel,
    rng: &mut R,
) -> Outcome {
    match accept_loop(group, rounds, None, rng) {
        Some((y, origin, round)) => Outcome {
            result: RunResult::Delivered {
                y,
                origin,
                phase: Phase::Accept,
                rounds_used: round,
            },
            latency_units: latency.rounds(round),
        },
        None => Outcome {
            result: RunResult::Abstain {
                rounds_used: rounds,
            },
            latency_units: latency.rounds(rounds),
        },
    }
}

/// Reliable consensus sampling: same accept loop, but every rejected
/// candidate is buffered and after `rounds` rejections the trace phase
/// delivers one of them. Never abstains.
pub fn run_rcs<T: Scalar, R: Rng + ?Sized>(
    group: &ModelGroup<T>,
    rounds: usize,
    latency: &LatencyModel,
    rng: &mut R,
) -> Outcome {
    let mut buffer = Vec::with_capacity(rounds);
    match accept_loop(group, rounds, Some(&mut buffer), rng) {
        Some((y, origin, round)) => Outcome {
            result: RunResult::Delivered {
                y,
                origin,
                phase: Phase::Accept,
                rounds_used: round,
            },
            latency_units: latency.rounds(round),
        },
        None => {
            let winner = trace_select(&buffer, group, rounds).expect("buffer holds R entries");
            Outcome {
                result: RunResult::Delivered {
                    y: winner.y,
                    origin: winner.origin,
                    phase: Phase::Trace,
                    rounds_used: rounds,
                },
                latency_units: latency.rounds(rounds) + latency.trace_surcharge(group.n()),
            }
        }
    }
}

/// Local-coin hybrid: identical to [`run_rcs`] through the accept loop; on
/// full rejection an unbiased coin (one more variate, `u < 0.5` meaning 0)
/// picks between abstention and the trace phase.
pub fn run_rcs_coin<T: Scalar, R: Rng + ?Sized>(
    group: &ModelGroup<T>,
    rounds: usize,
    latency: &LatencyModel,
    rng: &mut R,
) -> Outcome {
    let mut buffer = Vec::with_capacity(rounds);
    match accept_loop(group, rounds, Some(&mut buffer), rng) {
        Some((y, origin, round)) => Outcome {
            result: RunResult::Delivered {
                y,
                origin,
                phase: Phase::Accept,
                rounds_used: round,
            },
            latency_units: latency.rounds(round),
        },
        None => {
            let coin: f64 = rng.gen();
            if coin < 0.5 {
                Outcome {
                    result: RunResult::Abstain {
                        rounds_used: rounds,
                    },
                    latency_units: latency.rounds(rounds),
                }
            } else {
                let winner =
                    trace_select(&buffer, group, rounds).expect("buffer holds R entries");
                Outcome {
                    result: RunResult::Delivered {
                        y: winner.y,
                        origin: winner.origin,
                        phase: Phase::Trace,
                        rounds_used: rounds,
                    },
                    latency_units: latency.rounds(rounds) + latency.trace_surcharge(group.n()),
                }
            }
        }
    }
}

/// Trace-phase selection over a full buffer of `rounds` rejected entries.
///
/// Ranks entries by acceptance ratio descending (ties: earlier round, then
/// lower response index), keeps the top `min(s, rounds)` as the shortlist,
/// and returns the shortlisted entry with the largest `alpha(y)` — the sum
/// of the largest `n - s` per-model probabilities, read from the cached
/// stats. Alpha ties fall back to higher sigma, earlier round, lower index.
pub fn trace_select<'a, T: Scalar>(
    buffer: &'a [BufferEntry<T>],
    group: &ModelGroup<T>,
    rounds: usize,
) -> Result<&'a BufferEntry<T>> {
    if buffer.is_empty() {
        return Err(CoreError::EmptyBuffer);
    }
    debug_assert_eq!(buffer.len(), rounds, "trace phase expects a full buffer");
    let s = group.s_declared();

    let mut order: Vec<usize> = (0..buffer.len()).collect();
    order.sort_by(|&a, &b| rank_cmp(&buffer[a], &buffer[b]));
    let shortlist = &order[..s.min(rounds).min(buffer.len())];

    let alpha = |e: &BufferEntry<T>| -> T {
        if s >= e.stats.len() {
            T::zero()
        } else {
            sum(&e.stats[s..])
        }
    };

    let mut best = shortlist[0];
    let mut best_alpha = alpha(&buffer[best]);
    for &idx in &shortlist[1..] {
        let a = alpha(&buffer[idx]);
        let better = match a.partial_cmp(&best_alpha).expect("alphas comparable") {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => rank_cmp(&buffer[idx], &buffer[best]) == Ordering::Less,
        };
        if better {
            best = idx;
            best_alpha = a;
        }
    }
    Ok(&buffer[best])
}

/// Total order used for the sigma ranking: higher sigma first, then earlier
/// round, then lower response index.
fn rank_cmp<T: Scalar>(a: &BufferEntry<T>, b: &BufferEntry<T>) -> Ordering {
    b.sigma_val
        .partial_cmp(&a.sigma_val)
        .expect("sigmas comparable")
        .then(a.round.cmp(&b.round))
        .then(a.y.cmp(&b.y))
}
