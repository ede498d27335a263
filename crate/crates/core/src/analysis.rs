//! Closed-form diagnostics: the risk-bound quantities, the anti-collusion
//! ratio, an exact enumeration oracle for small instances, and Monte Carlo
//! estimators that check theory against simulation.

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::group::{LabeledGroup, ModelGroup};
use crate::protocols::{run_rcs, trace_select, BufferEntry, LatencyModel, Phase};
use crate::scalar::{sum, Scalar};

/// Enumeration caps for [`exhaustive_q`]; beyond them the oracle refuses.
pub const EXHAUSTIVE_MAX_SPACE: usize = 8;
pub const EXHAUSTIVE_MAX_ROUNDS: usize = 8;

/// Risk quantities for one group at a given round budget.
///
/// `mu_u` averages unsafe mass over the truth-safe models; `mu_u_order_stat`
/// is the declared-s order-statistic form `(1/s) sum_{i<=s} p_(i)(U)` from
/// the bound derivation. The two differ when the declared `s` does not match
/// the true safe count, which is why both are reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskReport {
    pub z: f64,
    /// (1 - Z)^R, the trace-phase probability.
    pub pr_trace: f64,
    pub mu_u: f64,
    pub mu_u_order_stat: f64,
    /// Empirical unsafe rate among trace-phase deliveries (0 when no trial
    /// traced).
    pub rho_u_hat: f64,
    /// Empirical overall unsafe-delivery rate.
    pub q_u_hat: f64,
    /// R * mu_u + pr_trace * rho_u_hat.
    pub bound: f64,
    /// n * mu_u + pr_trace.
    pub n_bound: f64,
}

/// Acceptance-ratio difference between two responses along with the ratio
/// whose position relative to 1 determines its sign. `dtv` is `None` when
/// its denominator vanishes (the ratio is unbounded).
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSigma<T> {
    pub delta: T,
    pub dtv: Option<T>,
}

/// `sigma(y_t) - sigma(y_v)` and the product ratio
/// `[sum_{i<=s} p_(i)(y_t) * sum_{i>s} p_(i)(y_v)] /
///  [sum_{i<=s} p_(i)(y_v) * sum_{i>s} p_(i)(y_t)]`.
pub fn delta_sigma<T: Scalar>(
    group: &ModelGroup<T>,
    y_t: usize,
    y_v: usize,
) -> Result<DeltaSigma<T>> {
    let st = group.sigma_at(y_t)?;
    let sv = group.sigma_at(y_v)?;
    let s = group.s_declared();
    let low_t = sum(&st.sorted[..s]);
    let high_t = sum(&st.sorted[s..]);
    let low_v = sum(&sv.sorted[..s]);
    let high_v = sum(&sv.sorted[s..]);
    let delta = st.value - sv.value;
    let den = low_v * high_t;
    let dtv = if den == T::zero() {
        None
    } else {
        Some(low_t * high_v / den)
    };
    Ok(DeltaSigma { delta, dtv })
}

/// Truth-label risk: mean unsafe mass over the truly safe models. Zero when
/// the group has no safe models.
pub fn mu_unsafe_truth<T: Scalar>(labeled: &LabeledGroup<T>) -> T {
    let safe: Vec<&crate::dist::FiniteDistribution<T>> = labeled
        .group
        .models()
        .iter()
        .zip(&labeled.labels)
        .filter(|(_, l)| **l == crate::group::ModelLabel::Safe)
        .map(|(m, _)| m)
        .collect();
    if safe.is_empty() {
        return T::zero();
    }
    let total = safe
        .iter()
        .fold(T::zero(), |acc, m| acc + m.unsafe_mass(labeled.group.space()));
    total / T::from_count(safe.len())
}

/// Order-statistic risk: mean of the `s` smallest per-model cumulative
/// unsafe masses, the quantity the bound derivation actually controls.
pub fn mu_unsafe_order_stat<T: Scalar>(group: &ModelGroup<T>) -> T {
    let mut masses: Vec<T> = group
        .models()
        .iter()
        .map(|m| m.unsafe_mass(group.space()))
        .collect();
    masses.sort_by(|a, b| a.partial_cmp(b).expect("masses comparable"));
    let s = group.s_declared();
    sum(&masses[..s]) / T::from_count(s)
}

/// Exact probability that a reliable-consensus-sampling run delivers an
/// unsafe response, by enumerating every accept trajectory and every
/// rejected-draw sequence feeding the trace phase.
///
/// Only feasible for small instances; errors with `TooLarge` beyond
/// `|Y| <= 8, R <= 8`. Run it on rational scalars for exact arithmetic.
pub fn exhaustive_q<T: Scalar>(group: &ModelGroup<T>, rounds: usize) -> Result<T> {
    let size = group.space().size();
    if size > EXHAUSTIVE_MAX_SPACE || rounds > EXHAUSTIVE_MAX_ROUNDS {
        return Err(CoreError::TooLarge {
            max_space: EXHAUSTIVE_MAX_SPACE,
            max_rounds: EXHAUSTIVE_MAX_ROUNDS,
        });
    }
    if rounds == 0 {
        return Err(CoreError::InvalidArgument("rounds must be >= 1".into()));
    }

    let n = T::from_count(group.n());
    let s = T::from_count(group.s_declared());

    // Per response: joint accept probability w(y) = m(y) * sigma(y)
    // = (1/s) sum_{i<=s} p_(i)(y), joint rejection probability
    // rej(y) = m(y) - w(y), and the buffered entry it would produce.
    struct Candidate<T> {
        y: usize,
        w: T,
        rej: T,
        sigma: T,
        stats: Vec<T>,
    }
    let mut candidates: Vec<Candidate<T>> = Vec::with_capacity(size);
    for y in 0..size {
        let sorted = group.order_stats_at(y)?;
        let total = sum(&sorted);
        if total == T::zero() {
            continue; // never drawn
        }
        let m = total.clone() / n.clone();
        let w = sum(&sorted[..group.s_declared()]) / s.clone();
        let sigma = w.clone() / m.clone();
        candidates.push(Candidate {
            y,
            rej: m - w.clone(),
            w,
            sigma,
            stats: sorted,
        });
    }

    let z = candidates
        .iter()
        .fold(T::zero(), |acc, c| acc + c.w.clone());
    let w_unsafe = candidates
        .iter()
        .filter(|c| group.space().is_unsafe(c.y))
        .fold(T::zero(), |acc, c| acc + c.w.clone());

    // Accept path: sum over rounds of (1-Z)^(r-1) * w(U).
    let one_minus_z = T::one() - z;
    let mut geo = T::zero();
    let mut pow = T::one();
    for _ in 0..rounds {
        geo = geo + pow.clone();
        pow = pow * one_minus_z.clone();
    }
    let mut q = w_unsafe * geo;

    // Trace path: enumerate ordered sequences of rejected draws.
    let rejectable: Vec<&Candidate<T>> =
        candidates.iter().filter(|c| c.rej > T::zero()).collect();
    let mut buffer: Vec<BufferEntry<T>> = Vec::with_capacity(rounds);
    fn recurse<T: Scalar>(
        group: &ModelGroup<T>,
        rejectable: &[&Candidate<T>],
        rounds: usize,
        buffer: &mut Vec<BufferEntry<T>>,
        prob: T,
        acc: &mut T,
    ) {
        if buffer.len() == rounds {
            let winner = trace_select(buffer, group, rounds).expect("buffer is full");
            if group.space().is_unsafe(winner.y) {
                *acc = acc.clone() + prob;
            }
            return;
        }
        let round = buffer.len() + 1;
        for c in rejectable {
            buffer.push(BufferEntry {
                y: c.y,
                sigma_val: c.sigma.clone(),
                stats: c.stats.clone(),
                origin: 0, // provenance does not affect trace selection
                round,
            });
            recurse(
                group,
                rejectable,
                rounds,
                buffer,
                prob.clone() * c.rej.clone(),
                acc,
            );
            buffer.pop();
        }
    }
    if !rejectable.is_empty() {
        let mut trace_unsafe = T::zero();
        recurse(
            group,
            &rejectable,
            rounds,
            &mut buffer,
            T::one(),
            &mut trace_unsafe,
        );
        q = q + trace_unsafe;
    }
    Ok(q)
}

/// Assembles a [`RiskReport`]: analytic overlap and trace probability,
/// truth-label and order-statistic risk, and Monte Carlo estimates of the
/// overall and trace-phase unsafe rates from `trials` protocol runs.
pub fn risk_bound_report<R: Rng + ?Sized>(
    labeled: &LabeledGroup<f64>,
    rounds: usize,
    trials: usize,
    rng: &mut R,
) -> RiskReport {
    let group = &labeled.group;
    let z: f64 = group.overlap_z();
    let pr_trace = (1.0 - z).powi(rounds as i32);
    let mu_u = mu_unsafe_truth(labeled);
    let mu_os = mu_unsafe_order_stat(group);

    let latency = LatencyModel::default();
    let mut unsafe_total = 0usize;
    let mut traced = 0usize;
    let mut traced_unsafe = 0usize;
    for _ in 0..trials {
        let outcome = run_rcs(group, rounds, &latency, rng);
        let (y, _, phase) = outcome.delivered().expect("rcs always delivers");
        let is_unsafe = group.space().is_unsafe(y);
        if is_unsafe {
            unsafe_total += 1;
        }
        if phase == Phase::Trace {
            traced += 1;
            if is_unsafe {
                traced_unsafe += 1;
            }
        }
    }
    let q_u_hat = unsafe_total as f64 / trials as f64;
    let rho_u_hat = if traced > 0 {
        traced_unsafe as f64 / traced as f64
    } else {
        0.0
    };
    RiskReport {
        z,
        pr_trace,
        mu_u,
        mu_u_order_stat: mu_os,
        rho_u_hat,
        q_u_hat,
        bound: rounds as f64 * mu_u + pr_trace * rho_u_hat,
        n_bound: group.n() as f64 * mu_u + pr_trace,
    }
}
