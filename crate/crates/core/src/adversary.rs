//! Synthesis of model groups under the three adversarial regimes.
//!
//! Safe models are jittered copies of seed distributions subject to a floor
//! on their safe-set mass. Byzantine models either shift mass toward the
//! unsafe set independently (general perturbation, also used at
//! half-resilience) or coordinate on a single unsafe target (collusion).

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dist::FiniteDistribution;
use crate::error::{CoreError, Result};
use crate::group::{LabeledGroup, ModelGroup, ModelLabel};
use crate::scalar::Scalar;
use crate::space::OutputSpace;

/// Recipe for safe models: seed distributions cycled across the group, a
/// per-model perturbation budget in total-variation distance, and the
/// minimum mass each generated model must keep on the safe set.
#[derive(Debug, Clone)]
pub struct SafeModelSpec<T> {
    pub base_dists: Vec<FiniteDistribution<T>>,
    pub psi_floor: f64,
    pub jitter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    General,
    Collusion,
    HalfResilience,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::General => "general",
            Regime::Collusion => "collusion",
            Regime::HalfResilience => "half_resilience",
        }
    }
}

/// One grid point of the experiment: the adversary regime, the security
/// parameter and everything derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub regime: Regime,
    pub lambda: u64,
    /// R = lambda + 1.
    pub rounds: usize,
    pub n: usize,
    /// ceil((n+1)/2), the protocol's belief, fixed regardless of `f_actual`.
    pub s_declared: usize,
    pub f_actual: usize,
    pub collusion_strength: f64,
    pub seed: u64,
    pub trials: usize,
}

impl ScenarioConfig {
    /// Derives a config from a `(regime, lambda, n)` grid point using the
    /// standard parameterization: `R = lambda + 1`, `s = ceil((n+1)/2)`,
    /// and `f` at its regime default (`n - s` in general/collusion,
    /// `ceil(n/2)` at half-resilience).
    pub fn from_grid_point(
        regime: Regime,
        lambda: u64,
        n: usize,
        collusion_strength: f64,
        seed: u64,
        trials: usize,
    ) -> Result<Self> {
        let s_declared = (n + 1).div_ceil(2);
        let f_actual = match regime {
            Regime::General | Regime::Collusion => n - s_declared,
            Regime::HalfResilience => n.div_ceil(2),
        };
        let cfg = Self {
            regime,
            lambda,
            rounds: lambda as usize + 1,
            n,
            s_declared,
            f_actual,
            collusion_strength,
            seed,
            trials,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_power_of_two() {
            return Err(CoreError::InvalidArgument(format!(
                "lambda must be a power of two, got {}",
                self.lambda
            )));
        }
        if self.rounds != self.lambda as usize + 1 {
            return Err(CoreError::InvalidArgument(
                "rounds must equal lambda + 1".into(),
            ));
        }
        if self.s_declared != (self.n + 1).div_ceil(2) {
            return Err(CoreError::InvalidArgument(
                "s_declared must equal ceil((n+1)/2)".into(),
            ));
        }
        if self.f_actual >= self.n {
            return Err(CoreError::InvalidArgument(
                "at least one model must be safe".into(),
            ));
        }
        let half = self.n.div_ceil(2);
        match self.regime {
            Regime::General | Regime::Collusion => {
                if self.f_actual >= half {
                    return Err(CoreError::InvalidArgument(format!(
                        "regime requires f < ceil(n/2), got f={} n={}",
                        self.f_actual, self.n
                    )));
                }
            }
            Regime::HalfResilience => {
                if self.f_actual != half {
                    return Err(CoreError::InvalidArgument(format!(
                        "half-resilience requires f = ceil(n/2), got f={} n={}",
                        self.f_actual, self.n
                    )));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.collusion_strength) {
            return Err(CoreError::InvalidArgument(
                "collusion strength must lie in [0,1]".into(),
            ));
        }
        Ok(())
    }
}

/// Generates `count` safe models: model `i` perturbs `base_dists[i % k]`
/// within the jitter budget (total-variation distance) while keeping at
/// least `psi_floor` mass on the safe set.
pub fn gen_safe_models<T: Scalar, R: Rng + ?Sized>(
    spec: &SafeModelSpec<T>,
    space: &OutputSpace,
    count: usize,
    rng: &mut R,
) -> Result<Vec<FiniteDistribution<T>>> {
    if spec.base_dists.is_empty() {
        return Err(CoreError::InvalidArgument("no base distributions".into()));
    }
    if !(0.0..=1.0).contains(&spec.psi_floor) || spec.psi_floor <= 0.0 {
        return Err(CoreError::InvalidArgument(
            "psi floor must lie in (0,1]".into(),
        ));
    }
    if spec.jitter < 0.0 {
        return Err(CoreError::InvalidArgument("jitter must be >= 0".into()));
    }
    let psi = T::from_float(spec.psi_floor);
    let jit = T::from_float(spec.jitter);

    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let base = &spec.base_dists[i % spec.base_dists.len()];
        if base.len() != space.size() {
            return Err(CoreError::InvalidArgument(
                "base distribution does not match space".into(),
            ));
        }
        let base_safe = base
            .cumulative_mass(space.safe_iter())
            .expect("space indices valid");

        // Stage 1: repair the floor deterministically, spending TV budget
        // equal to the deficit.
        let deficit = if base_safe < psi {
            psi.clone() - base_safe.clone()
        } else {
            T::zero()
        };
        if deficit > jit {
            return Err(CoreError::InfeasibleFloor {
                floor: spec.psi_floor,
                base_mass: base_safe.as_f64(),
                jitter: spec.jitter,
            });
        }
        let repaired = if deficit > T::zero() {
            transfer_to_safe(base, space, &deficit)
        } else {
            base.clone()
        };
        let repaired_safe = repaired
            .cumulative_mass(space.safe_iter())
            .expect("space indices valid");

        // Stage 2: mix toward a random direction within the remaining
        // budget, capped so the floor still holds.
        let budget = jit.clone() - deficit;
        let noise = random_direction::<T, R>(space.size(), rng);
        let noise_safe = noise
            .cumulative_mass(space.safe_iter())
            .expect("space indices valid");
        let mut eps = T::from_float(rng.gen::<f64>()) * budget;
        if noise_safe < repaired_safe {
            let headroom = repaired_safe.clone() - psi.clone();
            let cap = headroom / (repaired_safe.clone() - noise_safe);
            if eps > cap {
                eps = cap;
            }
        }
        let mixed: Vec<T> = repaired
            .probs()
            .iter()
            .zip(noise.probs())
            .map(|(b, v)| {
                (T::one() - eps.clone()) * b.clone() + eps.clone() * v.clone()
            })
            .collect();
        out.push(FiniteDistribution::new(mixed)?.renormalized());
    }
    Ok(out)
}

/// Moves `amount` of mass from the unsafe part of `dist` onto its safe
/// part, each side scaled proportionally.
fn transfer_to_safe<T: Scalar>(
    dist: &FiniteDistribution<T>,
    space: &OutputSpace,
    amount: &T,
) -> FiniteDistribution<T> {
    let safe_mass = dist
        .cumulative_mass(space.safe_iter())
        .expect("space indices valid");
    let unsafe_mass = dist.unsafe_mass(space);
    let safe_count = space.size() - space.unsafe_set().len();
    let probs: Vec<T> = dist
        .probs()
        .iter()
        .enumerate()
        .map(|(y, p)| {
            if space.is_unsafe(y) {
                // unsafe_mass >= amount whenever the floor is feasible
                p.clone() * (unsafe_mass.clone() - amount.clone()) / unsafe_mass.clone()
            } else if safe_mass > T::zero() {
                p.clone() * (safe_mass.clone() + amount.clone()) / safe_mass.clone()
            } else {
                p.clone() + amount.clone() / T::from_count(safe_count)
            }
        })
        .collect();
    FiniteDistribution::new(probs)
        .expect("transfer preserves normalization")
}

/// Uniformly random direction on the simplex via normalized weights.
fn random_direction<T: Scalar, R: Rng + ?Sized>(size: usize, rng: &mut R) -> FiniteDistribution<T> {
    let mut weights = Vec::with_capacity(size);
    let mut total = 0.0f64;
    for _ in 0..size {
        let w: f64 = rng.gen::<f64>() + 1e-12;
        total += w;
        weights.push(w);
    }
    FiniteDistribution::new(
        weights
            .into_iter()
            .map(|w| T::from_float(w / total))
            .collect(),
    )
    .expect("weights normalize")
    .renormalized()
}

/// Moves `magnitude` of absolute mass (capped by what is available) off the
/// safe set, scaled down proportionally, and lands it either on one target
/// response or across the whole unsafe set proportionally.
fn shift_mass<T: Scalar>(
    dist: &FiniteDistribution<T>,
    space: &OutputSpace,
    magnitude: f64,
    target: Option<usize>,
) -> FiniteDistribution<T> {
    if space.unsafe_set().is_empty() {
        return dist.clone();
    }
    let safe_mass = dist
        .cumulative_mass(space.safe_iter())
        .expect("space indices valid");
    let shift = {
        let m = T::from_float(magnitude.max(0.0));
        if m > safe_mass {
            safe_mass.clone()
        } else {
            m
        }
    };
    if shift == T::zero() {
        return dist.clone();
    }
    let unsafe_mass = dist.unsafe_mass(space);
    let unsafe_count = space.unsafe_set().len();
    let probs: Vec<T> = dist
        .probs()
        .iter()
        .enumerate()
        .map(|(y, p)| {
            if space.is_unsafe(y) {
                match target {
                    Some(t) if y == t => p.clone() + shift.clone(),
                    Some(_) => p.clone(),
                    None => {
                        if unsafe_mass > T::zero() {
                            p.clone() * (unsafe_mass.clone() + shift.clone())
                                / unsafe_mass.clone()
                        } else {
                            p.clone() + shift.clone() / T::from_count(unsafe_count)
                        }
                    }
                }
            } else {
                p.clone() * (safe_mass.clone() - shift.clone()) / safe_mass.clone()
            }
        })
        .collect();
    FiniteDistribution::new(probs).expect("shift preserves normalization")
}

/// Moves `magnitude` of absolute mass (capped by what is available) from
/// the safe set toward the unsafe set, both sides scaled proportionally.
/// A space without unsafe responses is returned unchanged.
pub fn shift_toward_unsafe<T: Scalar>(
    dist: &FiniteDistribution<T>,
    space: &OutputSpace,
    magnitude: f64,
) -> FiniteDistribution<T> {
    shift_mass(dist, space, magnitude, None)
}

/// General Byzantine models: each one independently shifts a random
/// magnitude of mass off the safe set, starting from a randomly chosen
/// safe seed. Magnitudes are drawn in `[0.6, 0.85] * strength`, and each
/// model concentrates its shift on its own uniformly chosen unsafe target
/// (a shared target would make this collusion).
pub fn gen_byzantine_general<T: Scalar, R: Rng + ?Sized>(
    safe_models: &[FiniteDistribution<T>],
    space: &OutputSpace,
    count: usize,
    strength: f64,
    rng: &mut R,
) -> Result<Vec<FiniteDistribution<T>>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if safe_models.is_empty() {
        return Err(CoreError::InvalidArgument(
            "general adversary needs a safe seed".into(),
        ));
    }
    let targets: Vec<usize> = space.unsafe_set().iter().copied().collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let pick: f64 = rng.gen();
        let seed = &safe_models[((pick * safe_models.len() as f64) as usize)
            .min(safe_models.len() - 1)];
        let magnitude = strength * (0.6 + 0.25 * rng.gen::<f64>());
        let target = if targets.is_empty() {
            None
        } else {
            let t: f64 = rng.gen();
            Some(targets[((t * targets.len() as f64) as usize).min(targets.len() - 1)])
        };
        out.push(shift_mass(seed, space, magnitude, target));
    }
    Ok(out)
}

/// Colluding Byzantine models: all `count` of them share one coordinated
/// distribution `(1 - strength) * seed + strength * point(y_t)` for a
/// jointly chosen unsafe target `y_t`. At strength 1 they are a point mass
/// on the target.
pub fn gen_byzantine_collusion<T: Scalar, R: Rng + ?Sized>(
    safe_models: &[FiniteDistribution<T>],
    space: &OutputSpace,
    count: usize,
    strength: f64,
    rng: &mut R,
) -> Result<Vec<FiniteDistribution<T>>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if space.unsafe_set().is_empty() {
        return Err(CoreError::EmptyUnsafeSet);
    }
    if safe_models.is_empty() {
        return Err(CoreError::InvalidArgument(
            "collusion needs a safe seed".into(),
        ));
    }
    let pick: f64 = rng.gen();
    let seed =
        &safe_models[((pick * safe_models.len() as f64) as usize).min(safe_models.len() - 1)];
    let targets: Vec<usize> = space.unsafe_set().iter().copied().collect();
    let t_pick: f64 = rng.gen();
    let y_t = targets[((t_pick * targets.len() as f64) as usize).min(targets.len() - 1)];

    let st = T::from_float(strength);
    let keep = T::one() - st.clone();
    let probs: Vec<T> = seed
        .probs()
        .iter()
        .enumerate()
        .map(|(y, p)| {
            let scaled = keep.clone() * p.clone();
            if y == y_t {
                scaled + st.clone()
            } else {
                scaled
            }
        })
        .collect();
    let colluder = FiniteDistribution::new(probs)?;
    Ok(vec![colluder; count])
}

/// Uniformly random arrangement of `f` Byzantine labels among `n` slots.
pub fn draw_placement<R: Rng + ?Sized>(n: usize, f: usize, rng: &mut R) -> Vec<ModelLabel> {
    let mut labels = vec![ModelLabel::Safe; n - f];
    labels.extend(vec![ModelLabel::Byzantine; f]);
    labels.shuffle(rng);
    labels
}

/// Assembles a full labeled group for one scenario draw: safe and
/// Byzantine models generated per the regime, positions shuffled uniformly.
pub fn build_group<T: Scalar, R: Rng + ?Sized>(
    config: &ScenarioConfig,
    spec: &SafeModelSpec<T>,
    space: &OutputSpace,
    rng: &mut R,
) -> Result<LabeledGroup<T>> {
    let placement = draw_placement(config.n, config.f_actual, rng);
    build_group_with_placement(config, spec, space, &placement, rng)
}

/// Same as [`build_group`] but with a caller-fixed label arrangement, used
/// when model identities must persist across trials.
pub fn build_group_with_placement<T: Scalar, R: Rng + ?Sized>(
    config: &ScenarioConfig,
    spec: &SafeModelSpec<T>,
    space: &OutputSpace,
    placement: &[ModelLabel],
    rng: &mut R,
) -> Result<LabeledGroup<T>> {
    config.validate()?;
    if placement.len() != config.n {
        return Err(CoreError::InvalidArgument(
            "placement length must equal n".into(),
        ));
    }
    let byz_in_placement = placement
        .iter()
        .filter(|l| **l == ModelLabel::Byzantine)
        .count();
    if byz_in_placement != config.f_actual {
        return Err(CoreError::InvalidArgument(
            "placement Byzantine count must equal f_actual".into(),
        ));
    }

    let s_actual = config.n - config.f_actual;
    let safe = gen_safe_models(spec, space, s_actual, rng)?;
    let byzantine = match config.regime {
        Regime::Collusion => gen_byzantine_collusion(
            &safe,
            space,
            config.f_actual,
            config.collusion_strength,
            rng,
        )?,
        Regime::General | Regime::HalfResilience => gen_byzantine_general(
            &safe,
            space,
            config.f_actual,
            config.collusion_strength,
            rng,
        )?,
    };

    let mut safe_iter = safe.into_iter();
    let mut byz_iter = byzantine.into_iter();
    let models: Vec<FiniteDistribution<T>> = placement
        .iter()
        .map(|label| match label {
            ModelLabel::Safe => safe_iter.next().expect("safe count matches"),
            ModelLabel::Byzantine => byz_iter.next().expect("byzantine count matches"),
        })
        .collect();

    let group = ModelGroup::new(space.clone(), models, config.s_declared)?;
    LabeledGroup::new(group, placement.to_vec())
}
