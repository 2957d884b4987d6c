//! Hyperparameter search: per-agent annealing chains whose proposals come from
//! swarm moves (separation, alignment, cohesion, food attraction, enemy
//! repulsion), with a Lévy jump when an agent has no neighbours.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::flowdata::{stratified_split_indices, Samples};
use crate::models::{Ensemble, Hyperparameters, Voting};
use crate::num::Real;
use crate::rng::{self, tag};
use crate::selector::FeatureMask;

pub const LEVY_BETA: f64 = 1.5;
pub const LEVY_SCALE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Knob {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

impl Knob {
    fn new(name: &str, lower: f64, upper: f64, integer: bool) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            integer,
        }
    }
}

const KNOB_NAMES: [&str; 7] = [
    "dt_max_depth",
    "rf_n_trees",
    "rf_max_depth",
    "gbt_n_rounds",
    "gbt_max_depth",
    "gbt_learning_rate",
    "gbt_reg_lambda",
];

/// Bounds for each searched knob. Knobs not listed keep their value in `base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamSpace {
    pub knobs: Vec<Knob>,
    pub base: Hyperparameters,
}

impl Default for ParamSpace {
    fn default() -> Self {
        Self {
            knobs: vec![
                Knob::new("dt_max_depth", 2.0, 12.0, true),
                Knob::new("rf_n_trees", 10.0, 100.0, true),
                Knob::new("rf_max_depth", 2.0, 14.0, true),
                Knob::new("gbt_n_rounds", 10.0, 150.0, true),
                Knob::new("gbt_max_depth", 1.0, 8.0, true),
                Knob::new("gbt_learning_rate", 0.05, 0.5, false),
                Knob::new("gbt_reg_lambda", 0.0, 5.0, false),
            ],
            base: Hyperparameters::default(),
        }
    }
}

impl ParamSpace {
    pub fn dim(&self) -> usize {
        self.knobs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.knobs.is_empty() {
            return Err(Error::Parameter("parameter space has no knobs".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for k in &self.knobs {
            if !KNOB_NAMES.contains(&k.name.as_str()) {
                return Err(Error::Parameter(format!("unknown knob {:?}", k.name)));
            }
            if !seen.insert(k.name.as_str()) {
                return Err(Error::Parameter(format!("knob {:?} listed twice", k.name)));
            }
            if !(k.lower < k.upper) {
                return Err(Error::Parameter(format!(
                    "knob {}: lower {} must be below upper {}",
                    k.name, k.lower, k.upper
                )));
            }
        }
        self.base.validate()
    }

    fn value(k: &Knob, x: f64) -> f64 {
        let v = k.lower + x.clamp(0.0, 1.0) * (k.upper - k.lower);
        if k.integer {
            v.round().clamp(k.lower.ceil(), k.upper.floor().max(k.lower.ceil()))
        } else {
            v
        }
    }

    /// Maps a point of the unit cube to hyperparameters, rounding integer knobs.
    pub fn denormalize(&self, x: &[f64]) -> Hyperparameters {
        let mut hp = self.base.clone();
        for (k, &xi) in self.knobs.iter().zip(x) {
            let v = Self::value(k, xi);
            let n = v as usize;
            match k.name.as_str() {
                "dt_max_depth" => hp.dt_max_depth = n,
                "rf_n_trees" => hp.rf_n_trees = n,
                "rf_max_depth" => hp.rf_max_depth = n,
                "gbt_n_rounds" => hp.gbt_n_rounds = n,
                "gbt_max_depth" => hp.gbt_max_depth = n,
                "gbt_learning_rate" => hp.gbt_learning_rate = v,
                "gbt_reg_lambda" => hp.gbt_reg_lambda = v,
                _ => {}
            }
        }
        hp
    }

    pub fn normalize(&self, hp: &Hyperparameters) -> Vec<f64> {
        self.knobs
            .iter()
            .map(|k| {
                let v = match k.name.as_str() {
                    "dt_max_depth" => hp.dt_max_depth as f64,
                    "rf_n_trees" => hp.rf_n_trees as f64,
                    "rf_max_depth" => hp.rf_max_depth as f64,
                    "gbt_n_rounds" => hp.gbt_n_rounds as f64,
                    "gbt_max_depth" => hp.gbt_max_depth as f64,
                    "gbt_learning_rate" => hp.gbt_learning_rate,
                    _ => hp.gbt_reg_lambda,
                };
                ((v - k.lower) / (k.upper - k.lower)).clamp(0.0, 1.0)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaParams {
    pub n_agents: usize,
    pub iterations: usize,
    pub t0: f64,
    pub cooling_alpha: f64,
    pub radius_start: f64,
    pub radius_end: f64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            n_agents: 8,
            iterations: 40,
            t0: 1.0,
            cooling_alpha: 0.9,
            radius_start: 0.5,
            radius_end: 0.1,
        }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::Parameter("n_agents must be at least 1".into()));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::Parameter(format!("t0 {} must be positive", self.t0)));
        }
        if !(self.cooling_alpha > 0.0 && self.cooling_alpha < 1.0) {
            return Err(Error::Parameter(format!("cooling_alpha {} outside (0, 1)", self.cooling_alpha)));
        }
        if !(self.radius_start >= self.radius_end && self.radius_end >= 0.0) {
            return Err(Error::Parameter("radius must shrink from radius_start to radius_end >= 0".into()));
        }
        Ok(())
    }

    /// `t0 · alpha^k`
    pub fn temperature(&self, k: usize) -> f64 {
        self.t0 * self.cooling_alpha.powi(k as i32)
    }

    /// Linear schedule from `radius_start` at iteration 0 to `radius_end` at the last.
    pub fn radius(&self, k: usize) -> f64 {
        let tau = k as f64 / self.iterations.max(1) as f64;
        self.radius_start + (self.radius_end - self.radius_start) * tau.min(1.0)
    }
}

/// Swarm move weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorWeights {
    pub separation: f64,
    pub alignment: f64,
    pub cohesion: f64,
    pub food: f64,
    pub enemy: f64,
    pub inertia: f64,
}

impl BehaviorWeights {
    /// Exploration weights decay and attraction grows as `progress` goes 0 → 1.
    pub fn at_progress(progress: f64) -> Self {
        let t = progress.clamp(0.0, 1.0);
        let explore = 0.1 * (1.0 - t);
        Self {
            separation: explore,
            alignment: explore,
            cohesion: explore,
            food: 0.2 + 0.8 * t,
            enemy: explore,
            inertia: 0.9 - 0.5 * t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub positions: Vec<Vec<f64>>,
    pub steps: Vec<Vec<f64>>,
    pub food: Vec<f64>,
    pub enemy: Vec<f64>,
    pub temperature: f64,
    pub radius: f64,
    pub iteration: usize,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mantegna's sigma for a Lévy-stable step with exponent `beta`.
pub fn levy_sigma(beta: f64) -> f64 {
    let num = gamma(1.0 + beta) * (std::f64::consts::PI * beta / 2.0).sin();
    let den = gamma((1.0 + beta) / 2.0) * beta * 2f64.powf((beta - 1.0) / 2.0);
    (num / den).powf(1.0 / beta)
}

/// One Lévy step per coordinate, scaled by [`LEVY_SCALE`].
pub fn levy_step<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let sigma = levy_sigma(LEVY_BETA);
    (0..dim)
        .map(|_| {
            let u: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
            let v: f64 = rng.sample(StandardNormal);
            LEVY_SCALE * u / v.abs().powf(1.0 / LEVY_BETA)
        })
        .collect()
}

/// Proposed `(position, step)` for `agent`.
///
/// With neighbours inside the radius the step is
/// `s·S + a·A + c·C + f·F + e·E + w·ΔX` with `S = −Σ(X − X_j)`,
/// `A` the mean neighbour step, `C` the mean neighbour position minus `X`,
/// `F = food − X` and `E = X − enemy`; it is clamped to `[−1, 1]` per coordinate.
/// Without neighbours the agent takes a Lévy jump and its step resets to zero.
/// Positions are clamped to the unit cube.
pub fn dragonfly_step<R: Rng + ?Sized>(
    state: &SwarmState,
    agent: usize,
    w: &BehaviorWeights,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let x = state
        .positions
        .get(agent)
        .ok_or_else(|| Error::Shape(format!("agent {agent} of {}", state.positions.len())))?;
    let k = x.len();
    let neighbours: Vec<usize> = (0..state.positions.len())
        .filter(|&j| j != agent && distance(x, &state.positions[j]) <= state.radius)
        .collect();
    if neighbours.is_empty() {
        let jump = levy_step(k, rng);
        let pos = x.iter().zip(&jump).map(|(a, b)| (a + b).clamp(0.0, 1.0)).collect();
        return Ok((pos, vec![0.0; k]));
    }
    let m = neighbours.len() as f64;
    let old = &state.steps[agent];
    let mut step = vec![0.0; k];
    for d in 0..k {
        let sep = -neighbours.iter().map(|&j| x[d] - state.positions[j][d]).sum::<f64>();
        let ali = neighbours.iter().map(|&j| state.steps[j][d]).sum::<f64>() / m;
        let coh = neighbours.iter().map(|&j| state.positions[j][d]).sum::<f64>() / m - x[d];
        let food = state.food[d] - x[d];
        let enemy = x[d] - state.enemy[d];
        let s = w.separation * sep
            + w.alignment * ali
            + w.cohesion * coh
            + w.food * food
            + w.enemy * enemy
            + w.inertia * old[d];
        step[d] = s.clamp(-1.0, 1.0);
    }
    let pos = x.iter().zip(&step).map(|(a, b)| (a + b).clamp(0.0, 1.0)).collect();
    Ok((pos, step))
}

/// Metropolis rule: improvements always pass, worsening moves with `exp(−Δ/T)`.
pub fn sa_accept<R: Rng + ?Sized>(delta: f64, temperature: f64, rng: &mut R) -> Result<bool> {
    if !(temperature > 0.0) {
        return Err(Error::Parameter(format!("temperature {temperature} must be positive")));
    }
    // Always consume one draw so streams stay aligned across branches.
    let u: f64 = rng.random();
    Ok(delta < 0.0 || u < (-delta / temperature).exp())
}

/// Percentage of misclassified held-out rows.
pub fn misclassification_percentage(predicted: &[usize], truth: &[u8]) -> f64 {
    let wrong = predicted.iter().zip(truth).filter(|(p, t)| **p != **t as usize).count();
    100.0 * wrong as f64 / truth.len().max(1) as f64
}

/// Trains the ensemble on a stratified 80% of `samples` and returns the error
/// percentage on the other 20%.
pub fn sa_fitness<T: Real>(hp: &Hyperparameters, samples: &Samples<T>, mask: &FeatureMask, seed: u64) -> Result<f64> {
    let (train, test) = stratified_split_indices(samples.labels(), 0.8, rng::derive_seed(seed, &[tag::TUNER_INNER]))
        .map_err(|e| Error::InsufficientData(format!("inner split infeasible: {e}")))?;
    let train = samples.subset(&train);
    let test = samples.subset(&test);
    let model = Ensemble::fit(&train, mask, hp, seed)?;
    let pred = model.predict_all(&test, hp.voting)?;
    Ok(misclassification_percentage(&pred, test.labels()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub best_fitness: f64,
    pub temperature: f64,
}

struct Evaluator<'a, T> {
    samples: &'a Samples<T>,
    mask: &'a FeatureMask,
    space: &'a ParamSpace,
    seed: u64,
    memo: Mutex<HashMap<String, f64>>,
}

impl<T: Real> Evaluator<'_, T> {
    fn eval(&self, x: &[f64]) -> Result<f64> {
        let hp = self.space.denormalize(x);
        let key = serde_json::to_string(&hp)?;
        if let Some(&f) = self.memo.lock().expect("tuner memo poisoned").get(&key) {
            return Ok(f);
        }
        let f = sa_fitness(&hp, self.samples, self.mask, self.seed)?;
        self.memo.lock().expect("tuner memo poisoned").insert(key, f);
        Ok(f)
    }
}

/// Searches `space` and returns the best hyperparameters seen with the
/// best-so-far trace (entry 0 is the initial swarm).
pub fn tune<T: Real>(
    samples: &Samples<T>,
    mask: &FeatureMask,
    space: &ParamSpace,
    sa: &SaParams,
    seed: u64,
) -> Result<(Hyperparameters, Vec<TracePoint>)> {
    space.validate()?;
    sa.validate()?;
    let k = space.dim();
    let ev = Evaluator {
        samples,
        mask,
        space,
        seed,
        memo: Mutex::new(HashMap::new()),
    };
    let positions: Vec<Vec<f64>> = (0..sa.n_agents)
        .map(|a| {
            let mut r = rng::stream(seed, &[tag::TUNER, 0, a as u64]);
            (0..k).map(|_| r.random::<f64>()).collect()
        })
        .collect();
    let mut fit: Vec<f64> = positions.par_iter().map(|p| ev.eval(p)).collect::<Result<_>>()?;
    let argbest = |f: &[f64]| (0..f.len()).min_by(|&a, &b| f[a].total_cmp(&f[b]).then(a.cmp(&b))).unwrap_or(0);
    let argworst = |f: &[f64]| (0..f.len()).max_by(|&a, &b| f[a].total_cmp(&f[b]).then(b.cmp(&a))).unwrap_or(0);
    let b = argbest(&fit);
    let mut best = (positions[b].clone(), fit[b]);
    let mut state = SwarmState {
        food: positions[b].clone(),
        enemy: positions[argworst(&fit)].clone(),
        steps: vec![vec![0.0; k]; sa.n_agents],
        positions,
        temperature: sa.t0,
        radius: sa.radius(0),
        iteration: 0,
    };
    let mut trace = vec![TracePoint {
        iteration: 0,
        best_fitness: best.1,
        temperature: sa.t0,
    }];

    for it in 1..=sa.iterations {
        state.iteration = it;
        state.temperature = sa.temperature(it);
        state.radius = sa.radius(it);
        let weights = BehaviorWeights::at_progress(it as f64 / sa.iterations as f64);
        let snapshot = &state;
        let moves: Vec<(Vec<f64>, Vec<f64>, f64, bool)> = (0..sa.n_agents)
            .into_par_iter()
            .map(|a| {
                let mut r = rng::stream(seed, &[tag::TUNER, it as u64, a as u64]);
                let (pos, step) = dragonfly_step(snapshot, a, &weights, &mut r)?;
                let f = ev.eval(&pos)?;
                let accepted = sa_accept(f - fit[a], snapshot.temperature, &mut r)?;
                Ok((pos, step, f, accepted))
            })
            .collect::<Result<_>>()?;
        for (a, (pos, step, f, accepted)) in moves.into_iter().enumerate() {
            if f < best.1 {
                best = (pos.clone(), f);
            }
            if accepted {
                state.positions[a] = pos;
                state.steps[a] = step;
                fit[a] = f;
            }
        }
        state.food = best.0.clone();
        state.enemy = state.positions[argworst(&fit)].clone();
        trace.push(TracePoint {
            iteration: it,
            best_fitness: best.1,
            temperature: state.temperature,
        });
        log::debug!("tuner iteration {it}: best {:.3}%", best.1);
    }
    Ok((space.denormalize(&best.0), trace))
}

/// Fixes every knob except those named, by collapsing the others to `base`.
pub fn restrict(space: &ParamSpace, names: &[&str]) -> ParamSpace {
    ParamSpace {
        knobs: space.knobs.iter().filter(|k| names.contains(&k.name.as_str())).cloned().collect(),
        base: space.base.clone(),
    }
}

impl ParamSpace {
    pub fn with_voting(mut self, voting: Voting) -> Self {
        self.base.voting = voting;
        self
    }
}
