use std::collections::HashMap;
use std::sync::Mutex;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eagle::{eagle_select, eagle_spiral, eagle_swoop, EagleGaState, EagleParams};
use super::FeatureMask;
use crate::error::{Error, Result};
use crate::flowdata::{stratified_folds, Samples};
use crate::models::fit_decision_tree;
use crate::num::Real;
use crate::rng::{self, tag};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaParams {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_k: usize,
    pub crossover_rate: f64,
    /// Per-gene flip probability; `None` means `1 / |T|`.
    pub mutation_rate: Option<f64>,
    pub elitism: usize,
    pub eagle_fraction: f64,
    pub w1: f64,
    pub w2: f64,
    /// Depth of the decision tree used to estimate subset error.
    pub proxy_depth: usize,
    pub cv_folds: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population_size: 30,
            generations: 50,
            tournament_k: 3,
            crossover_rate: 0.9,
            mutation_rate: None,
            elitism: 2,
            eagle_fraction: 0.2,
            w1: 0.9,
            w2: 0.1,
            proxy_depth: 6,
            cv_folds: 3,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Parameter(m));
        if self.population_size < 2 {
            return err(format!("population_size {} < 2", self.population_size));
        }
        if (self.w1 + self.w2 - 1.0).abs() > 1e-9 || self.w1 < 0.0 || self.w2 < 0.0 {
            return err(format!("weights {} + {} must be non-negative and sum to 1", self.w1, self.w2));
        }
        if !(0.0..=1.0).contains(&self.eagle_fraction) {
            return err(format!("eagle_fraction {} outside [0, 1]", self.eagle_fraction));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return err(format!("crossover_rate {} outside [0, 1]", self.crossover_rate));
        }
        if let Some(m) = self.mutation_rate {
            if !(0.0..=1.0).contains(&m) {
                return err(format!("mutation_rate {m} outside [0, 1]"));
            }
        }
        if self.tournament_k == 0 {
            return err("tournament_k must be at least 1".into());
        }
        if self.elitism > self.population_size {
            return err(format!("elitism {} exceeds population {}", self.elitism, self.population_size));
        }
        if self.proxy_depth == 0 || self.cv_folds < 2 {
            return err("proxy_depth >= 1 and cv_folds >= 2 are required".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub n_selected: usize,
}

/// Mean held-out error of a proxy decision tree over stratified folds.
pub fn cv_error<T: Real>(samples: &Samples<T>, mask: &FeatureMask, depth: usize, folds: &[Vec<usize>]) -> Result<f64> {
    let n = samples.n_rows();
    let mut in_test = vec![false; n];
    let mut total = 0.0;
    for fold in folds {
        in_test.iter_mut().for_each(|b| *b = false);
        fold.iter().for_each(|&i| in_test[i] = true);
        let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
        let tree = fit_decision_tree(&samples.subset(&train), mask, depth)?;
        let wrong = fold
            .iter()
            .filter(|&&i| tree.predict(samples.row(i)) != samples.labels()[i] as usize)
            .count();
        total += wrong as f64 / fold.len() as f64;
    }
    Ok(total / folds.len() as f64)
}

/// `w1·L + w2·|S|/|T|`, lower is better.
pub fn fitness<T: Real>(mask: &FeatureMask, samples: &Samples<T>, params: &GaParams, seed: u64) -> Result<f64> {
    if mask.len() != samples.n_features() {
        return Err(Error::Shape(format!(
            "mask covers {} columns, data has {}",
            mask.len(),
            samples.n_features()
        )));
    }
    let folds = stratified_folds(samples.labels(), params.cv_folds, seed)?;
    let loss = cv_error(samples, mask, params.proxy_depth, &folds)?;
    Ok(params.w1 * loss + params.w2 * mask.count() as f64 / mask.len() as f64)
}

/// Memoized fitness for one dataset, parameter set and fold seed.
pub struct FitnessCache<'a, T> {
    samples: &'a Samples<T>,
    params: &'a GaParams,
    folds: Vec<Vec<usize>>,
    memo: Mutex<HashMap<FeatureMask, f64>>,
}

impl<'a, T: Real> FitnessCache<'a, T> {
    pub fn new(samples: &'a Samples<T>, params: &'a GaParams, seed: u64) -> Result<Self> {
        Ok(Self {
            samples,
            params,
            folds: stratified_folds(samples.labels(), params.cv_folds, seed)?,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn get(&self, mask: &FeatureMask) -> Result<f64> {
        if let Some(&f) = self.memo.lock().expect("fitness memo poisoned").get(mask) {
            return Ok(f);
        }
        let loss = cv_error(self.samples, mask, self.params.proxy_depth, &self.folds)?;
        let f = self.params.w1 * loss + self.params.w2 * mask.count() as f64 / mask.len() as f64;
        self.memo.lock().expect("fitness memo poisoned").insert(mask.clone(), f);
        Ok(f)
    }

    pub fn of_position(&self, position: &[T]) -> Result<f64> {
        self.get(&FeatureMask::from_position(position)?)
    }

    pub fn evaluations(&self) -> usize {
        self.memo.lock().expect("fitness memo poisoned").len()
    }
}

/// Ranks members by fitness, ties by index.
fn ranking(fit: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fit.len()).collect();
    order.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]).then(a.cmp(&b)));
    order
}

fn tournament<R: Rng>(fit: &[f64], k: usize, rng: &mut R) -> usize {
    let k = k.min(fit.len());
    index::sample(rng, fit.len(), k)
        .into_iter()
        .min_by(|&a, &b| fit[a].total_cmp(&fit[b]).then(a.cmp(&b)))
        .expect("k >= 1")
}

/// Select, spiral, swoop on one member; each move kept only if it lowers fitness.
fn refine<T: Real>(
    snapshot: &EagleGaState<T>,
    i: usize,
    start_fitness: f64,
    eagle: &EagleParams,
    cache: &FitnessCache<'_, T>,
    seed: u64,
) -> Result<(Vec<T>, f64)> {
    let mut rng = rng::stream(seed, &[tag::GA_EAGLE, snapshot.generation as u64, i as u64]);
    let mut local = snapshot.clone();
    let mut f = start_fitness;
    for step in 0..3 {
        let candidate = match step {
            0 => eagle_select(&local, i, eagle, &mut rng)?,
            1 => eagle_spiral(&local, i, eagle, &mut rng)?,
            _ => eagle_swoop(&local, i, eagle, &mut rng)?,
        };
        let cf = cache.of_position(&candidate)?;
        if cf < f {
            local.positions[i] = candidate;
            f = cf;
        }
    }
    Ok((local.positions.swap_remove(i), f))
}

/// Runs the GA and returns the best mask with per-generation statistics.
///
/// Generation 0 is the random initial population, so the history has
/// `generations + 1` entries. `best_fitness` is the best ever seen and never
/// increases.
pub fn select_features<T: Real>(
    samples: &Samples<T>,
    ga: &GaParams,
    eagle: &EagleParams,
    seed: u64,
) -> Result<(FeatureMask, Vec<GenerationStats>)> {
    ga.validate()?;
    eagle.validate()?;
    let d = samples.n_features();
    if d < 2 {
        return Err(Error::InsufficientData(format!("{d} feature column(s); selection needs at least 2")));
    }
    let cache = FitnessCache::new(samples, ga, seed)?;
    let n = ga.population_size;
    let mutation = ga.mutation_rate.unwrap_or(1.0 / d as f64);
    let n_eagle = (ga.eagle_fraction * n as f64).round() as usize;

    let mut positions: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let mut r = rng::stream(seed, &[tag::GA_INIT, i as u64]);
            (0..d).map(|_| T::lit(r.random::<f64>())).collect()
        })
        .collect();

    let evaluate = |ps: &[Vec<T>]| -> Result<Vec<f64>> { ps.par_iter().map(|p| cache.of_position(p)).collect() };

    let mut fit = evaluate(&positions)?;
    let first = ranking(&fit)[0];
    let mut best_position = positions[first].clone();
    let mut best_fitness = fit[first];
    let stats = |g: usize, fit: &[f64], best_f: f64, best_p: &[T]| -> Result<GenerationStats> {
        Ok(GenerationStats {
            generation: g,
            best_fitness: best_f,
            mean_fitness: fit.iter().sum::<f64>() / fit.len() as f64,
            n_selected: FeatureMask::from_position(best_p)?.count(),
        })
    };
    let mut history = vec![stats(0, &fit, best_fitness, &best_position)?];

    for g in 1..=ga.generations {
        // Breed from the previous generation.
        let order = ranking(&fit);
        let mut next: Vec<Vec<T>> = order.iter().take(ga.elitism).map(|&i| positions[i].clone()).collect();
        let children: Vec<Vec<T>> = (next.len()..n)
            .into_par_iter()
            .map(|c| {
                let mut r = rng::stream(seed, &[tag::GA_BREED, g as u64, c as u64]);
                let a = &positions[tournament(&fit, ga.tournament_k, &mut r)];
                let b = &positions[tournament(&fit, ga.tournament_k, &mut r)];
                let cross = r.random_bool(ga.crossover_rate);
                a.iter()
                    .zip(b)
                    .map(|(&x, &y)| {
                        let gene = if cross && r.random_bool(0.5) { y } else { x };
                        if r.random_bool(mutation) {
                            T::one() - gene
                        } else {
                            gene
                        }
                    })
                    .collect()
            })
            .collect();
        next.extend(children);
        positions = next;
        fit = evaluate(&positions)?;

        // Eagle refinement of the leading members against a common snapshot.
        let leaders: Vec<usize> = ranking(&fit).into_iter().take(n_eagle).collect();
        let mut snapshot = EagleGaState::new(positions.clone(), best_position.clone(), best_fitness, seed)?;
        snapshot.generation = g;
        let refined: Vec<(usize, Vec<T>, f64)> = leaders
            .par_iter()
            .map(|&i| refine(&snapshot, i, fit[i], eagle, &cache, seed).map(|(p, f)| (i, p, f)))
            .collect::<Result<_>>()?;
        for (i, p, f) in refined {
            positions[i] = p;
            fit[i] = f;
        }

        for &i in &ranking(&fit)[..1] {
            if fit[i] < best_fitness {
                best_fitness = fit[i];
                best_position = positions[i].clone();
            }
        }
        history.push(stats(g, &fit, best_fitness, &best_position)?);
        log::debug!("generation {g}: best {best_fitness:.5}, {} masks evaluated", cache.evaluations());
    }
    Ok((FeatureMask::from_position(&best_position)?, history))
}
