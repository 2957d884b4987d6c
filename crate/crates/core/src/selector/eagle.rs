//! Select, spiral and swoop moves on continuous positions in `[0, 1]^d`.
//!
//! Each operator draws its uniforms from the caller's stream. The `*_move` and
//! `*_coefficients` functions are the deterministic cores, exposed so the
//! operators can be checked against hand-fed random numbers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EagleParams {
    /// Gain on the pull toward the population mean in the select move.
    pub eta_sel: f64,
    /// Search cycles, within `[0.5, 2]`.
    pub omega: f64,
    /// Angle gain.
    pub phi: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for EagleParams {
    fn default() -> Self {
        Self {
            eta_sel: 2.0,
            omega: 1.5,
            phi: 5.0,
            c1: 2.0,
            c2: 2.0,
        }
    }
}

impl EagleParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=2.0).contains(&self.omega) {
            return Err(Error::Parameter(format!("omega {} outside [0.5, 2]", self.omega)));
        }
        for (name, v) in [("eta_sel", self.eta_sel), ("phi", self.phi), ("c1", self.c1), ("c2", self.c2)] {
            if !(v > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Population of continuous positions with best and mean positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EagleGaState<T> {
    pub positions: Vec<Vec<T>>,
    pub best_position: Vec<T>,
    pub best_fitness: f64,
    /// Population mean; serves as both `X_avg` and `X_m`.
    pub mean_position: Vec<T>,
    pub generation: usize,
    pub rng_seed: u64,
}

impl<T: Real> EagleGaState<T> {
    pub fn new(positions: Vec<Vec<T>>, best_position: Vec<T>, best_fitness: f64, rng_seed: u64) -> Result<Self> {
        let d = best_position.len();
        if positions.is_empty() {
            return Err(Error::DegeneratePopulation("empty population".into()));
        }
        if positions.iter().any(|p| p.len() != d) {
            return Err(Error::Shape(format!("positions must all have length {d}")));
        }
        let mean_position = mean_position(&positions);
        Ok(Self {
            positions,
            best_position,
            best_fitness,
            mean_position,
            generation: 0,
            rng_seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.best_position.len()
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.positions.len() {
            return Err(Error::Shape(format!(
                "member {i} of a population of {}",
                self.positions.len()
            )));
        }
        Ok(())
    }

    fn check_pair_ops(&self, i: usize) -> Result<()> {
        self.check_index(i)?;
        if self.positions.len() < 2 {
            return Err(Error::DegeneratePopulation(
                "spiral and swoop need at least two members".into(),
            ));
        }
        Ok(())
    }
}

pub fn mean_position<T: Real>(positions: &[Vec<T>]) -> Vec<T> {
    let d = positions.first().map_or(0, Vec::len);
    let n = T::from_count(positions.len());
    (0..d)
        .map(|j| positions.iter().map(|p| p[j]).sum::<T>() / n)
        .collect()
}

#[inline]
fn clamp01<T: Real>(x: T) -> T {
    x.max(T::zero()).min(T::one())
}

/// `clamp(X_b + eta·delta·(X_avg − X_i))`
pub fn select_move<T: Real>(x_b: &[T], x_avg: &[T], x_i: &[T], eta: T, delta: T) -> Vec<T> {
    x_b.iter()
        .zip(x_avg)
        .zip(x_i)
        .map(|((&b, &a), &x)| clamp01(b + eta * delta * (a - x)))
        .collect()
}

/// `clamp(X_i + y·(X_i − X_next) + z·(X_i − X_m))`
pub fn spiral_move<T: Real>(x_i: &[T], x_next: &[T], x_m: &[T], z: T, y: T) -> Vec<T> {
    x_i.iter()
        .zip(x_next)
        .zip(x_m)
        .map(|((&x, &nx), &m)| clamp01(x + y * (x - nx) + z * (x - m)))
        .collect()
}

/// `clamp(r·X_b + z1·(X_i − C1·X_m) + y1·(X_i − C2·X_b))`
#[allow(clippy::too_many_arguments)]
pub fn swoop_move<T: Real>(x_i: &[T], x_b: &[T], x_m: &[T], z1: T, y1: T, r: T, c1: T, c2: T) -> Vec<T> {
    x_i.iter()
        .zip(x_b)
        .zip(x_m)
        .map(|((&x, &b), &m)| clamp01(r * b + z1 * (x - c1 * m) + y1 * (x - c2 * b)))
        .collect()
}

fn normalize<T: Real>(v: &mut [T]) {
    let max = v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
    if max > T::zero() {
        v.iter_mut().for_each(|x| *x /= max);
    } else {
        v.iter_mut().for_each(|x| *x = T::zero());
    }
}

/// Angle and radius for one member from its two uniforms.
fn angle_radius<T: Real>(r1: T, r2: T, params: &EagleParams) -> (T, T) {
    let theta = T::lit(params.phi) * T::PI() * r1;
    (theta, theta + T::lit(params.omega) * r2)
}

/// Normalized `(z, y)` spiral coefficients for every member from `(r1, r2)` pairs.
pub fn spiral_coefficients<T: Real>(pairs: &[(T, T)], params: &EagleParams) -> (Vec<T>, Vec<T>) {
    let (mut z, mut y): (Vec<T>, Vec<T>) = pairs
        .iter()
        .map(|&(r1, r2)| {
            let (theta, delta) = angle_radius(r1, r2, params);
            (delta * theta.sin(), delta * theta.cos())
        })
        .unzip();
    normalize(&mut z);
    normalize(&mut y);
    (z, y)
}

/// Normalized `(z1, y1)` swoop coefficients from `(r1, r2)` pairs.
pub fn swoop_coefficients<T: Real>(pairs: &[(T, T)], params: &EagleParams) -> (Vec<T>, Vec<T>) {
    let (mut z, mut y): (Vec<T>, Vec<T>) = pairs
        .iter()
        .map(|&(r1, r2)| {
            let (theta, delta) = angle_radius(r1, r2, params);
            (delta * theta.sinh(), delta * theta.cosh())
        })
        .unzip();
    normalize(&mut z);
    normalize(&mut y);
    (z, y)
}

fn uniform<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.random::<f64>())
}

fn draw_pairs<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(T, T)> {
    (0..n)
        .map(|_| {
            let r1 = uniform(rng);
            (r1, uniform(rng))
        })
        .collect()
}

/// Move toward the best position, pulled by the mean. One fair coin draw.
pub fn eagle_select<T: Real, R: Rng + ?Sized>(
    state: &EagleGaState<T>,
    i: usize,
    params: &EagleParams,
    rng: &mut R,
) -> Result<Vec<T>> {
    state.check_index(i)?;
    let delta = if rng.random_bool(0.5) { T::one() } else { T::zero() };
    Ok(select_move(
        &state.best_position,
        &state.mean_position,
        &state.positions[i],
        T::lit(params.eta_sel),
        delta,
    ))
}

/// Spiral search around the member. Draws `(r1, r2)` for each member in order.
pub fn eagle_spiral<T: Real, R: Rng + ?Sized>(
    state: &EagleGaState<T>,
    i: usize,
    params: &EagleParams,
    rng: &mut R,
) -> Result<Vec<T>> {
    state.check_pair_ops(i)?;
    let n = state.positions.len();
    let (z, y) = spiral_coefficients(&draw_pairs(n, rng), params);
    Ok(spiral_move(
        &state.positions[i],
        &state.positions[(i + 1) % n],
        &state.mean_position,
        z[i],
        y[i],
    ))
}

/// Dive toward the best position. Draws `(r1, r2)` per member, then one scalar.
pub fn eagle_swoop<T: Real, R: Rng + ?Sized>(
    state: &EagleGaState<T>,
    i: usize,
    params: &EagleParams,
    rng: &mut R,
) -> Result<Vec<T>> {
    state.check_pair_ops(i)?;
    let n = state.positions.len();
    let (z1, y1) = swoop_coefficients(&draw_pairs(n, rng), params);
    let r: T = uniform(rng);
    Ok(swoop_move(
        &state.positions[i],
        &state.best_position,
        &state.mean_position,
        z1[i],
        y1[i],
        r,
        T::lit(params.c1),
        T::lit(params.c2),
    ))
}
