use flowguard::flowdata::Samples;
use flowguard::models::{Hyperparameters, Voting};
use flowguard::rng::stream;
use flowguard::selector::FeatureMask;
use flowguard::tuner::{
    dragonfly_step, restrict, sa_accept, sa_fitness, tune, BehaviorWeights, Knob, ParamSpace, SaParams, SwarmState,
};
use proptest::prelude::*;

#[test]
fn metropolis_frequency() {
    let mut r = stream(2024, &[]);
    let n = 10_000;
    let hits = (0..n).filter(|_| sa_accept(1.0, 1.0, &mut r).unwrap()).count();
    let rate = hits as f64 / n as f64;
    let p = (-1.0f64).exp();
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((rate - p).abs() < 0.02, "rate {rate}");
    assert!((rate - p).abs() < 3.0 * sigma, "rate {rate} outside 3 sigma");
}

#[test]
fn temperature_schedule_is_exact() {
    let sa = SaParams { t0: 2.0, cooling_alpha: 0.8, ..Default::default() };
    for k in 0..20 {
        assert_eq!(sa.temperature(k), 2.0 * 0.8f64.powi(k as i32));
        assert!(sa.temperature(k + 1) < sa.temperature(k));
    }
}

/// Step for `agent` in a swarm with neighbours, written out per coordinate.
fn step_oracle(state: &SwarmState, agent: usize, w: &BehaviorWeights) -> (Vec<f64>, Vec<f64>) {
    let x = &state.positions[agent];
    let nb: Vec<usize> = (0..state.positions.len())
        .filter(|&j| {
            j != agent
                && x.iter().zip(&state.positions[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= state.radius
        })
        .collect();
    assert!(!nb.is_empty());
    let m = nb.len() as f64;
    let mut step = Vec::new();
    let mut pos = Vec::new();
    for d in 0..x.len() {
        let mut sep = 0.0;
        let mut ali = 0.0;
        let mut coh = 0.0;
        for &j in &nb {
            sep -= x[d] - state.positions[j][d];
            ali += state.steps[j][d];
            coh += state.positions[j][d];
        }
        ali /= m;
        coh = coh / m - x[d];
        let v = w.separation * sep
            + w.alignment * ali
            + w.cohesion * coh
            + w.food * (state.food[d] - x[d])
            + w.enemy * (x[d] - state.enemy[d])
            + w.inertia * state.steps[agent][d];
        let v = v.clamp(-1.0, 1.0);
        step.push(v);
        pos.push((x[d] + v).clamp(0.0, 1.0));
    }
    (pos, step)
}

#[test]
fn two_agent_trace_matches_oracle() {
    let mut state = SwarmState {
        positions: vec![vec![0.2, 0.4, 0.9], vec![0.35, 0.3, 0.7]],
        steps: vec![vec![0.01, -0.02, 0.0], vec![0.0, 0.03, -0.01]],
        food: vec![0.5, 0.5, 0.5],
        enemy: vec![0.9, 0.1, 0.2],
        temperature: 1.0,
        radius: 0.5,
        iteration: 1,
    };
    for it in 0..10 {
        let w = BehaviorWeights::at_progress(it as f64 / 10.0);
        for a in 0..2 {
            let (pos, step) = dragonfly_step(&state, a, &w, &mut stream(it, &[a as u64])).unwrap();
            let (op, os) = step_oracle(&state, a, &w);
            assert!(pos.iter().zip(&op).all(|(x, y)| (x - y).abs() <= 1e-12));
            assert!(step.iter().zip(&os).all(|(x, y)| (x - y).abs() <= 1e-12));
            state.positions[a] = pos;
            state.steps[a] = step;
        }
    }
}

fn xor_blobs() -> Samples<f64> {
    // Four clusters in XOR layout; a single split cannot separate them.
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..240 {
        let (cx, cy) = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)][i % 4];
        let jx = ((i * 37) % 19) as f64 / 19.0 * 0.3;
        let jy = ((i * 53) % 23) as f64 / 23.0 * 0.3;
        rows.push(vec![cx + jx, cy + jy]);
        labels.push(u8::from((cx == 1.0) != (cy == 1.0)));
    }
    Samples::from_rows(&rows, labels).unwrap()
}

fn small_space() -> ParamSpace {
    // Shallow DT and RF so that only the booster's depth can fix underfitting.
    let base = Hyperparameters {
        dt_max_depth: 1,
        rf_max_depth: 1,
        rf_n_trees: 5,
        gbt_n_rounds: 20,
        voting: Voting::Soft,
        ..Default::default()
    };
    ParamSpace {
        knobs: vec![Knob { name: "gbt_max_depth".into(), lower: 1.0, upper: 3.0, integer: true }],
        base,
    }
}

#[test]
fn tuner_deepens_underfitting_booster() {
    let s = xor_blobs();
    let mask = FeatureMask::all(2).unwrap();
    let space = small_space();
    // Grid oracle: depth 1 is strictly worse than depths 2 and 3.
    let grid: Vec<f64> = (1..=3)
        .map(|d| {
            let hp = Hyperparameters { gbt_max_depth: d, ..space.base.clone() };
            sa_fitness(&hp, &s, &mask, 8).unwrap()
        })
        .collect();
    assert!(grid[0] > grid[1] && grid[0] > grid[2], "grid {grid:?}");
    let sa = SaParams { n_agents: 4, iterations: 6, ..Default::default() };
    let (hp, trace) = tune(&s, &mask, &space, &sa, 8).unwrap();
    assert!(hp.gbt_max_depth > 1);
    assert!(trace.windows(2).all(|w| w[1].best_fitness <= w[0].best_fitness));
    let (again, trace2) = tune(&s, &mask, &space, &sa, 8).unwrap();
    assert_eq!((hp, trace), (again, trace2));
}

#[test]
fn zero_iterations_returns_best_initial() {
    let s = xor_blobs();
    let sa = SaParams { n_agents: 3, iterations: 0, ..Default::default() };
    let (_, trace) = tune(&s, &FeatureMask::all(2).unwrap(), &restrict(&small_space(), &["gbt_max_depth"]), &sa, 1).unwrap();
    assert_eq!(trace.len(), 1);
}

proptest! {
    #[test]
    fn round_trip_within_one_cell(x in prop::collection::vec(0.0f64..1.0, 7)) {
        let space = ParamSpace::default();
        let hp = space.denormalize(&x);
        let back = space.normalize(&hp);
        for (k, (a, b)) in space.knobs.iter().zip(x.iter().zip(&back)) {
            let cell = 1.0 / (k.upper - k.lower);
            if k.integer {
                prop_assert!((a - b).abs() <= cell);
            } else {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn steps_stay_in_bounds(
        pts in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..6),
        seed in any::<u64>(),
        progress in 0.0f64..1.0,
    ) {
        let n = pts.len();
        let state = SwarmState {
            steps: pts.iter().map(|p| p.iter().map(|v| v - 0.5).collect()).collect(),
            food: pts[0].clone(),
            enemy: pts[n - 1].clone(),
            positions: pts,
            temperature: 1.0,
            radius: 0.4,
            iteration: 1,
        };
        let w = BehaviorWeights::at_progress(progress);
        for a in 0..n {
            let (pos, _) = dragonfly_step(&state, a, &w, &mut stream(seed, &[a as u64])).unwrap();
            prop_assert!(pos.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
