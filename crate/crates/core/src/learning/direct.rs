//! DIRECT (DIviding RECTangles) global minimization over a box.
//!
//! The box is mapped to the unit cube. Every hyperrectangle keeps the value
//! at its center. Each round selects the potentially optimal rectangles (the
//! lower-right convex hull of `(half-diagonal, value)` pairs, filtered by
//! the balance parameter ε), trisects each along its longest side and
//! evaluates the two new centers.
//!
//! Rectangles are only ever cut along a longest side, so within one
//! rectangle side levels differ by at most one and the total level count
//! identifies its size class.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Classic balance parameter.
pub const DEFAULT_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct DirectConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub budget: usize,
    pub seed: u64,
    pub epsilon: f64,
}

impl DirectConfig {
    /// The box `[-radius, radius]^dim`.
    pub fn symmetric(dim: usize, radius: f64, budget: usize, seed: u64) -> Self {
        Self {
            lower: vec![-radius; dim],
            upper: vec![radius; dim],
            budget,
            seed,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DirectResult {
    pub x_best: Vec<f64>,
    pub value_best: f64,
    pub evaluations: usize,
    /// Incumbent value after each evaluation.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Rect {
    center: Vec<f64>,
    levels: Vec<u32>,
    value: f64,
}

impl Rect {
    fn level_sum(&self) -> u32 {
        self.levels.iter().sum()
    }

    fn half_diagonal(&self) -> f64 {
        0.5 * self
            .levels
            .iter()
            .map(|&k| 3f64.powi(-2 * k as i32))
            .sum::<f64>()
            .sqrt()
    }
}

struct Evaluator<'a, F> {
    f: &'a F,
    lower: &'a [f64],
    width: Vec<f64>,
    budget: usize,
    count: usize,
    best: (Vec<f64>, f64),
    trace: Vec<f64>,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Evaluator<'_, F> {
    fn to_box(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.lower)
            .zip(&self.width)
            .map(|((u, lo), w)| lo + u * w)
            .collect()
    }

    fn remaining(&self) -> usize {
        self.budget - self.count
    }

    /// Evaluates the unit-cube points concurrently; results keep input order.
    fn eval_batch(&mut self, points: &[Vec<f64>]) -> Vec<f64> {
        let mapped: Vec<Vec<f64>> = points.iter().map(|p| self.to_box(p)).collect();
        let values: Vec<f64> = mapped
            .par_iter()
            .map(|x| {
                let v = (self.f)(x);
                if v.is_finite() {
                    v
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        for (x, &v) in mapped.into_iter().zip(&values) {
            self.count += 1;
            if v < self.best.1 || self.best.0.is_empty() {
                self.best = (x, v);
            }
            self.trace.push(self.best.1);
        }
        values
    }
}

/// Minimizes `f` over the box with at most `cfg.budget` evaluations.
///
/// Non-finite objective values are treated as `+∞`. The seed only permutes
/// the order in which equal-valued rectangles of one size class are
/// considered, which decides the one that gets divided.
pub fn direct_minimize<F>(f: &F, cfg: &DirectConfig) -> DirectResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = cfg.lower.len();
    assert_eq!(dim, cfg.upper.len(), "bound lengths differ");
    assert!(dim > 0, "empty box");
    assert!(
        cfg.lower.iter().zip(&cfg.upper).all(|(l, u)| l < u),
        "lower bounds must be below upper bounds"
    );
    let budget = cfg.budget.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ev = Evaluator {
        f,
        lower: &cfg.lower,
        width: cfg
            .upper
            .iter()
            .zip(&cfg.lower)
            .map(|(u, l)| u - l)
            .collect(),
        budget,
        count: 0,
        best: (Vec::new(), f64::INFINITY),
        trace: Vec::with_capacity(budget),
    };

    let center = vec![0.5; dim];
    let value = ev.eval_batch(std::slice::from_ref(&center))[0];
    // size classes keyed by total level; larger key = smaller rectangle
    let mut classes: BTreeMap<u32, Vec<Rect>> = BTreeMap::new();
    classes.insert(
        0,
        vec![Rect {
            center,
            levels: vec![0; dim],
            value,
        }],
    );

    while ev.remaining() > 0 {
        let selected = select_potentially_optimal(&mut classes, ev.best.1, cfg.epsilon, &mut rng);
        if selected.is_empty() {
            break;
        }
        for rect in selected {
            if ev.remaining() == 0 {
                classes.entry(rect.level_sum()).or_default().push(rect);
                continue;
            }
            for child in trisect(rect, &mut ev) {
                classes.entry(child.level_sum()).or_default().push(child);
            }
        }
    }

    DirectResult {
        x_best: ev.best.0,
        value_best: ev.best.1,
        evaluations: ev.count,
        trace: ev.trace,
    }
}

fn trisect<F: Fn(&[f64]) -> f64 + Sync>(rect: Rect, ev: &mut Evaluator<'_, F>) -> Vec<Rect> {
    let min_level = *rect.levels.iter().min().expect("non-empty");
    let axis = rect
        .levels
        .iter()
        .position(|&k| k == min_level)
        .expect("min exists");
    let delta = 3f64.powi(-(min_level as i32)) / 3.0;
    let mut left = rect.center.clone();
    left[axis] -= delta;
    let mut right = rect.center.clone();
    right[axis] += delta;
    let points = if ev.remaining() >= 2 {
        vec![left, right]
    } else {
        vec![left]
    };
    let values = ev.eval_batch(&points);
    let mut levels = rect.levels.clone();
    levels[axis] += 1;
    let mut children: Vec<Rect> = points
        .into_iter()
        .zip(values)
        .map(|(center, value)| Rect {
            center,
            levels: levels.clone(),
            value,
        })
        .collect();
    if children.len() == 2 {
        children.push(Rect {
            center: rect.center,
            levels,
            value: rect.value,
        });
    } else {
        // budget ran out mid-split: the right third stays with the parent
        // center, which keeps the parent size class
        children.push(rect);
    }
    children
}

/// Removes and returns one potentially optimal rectangle per qualifying
/// size class.
fn select_potentially_optimal(
    classes: &mut BTreeMap<u32, Vec<Rect>>,
    f_min: f64,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Rect> {
    // (key, size, best value, index of a best rectangle), increasing size
    let mut points: Vec<(u32, f64, f64, usize)> = Vec::new();
    for (&key, rects) in classes.iter().rev() {
        if rects.is_empty() {
            continue;
        }
        let best = rects.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
        let mut ties: Vec<usize> = (0..rects.len())
            .filter(|&i| rects[i].value == best)
            .collect();
        ties.shuffle(rng);
        points.push((key, rects[ties[0]].half_diagonal(), best, ties[0]));
    }
    // start at the largest size class attaining the global minimum value
    let global = points.iter().map(|q| q.2).fold(f64::INFINITY, f64::min);
    let start = points
        .iter()
        .rposition(|p| p.2 == global)
        .expect("at least one rectangle");
    // lower convex hull of (size, value) from `start` towards larger sizes
    let mut hull: Vec<usize> = Vec::new();
    for i in start..points.len() {
        while hull.len() >= 2 {
            let a = points[hull[hull.len() - 2]];
            let b = points[hull[hull.len() - 1]];
            let c = points[i];
            // remove b when it lies on or above segment a-c
            let cross = (b.1 - a.1) * (c.2 - a.2) - (b.2 - a.2) * (c.1 - a.1);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }

    let threshold = f_min - epsilon * f_min.abs();
    let mut chosen = Vec::new();
    for (h, &i) in hull.iter().enumerate() {
        let (_, size, value, _) = points[i];
        let keep = match hull.get(h + 1) {
            // largest rectangle: any slope works
            None => true,
            Some(&next) => {
                let (_, size_next, value_next, _) = points[next];
                let slope = (value_next - value) / (size_next - size);
                value - slope * size <= threshold || !threshold.is_finite()
            }
        };
        if keep {
            chosen.push(i);
        }
    }

    chosen
        .into_iter()
        .map(|i| {
            let (key, _, _, idx) = points[i];
            let rects = classes.get_mut(&key).expect("class exists");
            let rect = rects.swap_remove(idx);
            if rects.is_empty() {
                classes.remove(&key);
            }
            rect
        })
        .collect()
}
