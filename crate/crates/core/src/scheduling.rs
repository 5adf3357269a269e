//! Single-machine scheduling with release dates, `1|r_j|ΣC_j`.
//!
//! The pipeline predicts one value per job, orders jobs by it (the SPT rule
//! on predicted processing times) and optionally improves the order by local
//! search. Jobs are numbered from 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{predict_theta, sample_gaussians, FeatureMatrix, PerturbationConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedError {
    #[error("instance needs at least one job")]
    Empty,
    #[error("job {job}: processing time {value} must be finite and >= 1")]
    BadProcessingTime { job: usize, value: f64 },
    #[error("job {job}: release time {value} must be finite and >= 0")]
    BadReleaseTime { job: usize, value: f64 },
    #[error("{p} processing times but {r} release times")]
    LengthMismatch { p: usize, r: usize },
    #[error("not a permutation of 0..{0}")]
    BadPermutation(usize),
    #[error("brute force limited to {limit} jobs, instance has {actual}")]
    TooLarge { limit: usize, actual: usize },
    #[error("difficulty parameter rho must be positive, got {0}")]
    BadRho(f64),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedInstance {
    p: Vec<f64>,
    r: Vec<f64>,
    rho: f64,
    seed: u64,
}

impl SchedInstance {
    pub fn new(p: Vec<f64>, r: Vec<f64>) -> Result<Self, SchedError> {
        Self::with_meta(p, r, 0.0, 0)
    }

    pub fn with_meta(p: Vec<f64>, r: Vec<f64>, rho: f64, seed: u64) -> Result<Self, SchedError> {
        if p.is_empty() {
            return Err(SchedError::Empty);
        }
        if p.len() != r.len() {
            return Err(SchedError::LengthMismatch {
                p: p.len(),
                r: r.len(),
            });
        }
        if let Some((job, &value)) = p
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 1.0))
        {
            return Err(SchedError::BadProcessingTime { job, value });
        }
        if let Some((job, &value)) = r
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(SchedError::BadReleaseTime { job, value });
        }
        Ok(Self { p, r, rho, seed })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    /// One θ entry per job.
    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn processing_times(&self) -> &[f64] {
        &self.p
    }

    pub fn release_times(&self) -> &[f64] {
        &self.r
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn to_file(&self) -> SchedFile {
        SchedFile {
            n: self.n(),
            rho: self.rho,
            p: self.p.iter().map(|&v| v as i64).collect(),
            r: self.r.iter().map(|&v| v as i64).collect(),
            seed: self.seed,
        }
    }

    pub fn from_file(file: &SchedFile) -> Result<Self, SchedError> {
        if file.p.len() != file.n {
            return Err(SchedError::LengthMismatch {
                p: file.p.len(),
                r: file.n,
            });
        }
        Self::with_meta(
            file.p.iter().map(|&v| v as f64).collect(),
            file.r.iter().map(|&v| v as f64).collect(),
            file.rho,
            file.seed,
        )
    }
}

/// On-disk scheduling instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedFile {
    pub n: usize,
    pub rho: f64,
    pub p: Vec<i64>,
    pub r: Vec<i64>,
    pub seed: u64,
}

/// Processing order of the jobs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self, SchedError> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &j in &order {
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return Err(SchedError::BadPermutation(n));
            }
        }
        Ok(Self(order))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

fn total_completion(x: &SchedInstance, order: &[usize]) -> f64 {
    let mut t = 0.0_f64;
    let mut total = 0.0;
    for &j in order {
        t = t.max(x.r[j]) + x.p[j];
        total += t;
    }
    total
}

/// Total completion time and per-job completions:
/// `C_{j_i} = max(r_{j_i}, C_{j_{i-1}}) + p_{j_i}` with `C_{j_0} = 0`.
pub fn evaluate_schedule(
    x: &SchedInstance,
    s: &Permutation,
) -> Result<(f64, Vec<f64>), SchedError> {
    if s.order().len() != x.n() {
        return Err(SchedError::BadPermutation(x.n()));
    }
    let mut completion = vec![0.0; x.n()];
    let mut t = 0.0_f64;
    for &j in s.order() {
        t = t.max(x.r[j]) + x.p[j];
        completion[j] = t;
    }
    Ok((completion.iter().sum(), completion))
}

/// Jobs by ascending θ, ties by job id.
pub fn spt_layer(theta: &[f64]) -> Permutation {
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| theta[a].total_cmp(&theta[b]).then(a.cmp(&b)));
    Permutation(order)
}

/// Per-job statistics of the preemptive SRPT schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SrptStats {
    pub completion: Vec<f64>,
    pub preemptions: Vec<u32>,
    pub first_start: Vec<f64>,
    /// Machine intervals `(job, start, end)` in time order.
    pub segments: Vec<(usize, f64, f64)>,
}

impl SrptStats {
    pub fn total_completion(&self) -> f64 {
        self.completion.iter().sum()
    }
}

/// Shortest-remaining-processing-time schedule, optimal for the preemptive
/// relaxation. At every release or completion the released unfinished job
/// with least remaining time runs (ties by job id).
pub fn srpt_preemptive(x: &SchedInstance) -> SrptStats {
    let n = x.n();
    let mut by_release: Vec<usize> = (0..n).collect();
    by_release.sort_by(|&a, &b| x.r[a].total_cmp(&x.r[b]).then(a.cmp(&b)));

    let mut remaining = x.p.clone();
    let mut completion = vec![0.0; n];
    let mut preemptions = vec![0u32; n];
    let mut first_start = vec![f64::NAN; n];
    let mut segments: Vec<(usize, f64, f64)> = Vec::new();
    let mut available: Vec<usize> = Vec::new();
    let mut next_release = 0;
    let mut done = 0;
    let mut t = 0.0_f64;
    let mut running: Option<usize> = None;

    while done < n {
        while next_release < n && x.r[by_release[next_release]] <= t {
            available.push(by_release[next_release]);
            next_release += 1;
        }
        let Some(pos) = (0..available.len()).min_by(|&a, &b| {
            let (ja, jb) = (available[a], available[b]);
            remaining[ja].total_cmp(&remaining[jb]).then(ja.cmp(&jb))
        }) else {
            t = x.r[by_release[next_release]];
            continue;
        };
        let job = available[pos];
        if let Some(prev) = running {
            if prev != job && remaining[prev] > 0.0 {
                preemptions[prev] += 1;
            }
        }
        if first_start[job].is_nan() {
            first_start[job] = t;
        }
        running = Some(job);
        let horizon = if next_release < n {
            x.r[by_release[next_release]]
        } else {
            f64::INFINITY
        };
        let end = (t + remaining[job]).min(horizon);
        match segments.last_mut() {
            Some(last) if last.0 == job && last.2 == t => last.2 = end,
            _ => segments.push((job, t, end)),
        }
        if t + remaining[job] <= horizon {
            remaining[job] = 0.0;
            completion[job] = end;
            available.swap_remove(pos);
            running = None;
            done += 1;
        } else {
            remaining[job] -= end - t;
        }
        t = end;
    }
    SrptStats {
        completion,
        preemptions,
        first_start,
        segments,
    }
}

/// Number of per-job features produced by [`features`].
pub const FEATURE_DIM: usize = 11;

/// Rank of each value, counting ties at their highest position:
/// `rank_j = #{k : v_k <= v_j}`.
fn tie_ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| values.iter().filter(|w| *w <= v).count() as f64)
        .collect()
}

/// Per-job features built from rank statistics and the SRPT relaxation.
///
/// Columns: bias, `p/p_max`, `r/max(1, r_max)`, rank of `p`, rank of `r`,
/// rank of `r + p` (ranks divided by `n`), SRPT completion, SRPT first start
/// (both divided by the SRPT makespan), SRPT preemption count / n,
/// `r / Σp`, `p / mean(p)`. Jobs with identical `(p, r)` share the average
/// of their SRPT statistics, so the rows do not depend on job labels.
pub fn features(x: &SchedInstance) -> FeatureMatrix {
    let n = x.n();
    let nf = n as f64;
    let p = &x.p;
    let r = &x.r;
    let p_max = p.iter().cloned().fold(f64::MIN, f64::max);
    let r_max = r.iter().cloned().fold(1.0, f64::max);
    let p_sum: f64 = p.iter().sum();
    let p_mean = p_sum / nf;
    let rp: Vec<f64> = r.iter().zip(p).map(|(a, b)| a + b).collect();
    let rank_p = tie_ranks(p);
    let rank_r = tie_ranks(r);
    let rank_rp = tie_ranks(&rp);

    let srpt = srpt_preemptive(x);
    let horizon = srpt.completion.iter().cloned().fold(f64::MIN, f64::max);
    let mut completion = srpt.completion.clone();
    let mut start = srpt.first_start.clone();
    let mut preempt: Vec<f64> = srpt.preemptions.iter().map(|&k| f64::from(k)).collect();
    for j in 0..n {
        let twins: Vec<usize> = (0..n).filter(|&k| p[k] == p[j] && r[k] == r[j]).collect();
        if twins.len() > 1 {
            let avg = |v: &[f64]| twins.iter().map(|&k| v[k]).sum::<f64>() / twins.len() as f64;
            let (c, s, q) = (
                avg(&srpt.completion),
                avg(&srpt.first_start),
                avg(&srpt
                    .preemptions
                    .iter()
                    .map(|&k| f64::from(k))
                    .collect::<Vec<_>>()),
            );
            completion[j] = c;
            start[j] = s;
            preempt[j] = q;
        }
    }

    let mut data = Vec::with_capacity(n * FEATURE_DIM);
    for j in 0..n {
        data.extend_from_slice(&[
            1.0,
            p[j] / p_max,
            r[j] / r_max,
            rank_p[j] / nf,
            rank_r[j] / nf,
            rank_rp[j] / nf,
            completion[j] / horizon,
            start[j] / horizon,
            preempt[j] / nf,
            r[j] / p_sum,
            p[j] / p_mean,
        ]);
    }
    FeatureMatrix::from_flat(n, FEATURE_DIM, data).expect("features are finite")
}

/// Column of [`features`] holding `p_j / p_max`.
pub const PROCESSING_TIME_COLUMN: usize = 1;

/// First-improvement descent: adjacent swaps scanned left to right, then
/// single-job reinsertions; repeats until neither neighborhood improves.
pub fn local_search(x: &SchedInstance, s: &Permutation) -> Permutation {
    let mut order = s.order().to_vec();
    let n = order.len();
    let mut best = total_completion(x, &order);
    let improves = |candidate: f64, best: f64| candidate < best - 1e-9 * best.abs().max(1.0);
    'descent: loop {
        for i in 0..n.saturating_sub(1) {
            order.swap(i, i + 1);
            let cost = total_completion(x, &order);
            if improves(cost, best) {
                best = cost;
                continue 'descent;
            }
            order.swap(i, i + 1);
        }
        for from in 0..n {
            for to in 0..n {
                if to == from || to + 1 == from || from + 1 == to {
                    // adjacent moves are swaps, already scanned
                    continue;
                }
                let job = order.remove(from);
                order.insert(to, job);
                let cost = total_completion(x, &order);
                if improves(cost, best) {
                    best = cost;
                    continue 'descent;
                }
                let job = order.remove(to);
                order.insert(from, job);
            }
        }
        break;
    }
    Permutation(order)
}

/// Post-processing applied after the SPT layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostProcessing {
    #[default]
    None,
    LocalSearch,
}

/// Features, prediction, SPT and post-processing for a fixed weight vector.
pub fn run_pipeline(
    x: &SchedInstance,
    phi: &FeatureMatrix,
    w: &[f64],
    post: PostProcessing,
) -> Result<(Permutation, f64), SchedError> {
    let theta = predict_theta(w, phi)?;
    let mut s = spt_layer(&theta);
    if post == PostProcessing::LocalSearch {
        s = local_search(x, &s);
    }
    let cost = total_completion(x, s.order());
    Ok((s, cost))
}

/// Best pipeline output over the unperturbed `w` (sample 0) and
/// `nsamples` perturbed weights `w + σZ_k`. Samples run concurrently and
/// are reduced by `(cost, sample index)`.
pub fn perturbed_decode(
    x: &SchedInstance,
    phi: &FeatureMatrix,
    w: &[f64],
    cfg: &PerturbationConfig,
    post: PostProcessing,
) -> Result<(Permutation, f64), SchedError> {
    cfg.validate()?;
    let base = run_pipeline(x, phi, w, post)?;
    if cfg.sigma == 0.0 {
        return Ok(base);
    }
    let z = sample_gaussians(cfg, w.len());
    let runs: Vec<(usize, Permutation, f64)> = z
        .par_iter()
        .enumerate()
        .map(|(k, zk)| {
            let wk: Vec<f64> = w.iter().zip(zk).map(|(a, b)| a + cfg.sigma * b).collect();
            run_pipeline(x, phi, &wk, post).map(|(s, c)| (k + 1, s, c))
        })
        .collect::<Result<_, _>>()?;
    Ok(runs
        .into_iter()
        .chain(std::iter::once((0, base.0, base.1)))
        .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)))
        .map(|(_, s, c)| (s, c))
        .expect("at least the unperturbed run"))
}

/// Maximum job count accepted by [`brute_force_schedule`].
pub const BRUTE_FORCE_JOB_LIMIT: usize = 9;

/// Exact optimum over all permutations (first in lexicographic order on
/// ties).
pub fn brute_force_schedule(x: &SchedInstance) -> Result<(f64, Permutation), SchedError> {
    let n = x.n();
    if n > BRUTE_FORCE_JOB_LIMIT {
        return Err(SchedError::TooLarge {
            limit: BRUTE_FORCE_JOB_LIMIT,
            actual: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = (total_completion(x, &order), order.clone());
    while next_permutation(&mut order) {
        let cost = total_completion(x, &order);
        if cost < best.0 {
            best = (cost, order.clone());
        }
    }
    Ok((best.0, Permutation(best.1)))
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len())
        .rev()
        .find(|&j| v[j] > v[i - 1])
        .expect("pivot has a successor");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// `p_j ~ U{1..100}`, `r_j ~ U{1..⌊50.5·n·ρ⌋}`.
pub fn generate_sched_instance(n: usize, rho: f64, seed: u64) -> Result<SchedInstance, SchedError> {
    if n == 0 {
        return Err(SchedError::Empty);
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(SchedError::BadRho(rho));
    }
    let r_max = ((50.5 * n as f64 * rho).floor() as i64).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: Vec<i64> = (0..n).map(|_| rng.random_range(1..=100)).collect();
    let r: Vec<i64> = (0..n).map(|_| rng.random_range(1..=r_max)).collect();
    SchedInstance::from_file(&SchedFile { n, rho, p, r, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(p: &[f64], r: &[f64]) -> SchedInstance {
        SchedInstance::new(p.to_vec(), r.to_vec()).unwrap()
    }

    fn perm(v: &[usize]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let x = inst(&[2.0, 3.0], &[0.0, 0.0]);
        assert_eq!(
            evaluate_schedule(&x, &perm(&[0, 1])).unwrap(),
            (7.0, vec![2.0, 5.0])
        );
        let x = inst(&[2.0, 3.0], &[4.0, 0.0]);
        assert_eq!(
            evaluate_schedule(&x, &perm(&[1, 0])).unwrap(),
            (9.0, vec![6.0, 3.0])
        );
        let x = inst(&[5.0], &[7.0]);
        assert_eq!(evaluate_schedule(&x, &perm(&[0])).unwrap().0, 12.0);
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![1, 2]).is_err());
        assert!(Permutation::new(vec![2, 0, 1]).is_ok());
    }

    #[test]
    fn spt_examples() {
        assert_eq!(spt_layer(&[3.0, 1.0, 2.0]).order(), &[1, 2, 0]);
        assert_eq!(spt_layer(&[4.0; 4]).order(), &[0, 1, 2, 3]);
    }

    #[test]
    fn srpt_hand_simulation() {
        let x = inst(&[4.0, 1.0], &[0.0, 1.0]);
        let s = srpt_preemptive(&x);
        assert_eq!(s.completion, vec![5.0, 2.0]);
        assert_eq!(s.preemptions, vec![1, 0]);
        assert_eq!(s.first_start, vec![0.0, 1.0]);
        assert_eq!(
            s.segments,
            vec![(0, 0.0, 1.0), (1, 1.0, 2.0), (0, 2.0, 5.0)]
        );
    }

    #[test]
    fn srpt_without_releases_is_spt() {
        let x = inst(&[5.0, 2.0, 9.0, 2.0], &[0.0; 4]);
        let s = srpt_preemptive(&x);
        assert!(s.preemptions.iter().all(|&k| k == 0));
        let spt = evaluate_schedule(&x, &spt_layer(x.processing_times()))
            .unwrap()
            .1;
        assert_eq!(s.completion, spt);
    }

    #[test]
    fn srpt_idle_gap() {
        let x = inst(&[2.0, 3.0], &[0.0, 10.0]);
        let s = srpt_preemptive(&x);
        assert_eq!(s.completion, vec![2.0, 13.0]);
        assert_eq!(s.first_start, vec![0.0, 10.0]);
    }

    #[test]
    fn features_single_job() {
        let x = inst(&[5.0], &[3.0]);
        let phi = features(&x);
        let row = phi.row(0);
        assert_eq!(row[0], 1.0);
        assert_eq!(row[3..6], [1.0, 1.0, 1.0]);
    }

    #[test]
    fn features_identical_jobs_identical_rows() {
        let x = inst(&[4.0, 7.0, 4.0], &[2.0, 0.0, 2.0]);
        let phi = features(&x);
        assert_eq!(phi.row(0), phi.row(2));
    }

    #[test]
    fn features_srpt_columns() {
        let x = inst(&[4.0, 1.0], &[0.0, 1.0]);
        let phi = features(&x);
        // horizon 5; completions (5,2); starts (0,1); preemptions (1,0)/2
        assert_eq!(phi.row(0)[6..9], [1.0, 0.0, 0.5]);
        assert_eq!(phi.row(1)[6..9], [0.4, 0.2, 0.0]);
        assert_eq!(phi.row(0)[1], 1.0);
        assert_eq!(phi.row(1)[10], 1.0 / 2.5);
    }

    #[test]
    fn local_search_examples() {
        let x = inst(&[5.0], &[0.0]);
        assert_eq!(local_search(&x, &perm(&[0])).order(), &[0]);
        let x = inst(&[3.0, 2.0], &[0.0, 0.0]);
        assert_eq!(evaluate_schedule(&x, &perm(&[0, 1])).unwrap().0, 8.0);
        let out = local_search(&x, &perm(&[0, 1]));
        assert_eq!(out.order(), &[1, 0]);
        assert_eq!(evaluate_schedule(&x, &out).unwrap().0, 7.0);
    }

    #[test]
    fn local_search_uses_reinsertion() {
        // moving the long first job to the end needs a reinsertion or a
        // chain of swaps; either way the result is SPT here
        let x = inst(&[9.0, 1.0, 1.0, 1.0], &[0.0; 4]);
        let out = local_search(&x, &perm(&[0, 1, 2, 3]));
        assert_eq!(out.order()[3], 0);
    }

    #[test]
    fn brute_force_small() {
        let x = inst(&[2.0, 3.0], &[0.0, 0.0]);
        let (cost, s) = brute_force_schedule(&x).unwrap();
        assert_eq!((cost, s.order()), (7.0, &[0usize, 1][..]));
        let x = inst(&[2.0], &[1.0]);
        assert_eq!(brute_force_schedule(&x).unwrap().1.order(), &[0]);
        let x = generate_sched_instance(10, 1.0, 0).unwrap();
        assert!(matches!(
            brute_force_schedule(&x),
            Err(SchedError::TooLarge { .. })
        ));
    }

    #[test]
    fn perturbed_decode_sigma_zero_is_plain() {
        let x = generate_sched_instance(12, 0.6, 4).unwrap();
        let phi = features(&x);
        let mut w = vec![0.0; FEATURE_DIM];
        w[PROCESSING_TIME_COLUMN] = 1.0;
        w[2] = 0.7;
        let plain = run_pipeline(&x, &phi, &w, PostProcessing::None).unwrap();
        let cfg = PerturbationConfig {
            sigma: 0.0,
            nsamples: 30,
            seed: 1,
        };
        assert_eq!(
            perturbed_decode(&x, &phi, &w, &cfg, PostProcessing::None).unwrap(),
            plain
        );
        let cfg = PerturbationConfig {
            sigma: 0.5,
            nsamples: 1,
            seed: 1,
        };
        let a = perturbed_decode(&x, &phi, &w, &cfg, PostProcessing::None).unwrap();
        assert_eq!(
            a,
            perturbed_decode(&x, &phi, &w, &cfg, PostProcessing::None).unwrap()
        );
        assert!(a.1 <= plain.1);
    }

    #[test]
    fn generator_ranges() {
        let x = generate_sched_instance(40, 0.4, 12).unwrap();
        assert!(x
            .processing_times()
            .iter()
            .all(|&p| (1.0..=100.0).contains(&p)));
        let r_max = 50.5 * 40.0 * 0.4;
        assert!(x.release_times().iter().all(|&r| r >= 1.0 && r <= r_max));
        assert_eq!(x, generate_sched_instance(40, 0.4, 12).unwrap());
        assert!(generate_sched_instance(5, 0.0, 1).is_err());
    }

    #[test]
    fn instance_file_round_trip() {
        let x = generate_sched_instance(6, 2.0, 3).unwrap();
        let json = serde_json::to_value(x.to_file()).unwrap();
        for key in ["n", "rho", "p", "r", "seed"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let back = SchedInstance::from_file(&serde_json::from_value(json).unwrap()).unwrap();
        assert_eq!(back, x);
    }
}
