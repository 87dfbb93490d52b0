//! DOA mean squared error and attitude mean angular error.

use std::f64::consts::PI;

use capa_core::attitude::AttitudeEstimate;
use capa_core::em::geometry::{angle_between, canonical_azimuth, wave_vector};
use capa_core::em::UnitVec3;
use serde::{Deserialize, Serialize};

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Great-circle distance between two (θ, φ) directions.
pub fn angular_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    angle_between(wave_vector(a.0, a.1).as_vec(), wave_vector(b.0, b.1).as_vec())
}

/// Estimate index assigned to each truth, minimizing the total angular
/// distance. `None` when there are fewer estimates than truths.
pub fn pair_targets(truth: &[(f64, f64)], est: &[(f64, f64)]) -> Option<Vec<usize>> {
    if est.len() < truth.len() {
        return None;
    }
    let m = truth.len();
    let cost: Vec<Vec<f64>> = truth.iter().map(|t| est.iter().map(|e| angular_distance(*t, *e)).collect()).collect();
    // choose which estimates take part, then the best ordering of them
    let mut best: Option<(f64, Vec<usize>)> = None;
    let k = est.len();
    let perms = permutations(m);
    let mut subset: Vec<usize> = (0..m).collect();
    loop {
        for p in &perms {
            let assign: Vec<usize> = p.iter().map(|&i| subset[i]).collect();
            let total: f64 = assign.iter().enumerate().map(|(t, &e)| cost[t][e]).sum();
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                best = Some((total, assign));
            }
        }
        // next m-combination of 0..k in lexicographic order
        let mut i = m;
        loop {
            if i == 0 {
                return best.map(|b| b.1);
            }
            i -= 1;
            if subset[i] < k - m + i {
                break;
            }
        }
        subset[i] += 1;
        for j in i + 1..m {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

/// Estimates reordered to match the truth ordering.
pub fn paired_estimates(truth: &[(f64, f64)], est: &[(f64, f64)]) -> Option<Vec<(f64, f64)>> {
    pair_targets(truth, est).map(|idx| idx.into_iter().map(|i| est[i]).collect())
}

/// Squared azimuth and elevation errors per target after pairing.
pub fn squared_errors(truth: &[(f64, f64)], est: &[(f64, f64)]) -> Option<Vec<(f64, f64)>> {
    let paired = paired_estimates(truth, est)?;
    Some(
        truth
            .iter()
            .zip(&paired)
            .map(|(t, e)| (canonical_azimuth(e.0 - t.0).powi(2), (e.1 - t.1).powi(2)))
            .collect(),
    )
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mse {
    /// Mean over trials of the squared error norm across targets.
    pub theta: f64,
    pub phi: f64,
    /// Per-target mean squared errors.
    pub per_target_theta: Vec<f64>,
    pub per_target_phi: Vec<f64>,
    pub trials: usize,
    /// Trials without a full set of estimates.
    pub excluded: usize,
}

/// MSE over trials; failed trials (`None` or too few estimates) are excluded and counted.
pub fn mse_metric(truth: &[(f64, f64)], trials: &[Option<Vec<(f64, f64)>>]) -> Mse {
    let m = truth.len();
    let mut out = Mse { per_target_theta: vec![0.0; m], per_target_phi: vec![0.0; m], ..Default::default() };
    for est in trials {
        match est.as_deref().and_then(|e| squared_errors(truth, e)) {
            Some(errs) => {
                out.trials += 1;
                for (i, (a, b)) in errs.iter().enumerate() {
                    out.per_target_theta[i] += a;
                    out.per_target_phi[i] += b;
                }
            }
            None => out.excluded += 1,
        }
    }
    if out.trials == 0 {
        out.theta = f64::NAN;
        out.phi = f64::NAN;
        out.per_target_theta.iter_mut().chain(out.per_target_phi.iter_mut()).for_each(|v| *v = f64::NAN);
        return out;
    }
    let n = out.trials as f64;
    out.per_target_theta.iter_mut().chain(out.per_target_phi.iter_mut()).for_each(|v| *v /= n);
    out.theta = out.per_target_theta.iter().sum();
    out.phi = out.per_target_phi.iter().sum();
    out
}

/// arccos of the normalized inner product, clamped into [0, π].
pub fn vector_angle(a: &[f64; 3], b: &[f64; 3]) -> Option<f64> {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let c = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
    Some(c.clamp(-1.0, 1.0).acos())
}

/// Angular errors of one estimate: (scored, other). Blind mode scores the
/// transverse direction modulo sign; known mode scores the better
/// candidate, `other` is the worse one.
pub fn attitude_errors(truth: &UnitVec3, est: &AttitudeEstimate) -> Option<(f64, f64)> {
    est.angular_errors(truth)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mae {
    /// Mean error of the scored direction (best candidate in known mode).
    pub best: f64,
    /// Mean error of the other candidate (equal to `best` in blind mode).
    pub worst: f64,
    pub per_target_best: Vec<Option<f64>>,
    pub per_target_worst: Vec<Option<f64>>,
    /// Known mode: fraction of estimates with two distinct candidates.
    pub ambiguity_rate: f64,
    pub count: usize,
    pub excluded: usize,
}

/// MAE over trials. Each trial holds one optional estimate per target.
pub fn mae_metric(truth: &[UnitVec3], trials: &[Vec<Option<AttitudeEstimate>>]) -> Mae {
    let m = truth.len();
    let mut sums = vec![(0.0, 0.0, 0usize); m];
    let mut out = Mae::default();
    let mut ambiguous = 0usize;
    for trial in trials {
        for (i, est) in trial.iter().enumerate().take(m) {
            match est.as_ref().and_then(|e| attitude_errors(&truth[i], e).map(|r| (e, r))) {
                Some((e, (best, worst))) => {
                    sums[i].0 += best;
                    sums[i].1 += worst;
                    sums[i].2 += 1;
                    out.count += 1;
                    if let AttitudeEstimate::Known { candidates, .. } = e {
                        if candidates[0].angle_to(&candidates[1]) > 1e-9 {
                            ambiguous += 1;
                        }
                    }
                }
                None => out.excluded += 1,
            }
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { f64::NAN } else { s / n as f64 };
    out.per_target_best = sums.iter().map(|s| (s.2 > 0).then(|| s.0 / s.2 as f64)).collect();
    out.per_target_worst = sums.iter().map(|s| (s.2 > 0).then(|| s.1 / s.2 as f64)).collect();
    out.best = mean(sums.iter().map(|s| s.0).sum(), out.count);
    out.worst = mean(sums.iter().map(|s| s.1).sum(), out.count);
    out.ambiguity_rate = mean(ambiguous as f64, out.count);
    debug_assert!(out.count == 0 || (0.0..=PI).contains(&out.best));
    out
}
