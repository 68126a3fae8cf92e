use super::matching::{MatchSet, MatcherConfig};
use crate::geometry::Transform2;

/// Outcome of the iterative outlier-removal estimate, with enough detail to
/// audit the pruning loop.
#[derive(Clone, Debug)]
pub struct EstimateReport {
    pub transform: Option<Transform2>,
    /// Pair-set size at the start of each executed iteration.
    pub iteration_sizes: Vec<usize>,
    /// Indices (into the input MatchSet) of pairs used by the final fit.
    pub survivors: Vec<usize>,
}

/// Estimates the rigid transform aligning matched pairs, alternating a
/// closed-form least-squares fit with pruning of pairs whose residual
/// exceeds `delta`. Returns `None` when fewer than `min_matches` pairs
/// remain at the start of any iteration.
pub fn estimate_transform(m: &MatchSet, cfg: &MatcherConfig) -> Option<Transform2> {
    estimate_transform_report(m, None, cfg).transform
}

/// As `estimate_transform`, with an optional guess whose rotation seeds the
/// degenerate (zero-spread) case, and a full report of the pruning loop.
pub fn estimate_transform_report(
    m: &MatchSet,
    guess: Option<&Transform2>,
    cfg: &MatcherConfig,
) -> EstimateReport {
    let fallback_angle = guess.map_or(0.0, |t| t.dtheta);
    let mut live: Vec<usize> = (0..m.pairs.len()).collect();
    let mut iteration_sizes = Vec::with_capacity(cfg.max_iter);

    for _ in 0..cfg.max_iter {
        iteration_sizes.push(live.len());
        if live.len() < cfg.min_matches {
            return EstimateReport {
                transform: None,
                iteration_sizes,
                survivors: live,
            };
        }
        let t = fit_rigid(&m.pairs, &live, fallback_angle).expect("non-empty pair set must fit");
        live.retain(|&i| {
            let (p, q) = m.pairs[i];
            let mapped = t.apply(p);
            (mapped.0 - q.0).hypot(mapped.1 - q.1) <= cfg.delta
        });
    }

    let transform = fit_rigid(&m.pairs, &live, fallback_angle);
    EstimateReport {
        transform,
        iteration_sizes,
        survivors: live,
    }
}

/// Closed-form least-squares rigid fit: centroids plus the rotation angle
/// from the summed cross and dot products of centered pairs. With zero
/// angular signal (all points coincident or exactly cancelling) the rotation
/// falls back to `fallback_angle` and only the translation is fit.
pub fn fit_rigid(
    pairs: &[((f64, f64), (f64, f64))],
    indices: &[usize],
    fallback_angle: f64,
) -> Option<Transform2> {
    if indices.is_empty() {
        return None;
    }
    let n = indices.len() as f64;
    let mut pc = (0.0, 0.0);
    let mut qc = (0.0, 0.0);
    for &i in indices {
        let (p, q) = pairs[i];
        pc.0 += p.0;
        pc.1 += p.1;
        qc.0 += q.0;
        qc.1 += q.1;
    }
    pc = (pc.0 / n, pc.1 / n);
    qc = (qc.0 / n, qc.1 / n);

    let mut s_dot = 0.0;
    let mut s_cross = 0.0;
    for &i in indices {
        let (p, q) = pairs[i];
        let (px, py) = (p.0 - pc.0, p.1 - pc.1);
        let (qx, qy) = (q.0 - qc.0, q.1 - qc.1);
        s_dot += px * qx + py * qy;
        s_cross += px * qy - py * qx;
    }

    let theta = if s_dot.abs() < 1e-12 && s_cross.abs() < 1e-12 {
        fallback_angle
    } else {
        s_cross.atan2(s_dot)
    };
    let (sin, cos) = theta.sin_cos();
    Some(Transform2::new(
        qc.0 - (cos * pc.0 - sin * pc.1),
        qc.1 - (sin * pc.0 + cos * pc.1),
        theta,
    ))
}
