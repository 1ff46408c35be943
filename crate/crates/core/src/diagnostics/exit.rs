use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First recorded time with `dist > radius` (strict); `+∞` if none.
pub fn detect_exit(times: &[f64], dist: &[f64], radius: f64) -> Result<f64> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::InvalidArgument(format!("exit radius must be positive, got {radius}")));
    }
    if times.len() != dist.len() {
        return Err(Error::dim("exit scan", times.len(), dist.len()));
    }
    Ok(times
        .iter()
        .zip(dist)
        .find(|(_, &d)| d > radius)
        .map_or(f64::INFINITY, |(&t, _)| t))
}

/// Per-layer first-exit times of a layered model.
///
/// Layer 0 is the output vector (Euclidean distance), layer `k ≥ 1` the hidden
/// matrix `W^(k)` (Frobenius distance). All layers share one radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepExitState {
    /// `(layer, τ^(layer))`, ascending by layer.
    pub layer_tau: Vec<(usize, f64)>,
    pub radius: f64,
    /// `min_k τ^(k)`.
    pub tau: f64,
}

/// Scans per-layer distance series; `layer_dist[j]` pairs a layer index with
/// its distances on the shared time grid.
pub fn detect_exit_deep(
    times: &[f64],
    layer_dist: &[(usize, Vec<f64>)],
    radius: f64,
) -> Result<DeepExitState> {
    let mut layer_tau = Vec::with_capacity(layer_dist.len());
    for (layer, dist) in layer_dist {
        layer_tau.push((*layer, detect_exit(times, dist, radius)?));
    }
    layer_tau.sort_by_key(|(l, _)| *l);
    let tau = layer_tau.iter().map(|(_, t)| *t).fold(f64::INFINITY, f64::min);
    Ok(DeepExitState {
        layer_tau,
        radius,
        tau,
    })
}

/// Radius `√m·R` of the per-layer balls.
pub fn layer_radius(width: usize, r: f64) -> f64 {
    (width as f64).sqrt() * r
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn constant_trajectory_never_exits() {
        assert_eq!(detect_exit(&[0.0, 1.0, 2.0], &[0.0; 3], 0.1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn strict_threshold() {
        let t = [0.0, 0.5, 1.0];
        assert_eq!(detect_exit(&t, &[0.0, 0.4, 0.6], 0.5).unwrap(), 1.0);
        assert_eq!(detect_exit(&t, &[0.0, 0.5, 0.5], 0.5).unwrap(), f64::INFINITY);
        assert!(detect_exit(&t, &[0.0; 3], 0.0).is_err());
    }

    #[test]
    fn deep_layers() {
        let t = [0.0, 1.0, 2.0];
        let s = detect_exit_deep(
            &t,
            &[(0, vec![0.0; 3]), (2, vec![0.0, 0.1, 3.0]), (1, vec![0.0; 3])],
            1.0,
        )
        .unwrap();
        assert_eq!(s.layer_tau, vec![(0, f64::INFINITY), (1, f64::INFINITY), (2, 2.0)]);
        assert_eq!(s.tau, 2.0);
        assert_eq!(layer_radius(16, 0.5), 2.0);
    }

    proptest! {
        #[test]
        fn deep_min_matches_brute_force(
            dists in proptest::collection::vec(proptest::collection::vec(0.0f64..2.0, 12), 1..5),
            radius in 0.1f64..2.0,
        ) {
            let times: Vec<f64> = (0..12).map(|k| k as f64 * 0.5).collect();
            let layers: Vec<(usize, Vec<f64>)> = dists.into_iter().enumerate().collect();
            let s = detect_exit_deep(&times, &layers, radius).unwrap();
            let mut brute = f64::INFINITY;
            for (k, &t) in times.iter().enumerate() {
                if layers.iter().any(|(_, d)| d[k] > radius) {
                    brute = t;
                    break;
                }
            }
            prop_assert_eq!(s.tau, brute);
        }

        #[test]
        fn truncation_after_tau_is_invisible(
            dist in proptest::collection::vec(0.0f64..2.0, 2..30),
            radius in 0.1f64..2.0,
            extra in proptest::collection::vec(0.0f64..5.0, 0..10),
        ) {
            let times: Vec<f64> = (0..dist.len()).map(|k| k as f64).collect();
            let tau = detect_exit(&times, &dist, radius).unwrap();
            if tau.is_finite() {
                let cut = tau as usize + 1;
                prop_assert_eq!(detect_exit(&times[..cut], &dist[..cut], radius).unwrap(), tau);
                let mut longer = dist[..cut].to_vec();
                longer.extend(&extra);
                let t2: Vec<f64> = (0..longer.len()).map(|k| k as f64).collect();
                prop_assert_eq!(detect_exit(&t2, &longer, radius).unwrap(), tau);
            }
        }
    }
}
