//! Lane-perception confidence and lateral-offset measurement.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::roadnet::{RoadNetwork, Side};
use crate::scenario::WeatherPreset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptionConfig {
    /// Marking window ahead of the ego, `[s + start, s + start + length]`.
    pub window_start: f64,
    pub window_length: f64,
    pub sigma_max: f64,
    pub ema_alpha: f64,
    /// Confidence jitter standard deviation per unit σ.
    pub jitter_gain: f64,
    /// Offset noise standard deviation per unit σ, meters.
    pub offset_gain: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            window_start: 2.0,
            window_length: 20.0,
            sigma_max: 1.0,
            ema_alpha: 0.2,
            jitter_gain: 0.05,
            offset_gain: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptionFrame {
    pub t: f64,
    /// Smoothed confidence.
    pub confidence: f64,
    /// Unsmoothed, jittered confidence of this tick.
    pub confidence_raw: f64,
    pub lateral_offset_meas: f64,
    pub sensor_failed: bool,
}

/// `q · visibility · (1 − min(1, σ/σ_max))`, clamped to `[0, 1]`.
pub fn confidence_from_parts(quality: f64, visibility: f64, sigma: f64, sigma_max: f64) -> f64 {
    let noise = (sigma / sigma_max).clamp(0.0, 1.0);
    (quality * visibility * (1.0 - noise)).clamp(0.0, 1.0)
}

/// Mean of left and right marking quality over the window ahead.
pub fn marking_quality_ahead(net: &RoadNetwork, ego: &VehicleState, cfg: &PerceptionConfig) -> f64 {
    let r = ego.lane_ref;
    let from = r.s + cfg.window_start;
    let to = from + cfg.window_length;
    (net.quality_ahead(r.lane, Side::Left, from, to)
        + net.quality_ahead(r.lane, Side::Right, from, to))
        / 2.0
}

pub fn compute_confidence_raw(
    net: &RoadNetwork,
    ego: &VehicleState,
    weather: &WeatherPreset,
    sigma: f64,
    sensor_failed: bool,
    cfg: &PerceptionConfig,
) -> f64 {
    if sensor_failed {
        return 0.0;
    }
    confidence_from_parts(
        marking_quality_ahead(net, ego, cfg),
        weather.visibility,
        sigma,
        cfg.sigma_max,
    )
}

/// Produces this tick's frame. Two standard normals are drawn on every call
/// so the stream stays aligned regardless of σ or failure state.
#[allow(clippy::too_many_arguments)]
pub fn tick_perception<R: Rng>(
    prev: Option<&PerceptionFrame>,
    raw: f64,
    true_offset: f64,
    sigma: f64,
    sensor_failed: bool,
    t: f64,
    cfg: &PerceptionConfig,
    rng: &mut R,
) -> PerceptionFrame {
    let z_conf: f64 = rng.sample(StandardNormal);
    let z_offset: f64 = rng.sample(StandardNormal);
    let sigma = sigma.max(0.0);
    let jittered = if sensor_failed {
        0.0
    } else {
        (raw + cfg.jitter_gain * sigma * z_conf).clamp(0.0, 1.0)
    };
    let confidence = match prev {
        Some(p) => cfg.ema_alpha * jittered + (1.0 - cfg.ema_alpha) * p.confidence,
        None => jittered,
    };
    let lateral_offset_meas = if sensor_failed {
        prev.map_or(true_offset, |p| p.lateral_offset_meas)
    } else {
        true_offset + cfg.offset_gain * sigma * z_offset
    };
    PerceptionFrame {
        t,
        confidence,
        confidence_raw: jittered,
        lateral_offset_meas,
        sensor_failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parts_formula() {
        assert_eq!(confidence_from_parts(1.0, 1.0, 0.0, 1.0), 1.0);
        assert!((confidence_from_parts(0.7, 0.45, 0.0, 1.0) - 0.315).abs() < 1e-12);
        assert!((confidence_from_parts(1.0, 1.0, 0.3, 1.0) - 0.7).abs() < 1e-12);
        assert_eq!(confidence_from_parts(1.0, 1.0, 2.0, 1.0), 0.0);
    }

    #[test]
    fn ema_and_first_frame() {
        let cfg = PerceptionConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f0 = tick_perception(None, 0.8, 0.0, 0.0, false, 0.0, &cfg, &mut rng);
        assert_eq!(f0.confidence, 0.8);
        let f1 = tick_perception(Some(&f0), 0.3, 0.0, 0.0, false, 0.05, &cfg, &mut rng);
        assert!((f1.confidence - (0.2 * 0.3 + 0.8 * 0.8)).abs() < 1e-12);
        assert_eq!(f1.lateral_offset_meas, 0.0);
    }

    #[test]
    fn failure_zeroes_and_freezes() {
        let cfg = PerceptionConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f0 = tick_perception(None, 0.9, 0.4, 0.5, false, 0.0, &cfg, &mut rng);
        let f1 = tick_perception(Some(&f0), 0.9, 1.5, 0.5, true, 0.05, &cfg, &mut rng);
        assert_eq!(f1.confidence_raw, 0.0);
        assert!(f1.sensor_failed);
        assert_eq!(f1.lateral_offset_meas, f0.lateral_offset_meas);
    }

    #[test]
    fn stream_alignment() {
        let cfg = PerceptionConfig::default();
        let mut a = ChaCha8Rng::seed_from_u64(4);
        let mut b = ChaCha8Rng::seed_from_u64(4);
        tick_perception(None, 0.9, 0.0, 0.0, false, 0.0, &cfg, &mut a);
        tick_perception(None, 0.9, 0.0, 0.7, true, 0.0, &cfg, &mut b);
        assert_eq!(a.gen::<u64>(), b.gen::<u64>());
    }
}
