//! ISAC ranging chain: chirp pulse, echo channel, matched filter, distance
//! estimate and the probabilistic sensing decision.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::IsacConfig;
use crate::error::{Result, SimError};
use crate::model::Point;

/// Minimum pulse length accepted by [`generate_chirp`].
pub const MIN_PULSE_SAMPLES: usize = 64;

/// Unit-modulus linear FM pulse at complex baseband.
#[derive(Debug, Clone, PartialEq)]
pub struct ChirpSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub bandwidth: f64,
    pub duration: f64,
}

impl ChirpSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Received samples plus the channel's ground truth.
///
/// `truth_delay` is kept for scoring; the estimator only ever sees `samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoObservation {
    pub samples: Vec<Complex64>,
    pub snr_db: f64,
    /// Round-trip delay in seconds.
    pub truth_delay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionResult {
    pub estimated_distance: f64,
    pub peak_lag: usize,
    pub peak_magnitude: f64,
    pub detected: bool,
}

/// Sweeps -B/2..B/2 over the pulse: `phase(n) = pi (B/T) (n Ts - T/2)^2`.
pub fn generate_chirp(isac: &IsacConfig) -> Result<ChirpSignal> {
    let n = isac.pulse_samples();
    if n < MIN_PULSE_SAMPLES {
        return Err(SimError::Setup(format!(
            "chirp has {n} samples, need at least {MIN_PULSE_SAMPLES}"
        )));
    }
    let ts = 1.0 / isac.sample_rate;
    let t = isac.pulse_duration;
    let k = PI * isac.chirp_bandwidth / t;
    let samples = (0..n)
        .map(|i| {
            let tau = i as f64 * ts - t / 2.0;
            Complex64::from_polar(1.0, k * tau * tau)
        })
        .collect();
    Ok(ChirpSignal {
        samples,
        sample_rate: isac.sample_rate,
        bandwidth: isac.chirp_bandwidth,
        duration: t,
    })
}

/// Integer-sample round-trip delay for a target at `distance`.
pub fn delay_samples(distance: f64, isac: &IsacConfig) -> usize {
    (2.0 * distance / isac.wave_speed * isac.sample_rate).round() as usize
}

/// Correlation lags needed to observe targets out to `max_range`.
pub fn observation_lags(max_range: f64, isac: &IsacConfig) -> usize {
    (2.0 * max_range / isac.wave_speed * isac.sample_rate).ceil() as usize
}

/// Delays the pulse by the round trip to `distance` inside a window of
/// `signal.len() + max_lag` samples and adds complex white Gaussian noise.
pub fn simulate_echo<R: Rng + ?Sized>(
    signal: &ChirpSignal,
    distance: f64,
    isac: &IsacConfig,
    max_lag: usize,
    rng: &mut R,
) -> Result<EchoObservation> {
    if !(distance >= 0.0) {
        return Err(SimError::Input(format!("distance must be >= 0, got {distance}")));
    }
    let delay = delay_samples(distance, isac);
    if delay > max_lag {
        return Err(SimError::Window { delay, max_lag });
    }
    let mut samples = vec![Complex64::new(0.0, 0.0); signal.len() + max_lag];
    samples[delay..delay + signal.len()].copy_from_slice(&signal.samples);

    if !isac.is_noiseless() {
        // Unit signal power, so the noise variance is 10^(-snr/10).
        let sigma = (10f64.powf(-isac.snr_db / 10.0) / 2.0).sqrt();
        for s in samples.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *s += Complex64::new(re * sigma, im * sigma);
        }
    }

    Ok(EchoObservation {
        samples,
        snr_db: isac.snr_db,
        truth_delay: 2.0 * distance / isac.wave_speed,
    })
}

/// `|y[k]|` for `y[k] = sum_n echo[n] conj(signal[n - k])` over every lag
/// where the pulse fits inside the echo.
pub fn correlation_profile(signal: &ChirpSignal, echo: &[Complex64]) -> Result<Vec<f64>> {
    if echo.len() <= signal.len() {
        return Err(SimError::Precondition(format!(
            "echo ({} samples) must be longer than the pulse ({})",
            echo.len(),
            signal.len()
        )));
    }
    let n = signal.len();
    Ok((0..=echo.len() - n)
        .map(|k| {
            echo[k..k + n]
                .iter()
                .zip(&signal.samples)
                .map(|(e, s)| e * s.conj())
                .sum::<Complex64>()
                .norm()
        })
        .collect())
}

/// Lag of the correlation peak and its magnitude; the lowest lag wins ties.
pub fn matched_filter_delay(signal: &ChirpSignal, echo: &[Complex64]) -> Result<(usize, f64)> {
    if echo.iter().all(|s| s.re == 0.0 && s.im == 0.0) {
        return Err(SimError::Degenerate("echo is all zeros".into()));
    }
    let profile = correlation_profile(signal, echo)?;
    let mut best = (0, profile[0]);
    for (k, &m) in profile.iter().enumerate().skip(1) {
        if m > best.1 {
            best = (k, m);
        }
    }
    Ok(best)
}

pub fn estimate_distance(peak_lag: usize, isac: &IsacConfig) -> f64 {
    isac.wave_speed * peak_lag as f64 / (2.0 * isac.sample_rate)
}

/// Elfes-style sensing probability: certain inside `r_s - r_e`, decaying
/// as `exp(-lambda a^beta)` across the uncertain annulus, zero beyond.
pub fn detection_probability(distance: f64, sensing_range: f64, isac: &IsacConfig) -> f64 {
    let inner = sensing_range - isac.elfes_r_uncertain;
    let outer = sensing_range + isac.elfes_r_uncertain;
    if distance <= inner {
        1.0
    } else if distance <= outer {
        (-isac.elfes_lambda * (distance - inner).powf(isac.elfes_beta)).exp()
    } else {
        0.0
    }
}

pub fn probabilistic_detect<R: Rng + ?Sized>(
    distance: f64,
    sensing_range: f64,
    isac: &IsacConfig,
    rng: &mut R,
) -> bool {
    let p = detection_probability(distance, sensing_range, isac);
    rng.random::<f64>() < p
}

/// Closest MCV by true distance, lower id on ties.
pub fn nearest_mcv(device: Point, mcvs: &[(usize, Point)]) -> Option<(usize, f64)> {
    mcvs.iter()
        .map(|(id, p)| (*id, p.distance(&device)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}

/// Precomputed pulse and window for repeated ranging attempts.
#[derive(Debug, Clone)]
pub struct IsacSensor {
    pub config: IsacConfig,
    pub sensing_range: f64,
    pub chirp: ChirpSignal,
    pub max_lag: usize,
}

impl IsacSensor {
    /// The window covers twice the outer sensing radius.
    pub fn new(config: &IsacConfig, sensing_range: f64) -> Result<Self> {
        let chirp = generate_chirp(config)?;
        let reach = sensing_range + config.elfes_r_uncertain;
        Ok(Self {
            config: config.clone(),
            sensing_range,
            chirp,
            max_lag: observation_lags(2.0 * reach, config).max(1),
        })
    }

    pub fn reach(&self) -> f64 {
        self.sensing_range + self.config.elfes_r_uncertain
    }

    /// Full chain against a target at `distance`; detection is gated on the
    /// estimated distance.
    pub fn sense<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &self,
        distance: f64,
        noise_rng: &mut R1,
        detect_rng: &mut R2,
    ) -> Result<DetectionResult> {
        let echo = simulate_echo(&self.chirp, distance, &self.config, self.max_lag, noise_rng)?;
        let (peak_lag, peak_magnitude) = matched_filter_delay(&self.chirp, &echo.samples)?;
        let estimated_distance = estimate_distance(peak_lag, &self.config);
        let detected =
            probabilistic_detect(estimated_distance, self.sensing_range, &self.config, detect_rng);
        Ok(DetectionResult {
            estimated_distance,
            peak_lag,
            peak_magnitude,
            detected,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{seeded_stream, RngStream};

    fn noiseless() -> IsacConfig {
        IsacConfig {
            snr_db: f64::INFINITY,
            ..Default::default()
        }
    }

    #[test]
    fn chirp_is_unit_modulus_with_expected_length() {
        let c = generate_chirp(&IsacConfig::default()).unwrap();
        assert_eq!(c.len(), 1000);
        assert!(c.samples.iter().all(|s| (s.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn short_chirp_rejected() {
        let cfg = IsacConfig {
            pulse_duration: 0.5e-6,
            ..Default::default()
        };
        assert!(matches!(generate_chirp(&cfg), Err(SimError::Setup(_))));
    }

    #[test]
    fn autocorrelation_peak_equals_length() {
        let c = generate_chirp(&IsacConfig::default()).unwrap();
        let mut echo = c.samples.clone();
        echo.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), 8));
        let (lag, mag) = matched_filter_delay(&c, &echo).unwrap();
        assert_eq!(lag, 0);
        assert!((mag - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn echo_delay_bins() {
        let cfg = noiseless();
        let c = generate_chirp(&cfg).unwrap();
        let mut rng = seeded_stream(0, RngStream::Noise);
        let e = simulate_echo(&c, 0.0, &cfg, 30, &mut rng).unwrap();
        assert_eq!(e.truth_delay, 0.0);
        assert_eq!(matched_filter_delay(&c, &e.samples).unwrap().0, 0);

        assert_eq!(delay_samples(25.0, &cfg), 17);
        let e = simulate_echo(&c, 25.0, &cfg, 30, &mut rng).unwrap();
        assert!((e.truth_delay - 166.782e-9).abs() < 1e-12);
        assert_eq!(&e.samples[17..1017], &c.samples[..]);
        assert!(e.samples[..17].iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn window_error_when_delay_too_long() {
        let cfg = noiseless();
        let c = generate_chirp(&cfg).unwrap();
        let mut rng = seeded_stream(0, RngStream::Noise);
        assert!(matches!(
            simulate_echo(&c, 100.0, &cfg, 10, &mut rng),
            Err(SimError::Window { delay: 67, max_lag: 10 })
        ));
    }

    #[test]
    fn noiseless_peak_at_true_shift() {
        let cfg = noiseless();
        let c = generate_chirp(&cfg).unwrap();
        let mut echo = vec![Complex64::new(0.0, 0.0); 1000 + 150];
        echo[100..1100].copy_from_slice(&c.samples);
        assert_eq!(matched_filter_delay(&c, &echo).unwrap().0, 100);
    }

    #[test]
    fn degenerate_echo_rejected() {
        let c = generate_chirp(&IsacConfig::default()).unwrap();
        let echo = vec![Complex64::new(0.0, 0.0); 1100];
        assert!(matches!(matched_filter_delay(&c, &echo), Err(SimError::Degenerate(_))));
        assert!(matched_filter_delay(&c, &c.samples).is_err());
    }

    #[test]
    fn distance_conversion() {
        let cfg = IsacConfig::default();
        assert_eq!(estimate_distance(0, &cfg), 0.0);
        assert!((estimate_distance(17, &cfg) - 25.48236).abs() < 1e-4);
        assert!((estimate_distance(1, &cfg) - 1.49896).abs() < 1e-5);
        assert_eq!(estimate_distance(1, &cfg), cfg.range_bin());
    }

    #[test]
    fn elfes_model_regions() {
        let cfg = IsacConfig::default();
        assert_eq!(detection_probability(15.0, 25.0, &cfg), 1.0);
        assert_eq!(detection_probability(35.0, 25.0, &cfg), 0.0);
        assert!((detection_probability(25.0, 25.0, &cfg) - (-1.0f64).exp()).abs() < 1e-15);
        let mut rng = seeded_stream(4, RngStream::Detection);
        assert!((0..100).all(|_| probabilistic_detect(15.0, 25.0, &cfg, &mut rng)));
        assert!((0..100).all(|_| !probabilistic_detect(35.0, 25.0, &cfg, &mut rng)));
    }

    #[test]
    fn nearest_mcv_tie_breaks_by_id() {
        let mcvs = [(2, Point::new(10.0, 0.0)), (1, Point::new(-10.0, 0.0)), (0, Point::new(30.0, 0.0))];
        assert_eq!(nearest_mcv(Point::default(), &mcvs), Some((1, 10.0)));
        assert_eq!(nearest_mcv(Point::default(), &[]), None);
    }

    #[test]
    fn sensor_detects_close_mcv() {
        let sensor = IsacSensor::new(&noiseless(), 25.0).unwrap();
        let mut n = seeded_stream(1, RngStream::Noise);
        let mut d = seeded_stream(1, RngStream::Detection);
        let r = sensor.sense(10.0, &mut n, &mut d).unwrap();
        assert!(r.detected);
        assert_eq!(r.peak_lag, 7);
        assert_eq!(r.estimated_distance, estimate_distance(7, &sensor.config));
    }
}
