//! Synthetic head-position traces.
//!
//! A momentum random walk: per-axis velocity follows an AR(1) process pulled
//! toward a slowly wandering anchor, with occasional smooth velocity pulses
//! (glances, leans, steps) layered on top. Output is bit-identical for a given
//! profile and seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::Vec3;

use super::{PoseSample, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    /// Seated viewing: small drifts, mostly horizontal.
    Seated,
    /// Room-scale play: walking plus fast bursts.
    Roomscale,
}

impl std::str::FromStr for ProfileKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seated" => Ok(Self::Seated),
            "roomscale" => Ok(Self::Roomscale),
            other => Err(format!(
                "unknown profile `{other}` (expected seated or roomscale)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthProfile {
    pub kind: ProfileKind,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub seed: u64,
}

impl SynthProfile {
    pub fn new(kind: ProfileKind, duration_s: f64, rate_hz: f64, seed: u64) -> Self {
        Self {
            kind,
            duration_s,
            rate_hz,
            seed,
        }
    }

    pub fn sample_count(&self) -> usize {
        ((self.duration_s * self.rate_hz).round() as usize).max(2)
    }
}

/// Motion constants, SI units.
struct Dynamics {
    box_min: Vec3,
    box_max: Vec3,
    start: Vec3,
    /// Velocity decorrelation time, seconds.
    tau_v: f64,
    /// Stationary per-axis velocity spread of the drift, m/s.
    sigma_v: Vec3,
    /// Pull of the position toward the anchor, 1/s².
    spring: f64,
    /// Anchor random-walk spread, m/√s.
    anchor_sigma: f64,
    /// Distance the anchor keeps from the box walls, meters.
    anchor_margin: f64,
    /// Expected pulses per second.
    pulse_rate: f64,
    pulse_duration: (f64, f64),
    pulse_speed: (f64, f64),
    /// Vertical share of a pulse direction.
    pulse_vertical: f64,
}

impl Dynamics {
    fn for_kind(kind: ProfileKind) -> Self {
        match kind {
            ProfileKind::Seated => Self {
                box_min: Vec3::new(-0.5, 0.7, -0.5),
                box_max: Vec3::new(0.5, 1.7, 0.5),
                start: Vec3::new(0.0, 1.2, 0.0),
                tau_v: 0.4,
                sigma_v: Vec3::new(0.05, 0.015, 0.05),
                spring: 1.0,
                anchor_sigma: 0.01,
                anchor_margin: 0.3,
                pulse_rate: 1.0 / 20.0,
                pulse_duration: (0.6, 1.2),
                pulse_speed: (0.15, 0.4),
                pulse_vertical: 0.25,
            },
            ProfileKind::Roomscale => Self {
                box_min: Vec3::new(-1.5, 1.0, -1.5),
                box_max: Vec3::new(1.5, 2.0, 1.5),
                start: Vec3::new(0.0, 1.6, 0.0),
                tau_v: 0.6,
                sigma_v: Vec3::new(0.14, 0.03, 0.14),
                spring: 0.3,
                anchor_sigma: 0.08,
                anchor_margin: 0.4,
                pulse_rate: 1.0 / 5.0,
                pulse_duration: (0.3, 0.8),
                pulse_speed: (0.8, 2.0),
                pulse_vertical: 0.2,
            },
        }
    }
}

struct Pulse {
    dir: Vec3,
    peak: f64,
    duration: f64,
    elapsed: f64,
}

impl Pulse {
    /// Raised-cosine speed profile: zero velocity and acceleration at both ends.
    fn velocity(&self) -> Vec3 {
        let phase = (std::f64::consts::PI * self.elapsed / self.duration).sin();
        self.dir * (self.peak * phase * phase)
    }
}

/// Generates a trace from `profile`. Deterministic in the profile.
pub fn generate_synthetic_trace(profile: &SynthProfile) -> Trace {
    let dynamics = Dynamics::for_kind(profile.kind);
    let n = profile.sample_count();
    let dt = 1.0 / profile.rate_hz;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);

    let persistence = (-dt / dynamics.tau_v).exp();
    let drive = dynamics.sigma_v * (1.0 - persistence * persistence).sqrt();
    let anchor_lo = dynamics.box_min.add_scalar(dynamics.anchor_margin);
    let anchor_hi = dynamics.box_max.add_scalar(-dynamics.anchor_margin);

    let mut pos = dynamics.start;
    let mut drift = Vec3::zeros();
    let mut anchor = dynamics.start;
    let mut pulse: Option<Pulse> = None;
    let mut samples = Vec::with_capacity(n);

    for k in 0..n {
        samples.push(PoseSample {
            t: k as f64 * dt,
            pos,
        });

        let noise = Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        drift = drift * persistence + drive.component_mul(&noise);
        drift += (anchor - pos) * (dynamics.spring * dt);

        let step_anchor = Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        anchor += step_anchor * (dynamics.anchor_sigma * dt.sqrt());
        anchor = anchor.sup(&anchor_lo).inf(&anchor_hi);

        if pulse.is_none() && rng.gen::<f64>() < dynamics.pulse_rate * dt {
            pulse = Some(start_pulse(&dynamics, &mut rng, &pos));
        }
        let mut velocity = drift;
        if let Some(p) = pulse.as_mut() {
            velocity += p.velocity();
            p.elapsed += dt;
            if p.elapsed >= p.duration {
                pulse = None;
            }
        }

        pos += velocity * dt;
        // Walls: stop at the boundary and kill the outward drift.
        for i in 0..3 {
            if pos[i] < dynamics.box_min[i] {
                pos[i] = dynamics.box_min[i];
                drift[i] = drift[i].max(0.0);
            } else if pos[i] > dynamics.box_max[i] {
                pos[i] = dynamics.box_max[i];
                drift[i] = drift[i].min(0.0);
            }
        }
    }

    let label = format!("{:?}-{}", profile.kind, profile.seed).to_lowercase();
    Trace::new(profile.rate_hz, samples, label)
        .expect("generator output satisfies trace invariants")
}

fn start_pulse(d: &Dynamics, rng: &mut ChaCha8Rng, pos: &Vec3) -> Pulse {
    let heading = rng.gen_range(0.0..std::f64::consts::TAU);
    let vertical = rng.gen_range(-d.pulse_vertical..=d.pulse_vertical);
    let mut dir = Vec3::new(heading.cos(), vertical, heading.sin()).normalize();
    let peak = rng.gen_range(d.pulse_speed.0..d.pulse_speed.1);
    let duration = rng.gen_range(d.pulse_duration.0..d.pulse_duration.1);
    // A raised-cosine pulse travels peak·duration/2; aim it away from walls it
    // would cross.
    let travel = peak * duration / 2.0;
    let center = (d.box_min + d.box_max) / 2.0;
    for i in 0..3 {
        let end = pos[i] + dir[i] * travel;
        if end < d.box_min[i] || end > d.box_max[i] {
            dir[i] = (center[i] - pos[i]).signum() * dir[i].abs();
        }
    }
    Pulse {
        dir,
        peak,
        duration,
        elapsed: 0.0,
    }
}
