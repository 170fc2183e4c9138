use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::sim::{RngStream, SimTime};

/// Shape of a traffic source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrafficKind {
    ConstantRate,
    /// Alternating on/off periods; while on, the source emits at
    /// `mean_rate * (on + off) / on`.
    OnOff {
        on: SimTime,
        off: SimTime,
        /// Draw period lengths from exponentials with the given means instead
        /// of using them verbatim.
        #[serde(default)]
        exponential: bool,
    },
    /// Frame-based VBR: one frame every `1/fps` seconds, I-frames every `gop`
    /// frames `i_frame_ratio` times larger, log-normal size jitter.
    VideoLike {
        #[serde(default = "default_fps")]
        fps: f64,
        #[serde(default = "default_gop")]
        gop: u32,
        #[serde(default = "default_i_ratio")]
        i_frame_ratio: f64,
        #[serde(default = "default_sigma")]
        size_sigma: f64,
    },
}

fn default_fps() -> f64 {
    30.0
}
fn default_gop() -> u32 {
    15
}
fn default_i_ratio() -> f64 {
    4.0
}
fn default_sigma() -> f64 {
    0.3
}

impl TrafficKind {
    pub fn video() -> Self {
        TrafficKind::VideoLike {
            fps: default_fps(),
            gop: default_gop(),
            i_frame_ratio: default_i_ratio(),
            size_sigma: default_sigma(),
        }
    }
}

// No deny_unknown_fields here or on `TrafficKind`: serde rejects every key
// of a flattened struct when either side denies unknown fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeTrafficProfile {
    #[serde(flatten)]
    pub kind: TrafficKind,
    /// Long-run mean in bits per second, before `scale`.
    pub mean_rate: f64,
    /// Runtime multiplier; the live-steering knob.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl UeTrafficProfile {
    pub fn constant(mean_rate: f64) -> Self {
        UeTrafficProfile {
            kind: TrafficKind::ConstantRate,
            mean_rate,
            scale: 1.0,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.mean_rate >= 0.0 && self.mean_rate.is_finite()) {
            out.push(format!("mean_rate must be >= 0, got {}", self.mean_rate));
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            out.push(format!("scale must be >= 0, got {}", self.scale));
        }
        match &self.kind {
            TrafficKind::ConstantRate => {}
            TrafficKind::OnOff { on, .. } => {
                if *on == SimTime::ZERO {
                    out.push("on-off profile needs on > 0".into());
                }
            }
            TrafficKind::VideoLike {
                fps,
                gop,
                i_frame_ratio,
                size_sigma,
            } => {
                if !(*fps > 0.0 && fps.is_finite()) {
                    out.push(format!("fps must be > 0, got {fps}"));
                }
                if *gop == 0 {
                    out.push("gop must be >= 1".into());
                }
                if !(*i_frame_ratio >= 1.0 && i_frame_ratio.is_finite()) {
                    out.push(format!("i_frame_ratio must be >= 1, got {i_frame_ratio}"));
                }
                if !(*size_sigma >= 0.0 && size_sigma.is_finite()) {
                    out.push(format!("size_sigma must be >= 0, got {size_sigma}"));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
enum SourceState {
    Constant,
    OnOff { on: bool, left: SimTime },
    Video { next_frame: u64 },
}

/// Stateful generator for one traffic profile, drawing from its own stream.
#[derive(Debug, Clone)]
pub struct TrafficSource {
    pub profile: UeTrafficProfile,
    rng: RngStream,
    state: SourceState,
    carry_bits: f64,
}

impl TrafficSource {
    pub fn new(profile: UeTrafficProfile, rng: RngStream) -> Self {
        let state = match &profile.kind {
            TrafficKind::ConstantRate => SourceState::Constant,
            TrafficKind::OnOff { on, .. } => SourceState::OnOff {
                on: true,
                left: *on,
            },
            TrafficKind::VideoLike { .. } => SourceState::Video { next_frame: 0 },
        };
        let mut src = TrafficSource {
            profile,
            rng,
            state,
            carry_bits: 0.0,
        };
        if let TrafficKind::OnOff {
            on,
            exponential: true,
            ..
        } = src.profile.kind
        {
            let first = src.draw_period(on);
            src.state = SourceState::OnOff {
                on: true,
                left: first,
            };
        }
        src
    }

    pub fn set_scale(&mut self, scale: f64) {
        self.profile.scale = scale;
    }

    fn draw_period(&mut self, mean: SimTime) -> SimTime {
        let mean_ns = mean.as_nanos() as f64;
        if mean_ns <= 0.0 {
            return SimTime::ZERO;
        }
        let exp = Exp::new(1.0 / mean_ns).expect("positive rate");
        SimTime::from_nanos(exp.sample(&mut self.rng).round().max(1.0) as u64)
    }

    fn emit_bits(&mut self, bits: f64) -> u64 {
        let total = self.carry_bits + bits;
        let bytes = (total / 8.0).floor();
        self.carry_bits = total - bytes * 8.0;
        bytes as u64
    }

    /// Bytes produced over `[start, start + dt)`.
    ///
    /// Random draws do not depend on `scale`, so changing the knob never shifts
    /// the stream.
    pub fn generate(&mut self, start: SimTime, dt: SimTime) -> u64 {
        let scale = self.profile.scale;
        let mean = self.profile.mean_rate;
        match self.profile.kind.clone() {
            TrafficKind::ConstantRate => {
                let bits = mean * dt.as_nanos() as f64 / 1e9;
                self.emit_bits(bits * scale)
            }
            TrafficKind::OnOff {
                on: on_mean,
                off: off_mean,
                exponential,
            } => {
                let period = (on_mean.as_nanos() + off_mean.as_nanos()) as f64;
                let peak = mean * period / on_mean.as_nanos() as f64;
                let mut on_ns = 0u64;
                let mut remaining = dt;
                while remaining > SimTime::ZERO {
                    let SourceState::OnOff { on, left } = self.state else {
                        unreachable!("on-off source in foreign state");
                    };
                    let step = left.min(remaining);
                    if on {
                        on_ns += step.as_nanos();
                    }
                    remaining = remaining - step;
                    let left = left - step;
                    if left == SimTime::ZERO {
                        let next_on = !on;
                        let mean_len = if next_on { on_mean } else { off_mean };
                        let len = if exponential {
                            self.draw_period(mean_len)
                        } else {
                            mean_len
                        };
                        // A zero-length period flips again on the next pass.
                        self.state = SourceState::OnOff {
                            on: next_on,
                            left: len,
                        };
                    } else {
                        self.state = SourceState::OnOff { on, left };
                    }
                }
                let bits = peak * on_ns as f64 / 1e9;
                self.emit_bits(bits * scale)
            }
            TrafficKind::VideoLike {
                fps,
                gop,
                i_frame_ratio,
                size_sigma,
            } => {
                let SourceState::Video { mut next_frame } = self.state else {
                    unreachable!("video source in foreign state");
                };
                let mean_frame_bytes = mean / fps / 8.0;
                // Keep the GOP average equal to the mean frame size.
                let gop_f = gop as f64;
                let p_frame = mean_frame_bytes * gop_f / (i_frame_ratio + gop_f - 1.0);
                let jitter = LogNormal::new(-size_sigma * size_sigma / 2.0, size_sigma)
                    .expect("valid log-normal");
                let end = (start + dt).as_nanos();
                let mut bytes = 0u64;
                loop {
                    let at = (next_frame as f64 * 1e9 / fps).round() as u64;
                    if at >= end {
                        break;
                    }
                    let base = if next_frame % gop as u64 == 0 {
                        p_frame * i_frame_ratio
                    } else {
                        p_frame
                    };
                    let draw: f64 = jitter.sample(&mut self.rng);
                    if at >= start.as_nanos() {
                        bytes += self.emit_bits(base * draw * 8.0 * scale);
                    }
                    next_frame += 1;
                }
                self.state = SourceState::Video { next_frame };
                bytes
            }
        }
    }
}
