use serde::{Deserialize, Serialize};

use super::{
    Answer, Attribute, CorpusConfig, CH_ILLUMINATION, CH_OCCLUSION, CH_POSITION, CH_TOOL,
    LATENT_CHANNELS,
};
use crate::rng::SplitMix64;

/// One latent event of a clip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub attribute: Attribute,
    pub value: Answer,
    /// Frames on which the event is active.
    pub active: Vec<bool>,
    /// Position step for motion, jitter amplitude for a stationary scope,
    /// 1 for flag events.
    pub magnitude: f64,
    /// Per-frame level of the event's channel before noise.
    pub track: Vec<f64>,
    /// Patches the channel is drawn on.
    pub patches: Vec<bool>,
}

impl EventSpec {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn reversed(&self) -> EventSpec {
        let rev = |v: &[bool]| v.iter().rev().copied().collect::<Vec<_>>();
        EventSpec {
            attribute: self.attribute,
            value: self.value.reversed(),
            active: rev(&self.active),
            magnitude: self.magnitude,
            track: self.track.iter().rev().copied().collect(),
            patches: self.patches.clone(),
        }
    }
}

fn active_mask(cfg: &CorpusConfig, positive: bool, rng: &mut SplitMix64) -> Vec<bool> {
    let t = cfg.frames;
    let mut mask = vec![false; t];
    if positive {
        let len = cfg.min_active + rng.below(t - cfg.min_active + 1);
        let start = rng.below(t - len + 1);
        mask[start..start + len].iter_mut().for_each(|m| *m = true);
    } else {
        let k = rng.below(cfg.max_inactive + 1);
        let mut frames: Vec<usize> = (0..t).collect();
        rng.shuffle(&mut frames);
        for &f in &frames[..k] {
            mask[f] = true;
        }
    }
    mask
}

fn motion_event(cfg: &CorpusConfig, value: Answer, rng: &mut SplitMix64) -> EventSpec {
    let active = active_mask(cfg, value.is_positive(), rng);
    let base = rng.uniform(-1.0, 1.0);
    let (magnitude, track) = match value {
        Answer::Advancing | Answer::Withdrawing => {
            let dir = if value == Answer::Advancing {
                1.0
            } else {
                -1.0
            };
            let step = rng.uniform(cfg.step_min, cfg.step_max);
            let start = active.iter().position(|&a| a).unwrap_or(0);
            let len = active.iter().filter(|&&a| a).count();
            // Centred on `base`, so reversing a clip maps the value multiset
            // of one direction onto an equally likely one of the other.
            let mid = len.saturating_sub(1) as f64 / 2.0;
            let track = (0..cfg.frames)
                .map(|t| {
                    let k = t.saturating_sub(start).min(len.saturating_sub(1));
                    base + dir * step * (k as f64 - mid)
                })
                .collect();
            (step, track)
        }
        _ => {
            let track = active
                .iter()
                .map(|&a| {
                    if a {
                        let sign = if rng.below(2) == 0 { -1.0 } else { 1.0 };
                        base + sign * cfg.jitter * rng.uniform(0.5, 1.0)
                    } else {
                        base
                    }
                })
                .collect();
            (cfg.jitter, track)
        }
    };
    EventSpec {
        attribute: Attribute::Motion,
        value,
        active,
        magnitude,
        track,
        patches: vec![true; cfg.patches],
    }
}

fn flag_event(
    cfg: &CorpusConfig,
    attribute: Attribute,
    value: Answer,
    rng: &mut SplitMix64,
) -> EventSpec {
    let active = active_mask(cfg, value.is_positive(), rng);
    let patches = if attribute == Attribute::Tool {
        let mut p: Vec<bool> = (0..cfg.patches).map(|_| rng.below(2) == 1).collect();
        if !p.iter().any(|&x| x) {
            let i = rng.below(cfg.patches);
            p[i] = true;
        }
        p
    } else {
        vec![true; cfg.patches]
    };
    EventSpec {
        attribute,
        value,
        track: active.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect(),
        active,
        magnitude: 1.0,
        patches,
    }
}

/// Draws one event per attribute. `fixed` pins the value of one attribute;
/// the others are drawn uniformly.
pub fn sample_events(
    cfg: &CorpusConfig,
    fixed: Option<Answer>,
    rng: &mut SplitMix64,
) -> Vec<EventSpec> {
    Attribute::ALL
        .iter()
        .map(|&attr| {
            let value = match fixed {
                Some(a) if a.attribute() == attr => a,
                _ => {
                    let options = attr.answers();
                    options[rng.below(options.len())]
                }
            };
            match attr {
                Attribute::Motion => motion_event(cfg, value, rng),
                _ => flag_event(cfg, attr, value, rng),
            }
        })
        .collect()
}

/// `[T, P, D_raw]` features: latent channels from the events, then
/// Gaussian noise channels.
pub fn render_features(cfg: &CorpusConfig, events: &[EventSpec], rng: &mut SplitMix64) -> Vec<f32> {
    let (t, p, d) = (cfg.frames, cfg.patches, cfg.d_raw);
    let mut out = vec![0f32; t * p * d];
    let channel = |attr: Attribute| match attr {
        Attribute::Motion => CH_POSITION,
        Attribute::Tool => CH_TOOL,
        Attribute::Occlusion => CH_OCCLUSION,
        Attribute::Illumination => CH_ILLUMINATION,
    };
    for fi in 0..t {
        for pi in 0..p {
            let base = (fi * p + pi) * d;
            for ev in events {
                let level = if ev.patches[pi] { ev.track[fi] } else { 0.0 };
                out[base + channel(ev.attribute)] = level as f32;
            }
            for c in LATENT_CHANNELS..d {
                out[base + c] = (cfg.noise_std * rng.normal()) as f32;
            }
        }
    }
    out
}
