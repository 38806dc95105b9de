//! Delayed, lossy V2V channel.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::merge_rules::{CoopMessage, CoopReply};

const DELIVERY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "message", rename_all = "snake_case")]
pub enum V2vPayload {
    Request(CoopMessage),
    Reply(CoopReply),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<T> {
    pub sent_at: f64,
    pub payload: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelOutcome<T> {
    pub delivered: Vec<Envelope<T>>,
    pub dropped: Vec<Envelope<T>>,
}

/// Releases every pending message whose `sent_at + delay <= t`, in send
/// order. Each released message is dropped with `drop_probability`, one
/// draw per message.
pub fn channel_step<T, R: Rng>(
    pending: &mut VecDeque<Envelope<T>>,
    t: f64,
    delay: f64,
    drop_probability: f64,
    rng: &mut R,
) -> ChannelOutcome<T> {
    let mut out = ChannelOutcome {
        delivered: Vec::new(),
        dropped: Vec::new(),
    };
    while pending
        .front()
        .is_some_and(|m| m.sent_at + delay <= t + DELIVERY_EPS)
    {
        let msg = pending.pop_front().expect("front checked");
        if rng.gen::<f64>() < drop_probability {
            out.dropped.push(msg);
        } else {
            out.delivered.push(msg);
        }
    }
    out
}

/// Channel state owned by one simulation run.
#[derive(Debug, Clone)]
pub struct Channel<T> {
    pub delay: f64,
    pub drop_probability: f64,
    rng: ChaCha8Rng,
    pending: VecDeque<Envelope<T>>,
}

impl<T> Channel<T> {
    pub fn new(delay: f64, drop_probability: f64, seed: u64) -> Self {
        Self {
            delay,
            drop_probability,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: VecDeque::new(),
        }
    }

    pub fn send(&mut self, t: f64, payload: T) {
        self.pending.push_back(Envelope {
            sent_at: t,
            payload,
        });
    }

    pub fn step(&mut self, t: f64) -> ChannelOutcome<T> {
        channel_step(
            &mut self.pending,
            t,
            self.delay,
            self.drop_probability,
            &mut self.rng,
        )
    }

    pub fn in_flight(&self) -> usize {
        self.pending.len()
    }
}
