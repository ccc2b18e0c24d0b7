//! Unreliable report transport: each message is independently dropped with a
//! fixed probability, reproducibly from a seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A message channel that loses each message with probability
/// `loss_probability`, deterministically for a given seed.
#[derive(Debug, Clone)]
pub struct LossyChannel {
    rng: ChaCha8Rng,
    loss_probability: f64,
    sent: u64,
    dropped: u64,
}

impl LossyChannel {
    /// `loss_probability` is clamped into `[0, 1]`; zero makes the channel
    /// perfectly reliable.
    pub fn new(loss_probability: f64, seed: u64) -> Self {
        LossyChannel {
            rng: ChaCha8Rng::seed_from_u64(seed),
            loss_probability: loss_probability.clamp(0.0, 1.0),
            sent: 0,
            dropped: 0,
        }
    }

    /// Attempts delivery: `None` means the network ate the message.
    pub fn transmit<T>(&mut self, message: T) -> Option<T> {
        self.sent += 1;
        // Draw even when loss is 0 so enabling loss never shifts the
        // remaining random sequence.
        let roll: f64 = self.rng.gen();
        if roll < self.loss_probability {
            self.dropped += 1;
            None
        } else {
            Some(message)
        }
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn delivered(&self) -> u64 {
        self.sent - self.dropped
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_rate_matches_the_probability() {
        let mut ch = LossyChannel::new(0.2, 42);
        for i in 0..1000u32 {
            ch.transmit(i);
        }
        assert_eq!(ch.sent(), 1000);
        // Binomial(1000, 0.2): mean 200, sigma ~12.65; stay within 3 sigma.
        let dropped = ch.dropped() as f64;
        assert!((dropped - 200.0).abs() < 38.0, "dropped {dropped}");
    }

    #[test]
    fn same_seed_drops_the_same_messages() {
        let pattern = |seed| {
            let mut ch = LossyChannel::new(0.3, seed);
            (0..200u32).map(|i| ch.transmit(i).is_some()).collect::<Vec<_>>()
        };
        assert_eq!(pattern(7), pattern(7));
        assert_ne!(pattern(7), pattern(8));
    }

    #[test]
    fn zero_loss_delivers_everything() {
        let mut ch = LossyChannel::new(0.0, 1);
        for i in 0..100u32 {
            assert_eq!(ch.transmit(i), Some(i));
        }
        assert_eq!(ch.delivered(), 100);
    }

    #[test]
    fn certain_loss_delivers_nothing() {
        let mut ch = LossyChannel::new(1.5, 1); // clamped to 1.0
        for i in 0..50u32 {
            assert_eq!(ch.transmit(i), None);
        }
        assert_eq!(ch.dropped(), 50);
    }
}
