use std::collections::VecDeque;
use std::time::Duration;

use tokio::sync::Mutex;
use tokio::time::Instant;

/// Sliding-window limiter: at most `capacity` acquisitions in any window.
///
/// For `rpm >= 1` the window is 60 s and the capacity `floor(rpm)`; slower
/// rates allow one request per `60 / rpm` seconds.
#[derive(Debug)]
pub struct RateLimiter {
    capacity: usize,
    window: Duration,
    sent: Mutex<VecDeque<Instant>>,
}

impl RateLimiter {
    pub fn new(requests_per_minute: f64) -> Self {
        let rpm = if requests_per_minute.is_finite() && requests_per_minute > 0.0 {
            requests_per_minute
        } else {
            1.0
        };
        let (capacity, window) = if rpm >= 1.0 {
            (rpm.floor().min(1e9) as usize, Duration::from_secs(60))
        } else {
            (1, Duration::from_secs_f64(60.0 / rpm))
        };
        RateLimiter {
            capacity,
            window,
            sent: Mutex::new(VecDeque::new()),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn window(&self) -> Duration {
        self.window
    }

    /// Waits until one more request fits in the window, then claims it.
    pub async fn acquire(&self) {
        loop {
            let wait_until = {
                let mut sent = self.sent.lock().await;
                let now = Instant::now();
                while sent.front().is_some_and(|t| now.duration_since(*t) >= self.window) {
                    sent.pop_front();
                }
                if sent.len() < self.capacity {
                    sent.push_back(now);
                    return;
                }
                sent[0] + self.window
            };
            tokio::time::sleep_until(wait_until).await;
        }
    }
}
