//! Snapshot publishing for concurrent readers of one ridge state.
//!
//! Readers clone an `Arc` to the current state and score against it without
//! holding a lock. The single writer applies an update to a private copy and
//! swaps the pointer, so a reader sees either the old or the new `(A, b, θ̂)`
//! and never a mix of the two.

use std::sync::{Arc, Mutex, PoisonError, RwLock};

use super::{BanditError, RidgeState, UpdateInfo};

#[derive(Debug, Clone)]
pub struct SharedRidge {
    current: Arc<RwLock<Arc<RidgeState>>>,
    writer: Arc<Mutex<()>>,
}

impl SharedRidge {
    pub fn new(state: RidgeState) -> Self {
        Self {
            current: Arc::new(RwLock::new(Arc::new(state))),
            writer: Arc::new(Mutex::new(())),
        }
    }

    pub fn snapshot(&self) -> Arc<RidgeState> {
        self.current.read().unwrap_or_else(PoisonError::into_inner).clone()
    }

    /// Apply one update and publish the result.
    pub fn update(&self, x: &[f64], r: f64) -> Result<UpdateInfo, BanditError> {
        let _guard = self.writer.lock().unwrap_or_else(PoisonError::into_inner);
        let mut next = (*self.snapshot()).clone();
        let info = next.update(x, r)?;
        *self.current.write().unwrap_or_else(PoisonError::into_inner) = Arc::new(next);
        Ok(info)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    #[test]
    fn readers_never_see_torn_state() {
        let shared = SharedRidge::new(RidgeState::new(2, 1.0).unwrap());
        let writer = {
            let s = shared.clone();
            thread::spawn(move || {
                for i in 0..500 {
                    s.update(&[1.0, (i % 3) as f64], 1.0).unwrap();
                }
            })
        };
        let readers: Vec<_> = (0..4)
            .map(|_| {
                let s = shared.clone();
                thread::spawn(move || {
                    for _ in 0..500 {
                        let snap = s.snapshot();
                        // θ̂ must equal A⁻¹b of the same snapshot.
                        let theta = snap.a_inv().mul_vec(snap.b());
                        for (a, b) in theta.iter().zip(snap.theta()) {
                            assert!((a - b).abs() < 1e-12);
                        }
                        assert!((snap.a().get(0, 0) - 1.0 - snap.t() as f64).abs() < 1e-12);
                    }
                })
            })
            .collect();
        writer.join().unwrap();
        for r in readers {
            r.join().unwrap();
        }
        assert_eq!(shared.snapshot().t(), 500);
    }
}
