//! In-memory walkthrough sessions.
//!
//! A session is a virtual pedestrian with a true pose. Every step moves or
//! turns it, synthesizes a fresh observation at the new pose and localizes
//! that observation against the database.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard, TryLockError};
use std::time::{Duration, Instant};

use fusionloc::pose::facing_from_heading;
use fusionloc::synth::sub_rng;
use fusionloc::{IndoorMap, LocalizationResult, Vec3};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stream domain for session draws, disjoint from the generator's domains.
const DOMAIN_SESSION: u64 = 0x5E55;

/// RNG behind the observation a session with `seed` makes after `step`
/// actions.
pub fn observation_rng(seed: u64, step: u64) -> ChaCha8Rng {
    sub_rng(seed, DOMAIN_SESSION, step)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Forward,
    Back,
    TurnLeft,
    TurnRight,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub seed: u64,
    pub device_id: String,
    pub true_position: Vec3,
    /// Degrees clockwise from `+z`, in `[0, 360)`.
    pub heading: f64,
    /// Steps taken so far; also indexes the observation stream.
    pub steps: u64,
    pub created_at: Instant,
    pub last_active: Instant,
    pub last_result: Option<LocalizationResult>,
}

impl Session {
    /// Applies one action. Movement is clamped to the map bounds.
    pub fn apply(&mut self, action: Action, step_m: f64, turn_deg: f64, map: &IndoorMap) {
        match action {
            Action::Forward | Action::Back => {
                let sign = if action == Action::Forward { 1.0 } else { -1.0 };
                let moved = self.true_position + facing_from_heading(self.heading) * (sign * step_m);
                self.true_position = map.clamp(moved);
            }
            Action::TurnLeft => self.heading = (self.heading - turn_deg).rem_euclid(360.0),
            Action::TurnRight => self.heading = (self.heading + turn_deg).rem_euclid(360.0),
        }
        self.steps += 1;
    }

    /// RNG for the observation made after the current step.
    pub fn observation_rng(&self) -> ChaCha8Rng {
        observation_rng(self.seed, self.steps)
    }
}

/// Sessions keyed by id. The map lock is held only for lookups; each session
/// has its own lock so steps on different sessions run concurrently.
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    ids: Mutex<(u64, ChaCha8Rng)>,
    idle_timeout: Duration,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // a panicked handler leaves plain data behind; keep serving
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl SessionStore {
    pub fn new(seed: u64, idle_timeout: Duration) -> Self {
        Self {
            sessions: Mutex::new(HashMap::new()),
            ids: Mutex::new((0, ChaCha8Rng::seed_from_u64(seed))),
            idle_timeout,
        }
    }

    fn expired(&self, s: &Session, now: Instant) -> bool {
        now.duration_since(s.last_active) > self.idle_timeout
    }

    /// Drops every session idle for longer than the timeout.
    pub fn purge(&self) {
        let now = Instant::now();
        // a session locked by a running step is in use, so it stays
        lock(&self.sessions).retain(|_, s| match s.try_lock() {
            Ok(s) => !self.expired(&s, now),
            Err(TryLockError::Poisoned(e)) => !self.expired(&e.into_inner(), now),
            Err(TryLockError::WouldBlock) => true,
        });
    }

    /// Starts a session at a random RP facing a random stored heading.
    pub fn create(&self, seed: Option<u64>, device_id: String, map: &IndoorMap, headings: &[f64]) -> Session {
        self.purge();
        let (id, seed) = {
            let mut ids = lock(&self.ids);
            ids.0 += 1;
            let n = ids.0;
            let seed = seed.unwrap_or_else(|| ids.1.next_u64());
            (format!("{n:x}-{:016x}", ids.1.next_u64()), seed)
        };
        let mut rng = sub_rng(seed, DOMAIN_SESSION, u64::MAX);
        let rp = &map.rps[rng.gen_range(0..map.rps.len())];
        let heading = if headings.is_empty() { 0.0 } else { headings[rng.gen_range(0..headings.len())] };
        let now = Instant::now();
        let session = Session {
            id: id.clone(),
            seed,
            device_id,
            true_position: rp.position,
            heading,
            steps: 0,
            created_at: now,
            last_active: now,
            last_result: None,
        };
        lock(&self.sessions).insert(id, Arc::new(Mutex::new(session.clone())));
        session
    }

    /// Runs `f` on a live session under its lock. Expired sessions are
    /// removed and reported as missing.
    pub fn with_session<R>(&self, id: &str, f: impl FnOnce(&mut Session) -> R) -> Option<R> {
        let entry = lock(&self.sessions).get(id).cloned()?;
        let mut s = lock(&entry);
        let now = Instant::now();
        if self.expired(&s, now) {
            drop(s);
            lock(&self.sessions).remove(id);
            return None;
        }
        s.last_active = now;
        Some(f(&mut s))
    }

    pub fn remove(&self, id: &str) -> bool {
        lock(&self.sessions).remove(id).is_some()
    }

    pub fn len(&self) -> usize {
        lock(&self.sessions).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fusionloc::make_grid_map;

    fn session(position: Vec3, heading: f64) -> Session {
        let now = Instant::now();
        Session {
            id: "s".into(),
            seed: 1,
            device_id: "device-0".into(),
            true_position: position,
            heading,
            steps: 0,
            created_at: now,
            last_active: now,
            last_result: None,
        }
    }

    #[test]
    fn quarter_turn_then_forward_moves_one_step_along_the_new_heading() {
        let map = make_grid_map(4.0, 2.0, 0.5).unwrap();
        let mut s = session(Vec3::ZERO, 0.0);
        for _ in 0..6 {
            s.apply(Action::TurnRight, 0.5, 15.0, &map);
        }
        assert_eq!(s.heading, 90.0);
        s.apply(Action::Forward, 0.5, 15.0, &map);
        assert!((s.true_position - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-12);
        s.apply(Action::TurnLeft, 0.5, 15.0, &map);
        assert_eq!(s.heading, 75.0);
        assert_eq!(s.steps, 8);
    }

    #[test]
    fn movement_is_clamped_to_the_map() {
        let map = make_grid_map(4.0, 2.0, 0.5).unwrap();
        let mut s = session(Vec3::new(0.0, 0.0, 0.9), 0.0);
        s.apply(Action::Forward, 0.5, 15.0, &map);
        assert_eq!(s.true_position, Vec3::new(0.0, 0.0, 1.0));
        s.apply(Action::TurnLeft, 0.5, 15.0, &map);
        assert_eq!(s.heading, 345.0);
        s.apply(Action::Back, 0.5, 15.0, &map);
        assert!(map.contains(s.true_position));
    }

    #[test]
    fn idle_sessions_expire() {
        let map = make_grid_map(4.0, 2.0, 0.5).unwrap();
        let store = SessionStore::new(0, Duration::ZERO);
        let s = store.create(Some(3), "device-0".into(), &map, &[0.0]);
        std::thread::sleep(Duration::from_millis(2));
        assert!(store.with_session(&s.id, |_| ()).is_none());
        assert!(store.is_empty());
    }

    #[test]
    fn ids_are_unique_and_seeded_starts_repeat() {
        let map = make_grid_map(4.0, 2.0, 0.5).unwrap();
        let store = SessionStore::new(0, Duration::from_secs(60));
        let a = store.create(Some(9), "device-0".into(), &map, &[0.0, 90.0]);
        let b = store.create(Some(9), "device-0".into(), &map, &[0.0, 90.0]);
        assert_ne!(a.id, b.id);
        assert_eq!((a.true_position, a.heading), (b.true_position, b.heading));
        assert!(store.remove(&a.id));
        assert!(!store.remove(&a.id));
        assert_eq!(store.len(), 1);
    }
}
