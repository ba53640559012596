//! Concurrent memo table for model scores.
//!
//! Readers take a shared lock; inserts take the write lock and are
//! last-writer-wins (values for one key are identical, so races are benign).
//! With a capacity the least recently used entry is evicted; recency is an
//! atomic stamp so lookups never need the write lock.

use alloc::sync::Arc;
use core::hash::Hash;
use core::sync::atomic::{AtomicU64, Ordering};

use hashbrown::HashMap;
use spin::RwLock;

struct Slot<V> {
    value: Arc<V>,
    stamp: AtomicU64,
}

pub struct ScoreCache<K, V> {
    map: RwLock<HashMap<K, Slot<V>>>,
    clock: AtomicU64,
    cap: Option<usize>,
}

impl<K: Hash + Eq + Clone, V> ScoreCache<K, V> {
    pub fn new(cap: Option<usize>) -> Self {
        ScoreCache { map: RwLock::new(HashMap::new()), clock: AtomicU64::new(0), cap: cap.map(|c| c.max(1)) }
    }

    pub fn get(&self, key: &K) -> Option<Arc<V>> {
        let map = self.map.read();
        map.get(key).map(|slot| {
            if self.cap.is_some() {
                slot.stamp.store(self.clock.fetch_add(1, Ordering::Relaxed), Ordering::Relaxed);
            }
            Arc::clone(&slot.value)
        })
    }

    pub fn insert(&self, key: K, value: Arc<V>) {
        let stamp = AtomicU64::new(self.clock.fetch_add(1, Ordering::Relaxed));
        let mut map = self.map.write();
        if let Some(cap) = self.cap {
            if map.len() >= cap && !map.contains_key(&key) {
                let oldest = map
                    .iter()
                    .min_by_key(|(_, s)| s.stamp.load(Ordering::Relaxed))
                    .map(|(k, _)| k.clone());
                if let Some(k) = oldest {
                    map.remove(&k);
                }
            }
        }
        map.insert(key, Slot { value, stamp });
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.write().clear();
    }

    pub fn capacity_limit(&self) -> Option<usize> {
        self.cap
    }
}

impl<K: Hash + Eq + Clone, V> Default for ScoreCache<K, V> {
    fn default() -> Self {
        ScoreCache::new(None)
    }
}
