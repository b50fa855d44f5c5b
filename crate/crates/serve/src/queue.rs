use std::collections::VecDeque;

/// Bounded FIFO of pending match messages. On overflow the oldest non-hit
/// message is shed; hits are never dropped, so a queue full of hits grows
/// past its bound.
#[derive(Debug)]
pub struct PendingQueue<T> {
    capacity: usize,
    items: VecDeque<(bool, T)>,
}

impl<T> PendingQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        Self {
            capacity,
            items: VecDeque::new(),
        }
    }

    /// Enqueue and return whatever was shed to make room.
    pub fn push(&mut self, item: T, is_hit: bool) -> Option<T> {
        let mut shed = None;
        if self.items.len() >= self.capacity {
            if let Some(i) = self.items.iter().position(|(hit, _)| !hit) {
                shed = self.items.remove(i).map(|(_, v)| v);
            } else if !is_hit {
                return Some(item);
            }
        }
        self.items.push_back((is_hit, item));
        shed
    }

    pub fn pop(&mut self) -> Option<T> {
        self.items.pop_front().map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fifo_within_capacity() {
        let mut q = PendingQueue::new(3);
        for i in 0..3 {
            assert_eq!(q.push(i, false), None);
        }
        assert_eq!((q.pop(), q.pop(), q.pop(), q.pop()), (Some(0), Some(1), Some(2), None));
    }

    #[test]
    fn sheds_oldest_non_hit() {
        let mut q = PendingQueue::new(3);
        q.push("h1", true);
        q.push("c1", false);
        q.push("c2", false);
        assert_eq!(q.push("h2", true), Some("c1"));
        assert_eq!(q.push("c3", false), Some("c2"));
        let drained: Vec<_> = std::iter::from_fn(|| q.pop()).collect();
        assert_eq!(drained, vec!["h1", "h2", "c3"]);
    }

    #[test]
    fn hits_grow_past_bound() {
        let mut q = PendingQueue::new(2);
        q.push(1, true);
        q.push(2, true);
        assert_eq!(q.push(3, true), None);
        assert_eq!(q.len(), 3);
        assert_eq!(q.push(4, false), Some(4));
    }

    proptest! {
        #[test]
        fn hits_never_lost(ops in prop::collection::vec((any::<bool>(), any::<bool>()), 0..200), cap in 1usize..8) {
            let mut q = PendingQueue::new(cap);
            let mut pushed_hits = 0usize;
            let mut popped_hits = 0usize;
            for (n, (is_hit, pop)) in ops.into_iter().enumerate() {
                if pop {
                    if let Some((h, _)) = q.pop() {
                        popped_hits += usize::from(h);
                    }
                } else {
                    pushed_hits += usize::from(is_hit);
                    if let Some((h, _)) = q.push((is_hit, n), is_hit) {
                        prop_assert!(!h);
                    }
                    let non_hits = q.items.iter().filter(|(h, _)| !h).count();
                    prop_assert!(q.len() <= cap || non_hits == 0);
                }
            }
            while let Some((h, _)) = q.pop() {
                popped_hits += usize::from(h);
            }
            prop_assert_eq!(pushed_hits, popped_hits);
        }
    }
}
