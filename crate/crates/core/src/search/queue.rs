//! Min-priority queue with FIFO ties, and the seen set.

use alloc::collections::{BTreeSet, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::network::{ActivationPattern, PatternKey};

#[derive(Debug, Clone)]
pub(crate) struct Entry {
    pub d: f64,
    seq: u64,
    pub pattern: ActivationPattern,
    pub point: Vec<f64>,
    pub scope: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // reversed so that the max-heap pops the smallest (d, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other.d.total_cmp(&self.d).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Default)]
pub(crate) struct Queue {
    heap: BinaryHeap<Entry>,
    next: u64,
}

impl Queue {
    pub fn push(&mut self, d: f64, pattern: ActivationPattern, point: Vec<f64>, scope: usize) {
        let seq = self.next;
        self.next += 1;
        self.heap.push(Entry { d, seq, pattern, point, scope });
    }

    pub fn pop(&mut self) -> Option<Entry> {
        self.heap.pop()
    }
}

/// Patterns already handled, per search scope.
#[derive(Debug, Default)]
pub(crate) struct Seen {
    set: BTreeSet<(usize, PatternKey)>,
}

impl Seen {
    pub fn contains(&self, scope: usize, pattern: &ActivationPattern) -> bool {
        self.set.contains(&(scope, pattern.key()))
    }

    /// Returns false if it was already present.
    pub fn insert(&mut self, scope: usize, pattern: &ActivationPattern) -> bool {
        self.set.insert((scope, pattern.key()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_in_order_with_fifo_ties() {
        let mut q = Queue::default();
        let p = |s: i8| ActivationPattern::from_signs(&[&[s]]);
        q.push(2.0, p(1), Vec::new(), 0);
        q.push(1.0, p(1), Vec::new(), 1);
        q.push(1.0, p(-1), Vec::new(), 2);
        q.push(0.5, p(-1), Vec::new(), 3);
        let order: Vec<usize> = core::iter::from_fn(|| q.pop()).map(|e| e.scope).collect();
        assert_eq!(order, vec![3, 1, 2, 0]);
    }
}
