use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

/// Candidate keyed so that `a > b` means `a` ranks ahead of `b`:
/// higher score first, then ascending id.
#[derive(Debug)]
struct Ranked<T> {
    score: f64,
    id: String,
    payload: T,
}

impl<T> PartialEq for Ranked<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Ranked<T> {}

impl<T> PartialOrd for Ranked<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Ranked<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then_with(|| other.id.cmp(&self.id))
    }
}

/// Keeps the `k` best `(id, score, payload)` triples using a bounded min-heap
/// and returns them best-first (descending score, ties by ascending id).
pub(crate) fn top_k_by<T, I>(items: I, k: usize) -> Vec<(String, f64, T)>
where
    I: IntoIterator<Item = (String, f64, T)>,
{
    if k == 0 {
        return Vec::new();
    }
    let mut heap: BinaryHeap<Reverse<Ranked<T>>> = BinaryHeap::with_capacity(k + 1);
    for (id, score, payload) in items {
        let entry = Ranked { score, id, payload };
        if heap.len() < k {
            heap.push(Reverse(entry));
        } else if let Some(worst) = heap.peek() {
            if entry > worst.0 {
                heap.pop();
                heap.push(Reverse(entry));
            }
        }
    }
    // ascending Reverse == descending rank
    heap.into_sorted_vec()
        .into_iter()
        .map(|Reverse(r)| (r.id, r.score, r.payload))
        .collect()
}

/// Full ranking of `(id, score)` pairs truncated to `k`: descending score,
/// ties broken by ascending id.
pub fn rank_descending(items: Vec<(String, f64)>, k: usize) -> Vec<(String, f64)> {
    top_k_by(items.into_iter().map(|(id, s)| (id, s, ())), k)
        .into_iter()
        .map(|(id, s, ())| (id, s))
        .collect()
}
