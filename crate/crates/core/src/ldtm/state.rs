use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;

/// Global topic-item counts `xi[k][m]` with cached row sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicItemCounts {
    topics: usize,
    items: usize,
    counts: Vec<u32>,
    row_sums: Vec<u64>,
}

impl TopicItemCounts {
    pub fn zeros(topics: usize, items: usize) -> Self {
        TopicItemCounts {
            topics,
            items,
            counts: vec![0; topics * items],
            row_sums: vec![0; topics],
        }
    }

    /// Rebuilds from dense rows, recomputing row sums.
    pub fn from_rows(rows: &[Vec<u32>]) -> Self {
        let topics = rows.len();
        let items = rows.first().map_or(0, Vec::len);
        let counts: Vec<u32> = rows.iter().flatten().copied().collect();
        let row_sums = rows.iter().map(|r| r.iter().map(|&c| u64::from(c)).sum()).collect();
        TopicItemCounts {
            topics,
            items,
            counts,
            row_sums,
        }
    }

    pub fn topics(&self) -> usize {
        self.topics
    }

    pub fn items(&self) -> usize {
        self.items
    }

    #[inline]
    pub fn get(&self, k: usize, m: usize) -> u32 {
        self.counts[k * self.items + m]
    }

    #[inline]
    pub fn row_sum(&self, k: usize) -> u64 {
        self.row_sums[k]
    }

    pub fn row(&self, k: usize) -> &[u32] {
        &self.counts[k * self.items..(k + 1) * self.items]
    }

    pub fn rows(&self) -> Vec<Vec<u32>> {
        (0..self.topics).map(|k| self.row(k).to_vec()).collect()
    }

    pub fn total(&self) -> u64 {
        self.row_sums.iter().sum()
    }

    #[inline]
    pub(crate) fn increment(&mut self, k: usize, m: usize) {
        self.counts[k * self.items + m] += 1;
        self.row_sums[k] += 1;
    }

    #[inline]
    pub(crate) fn decrement(&mut self, k: usize, m: usize) {
        self.counts[k * self.items + m] -= 1;
        self.row_sums[k] -= 1;
    }
}

/// Latent assignments and the count tables they induce.
///
/// Time indices are 0-based here: `z[n][t - 1]` holds step `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicState {
    pub z: Vec<Vec<Vec<u32>>>,
    pub psi: Vec<Vec<Vec<u32>>>,
    pub xi: TopicItemCounts,
}

impl TopicState {
    pub fn topics(&self) -> usize {
        self.xi.topics()
    }

    /// Counts of user `n` at 1-based step `t`.
    pub fn psi_at(&self, n: usize, t: usize) -> &[u32] {
        &self.psi[n][t - 1]
    }

    /// True when `psi` and `xi` are exactly the tallies of `z` over `corpus`.
    pub fn is_consistent(&self, corpus: &Corpus) -> bool {
        let k = self.topics();
        let mut xi = TopicItemCounts::zeros(k, corpus.vocab_size());
        for (n, user) in corpus.users().iter().enumerate() {
            for (ti, toks) in user.steps.iter().enumerate() {
                let mut psi = vec![0u32; k];
                for (pos, &w) in toks.iter().enumerate() {
                    let topic = self.z[n][ti][pos] as usize;
                    psi[topic] += 1;
                    xi.increment(topic, w as usize);
                }
                if psi != self.psi[n][ti] {
                    return false;
                }
            }
        }
        xi == self.xi
    }
}

/// Assigns every token a uniformly random topic and tallies the counts.
pub fn init_assignments<R: Rng + ?Sized>(corpus: &Corpus, topics: usize, rng: &mut R) -> TopicState {
    let topics = topics.max(1);
    let mut xi = TopicItemCounts::zeros(topics, corpus.vocab_size());
    let mut z = Vec::with_capacity(corpus.num_users());
    let mut psi = Vec::with_capacity(corpus.num_users());
    for user in corpus.users() {
        let mut zu = Vec::with_capacity(user.steps.len());
        let mut pu = Vec::with_capacity(user.steps.len());
        for toks in &user.steps {
            let mut counts = vec![0u32; topics];
            let zs: Vec<u32> = toks
                .iter()
                .map(|&w| {
                    let k = rng.gen_range(0..topics);
                    counts[k] += 1;
                    xi.increment(k, w as usize);
                    k as u32
                })
                .collect();
            zu.push(zs);
            pu.push(counts);
        }
        z.push(zu);
        psi.push(pu);
    }
    TopicState { z, psi, xi }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest_events, AdoptionEvent, PruneRules};
    use crate::rng::rng_for;

    fn tiny(count: u32) -> Corpus {
        let events = vec![AdoptionEvent::new("u", 1, "w", count)];
        ingest_events(&events, &PruneRules::new(Vec::<String>::new(), 1)).unwrap()
    }

    #[test]
    fn single_token_counts() {
        let corpus = tiny(1);
        let s = init_assignments(&corpus, 4, &mut rng_for(9, 1));
        assert_eq!(s.psi[0][0].iter().sum::<u32>(), 1);
        assert_eq!(s.xi.total(), 1);
        assert!(s.is_consistent(&corpus));
    }

    #[test]
    fn one_topic_takes_everything() {
        let corpus = tiny(7);
        let s = init_assignments(&corpus, 1, &mut rng_for(1, 1));
        assert!(s.z[0][0].iter().all(|&k| k == 0));
        assert_eq!(s.psi[0][0], vec![7]);
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let corpus = tiny(50);
        let a = init_assignments(&corpus, 5, &mut rng_for(3, 1));
        let b = init_assignments(&corpus, 5, &mut rng_for(3, 1));
        assert_eq!(a, b);
    }
}
