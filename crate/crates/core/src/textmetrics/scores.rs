use std::collections::{HashMap, HashSet};

use super::keywords;

/// Stand-in precision for an n-gram order with no matches.
pub const BLEU_SMOOTHING: f64 = 1e-9;

/// Clipped n-gram matches and candidate n-gram totals for orders 1..=4,
/// summed over one or more pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BleuCounts {
    pub matches: [usize; 4],
    pub totals: [usize; 4],
    pub pred_len: usize,
    pub ref_len: usize,
}

impl BleuCounts {
    pub fn add(&mut self, other: &BleuCounts) {
        for n in 0..4 {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.pred_len += other.pred_len;
        self.ref_len += other.ref_len;
    }

    pub fn score(&self) -> f64 {
        if self.pred_len == 0 {
            return 0.0;
        }
        let log_p: f64 = (0..4)
            .map(|n| {
                if self.matches[n] == 0 {
                    BLEU_SMOOTHING.ln()
                } else {
                    (self.matches[n] as f64 / self.totals[n] as f64).ln()
                }
            })
            .sum::<f64>()
            / 4.0;
        let bp = if self.pred_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.pred_len as f64).exp()
        };
        bp * log_p.exp()
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

pub fn bleu4_counts(pred: &[String], reference: &[String]) -> BleuCounts {
    let mut c = BleuCounts {
        pred_len: pred.len(),
        ref_len: reference.len(),
        ..BleuCounts::default()
    };
    for n in 1..=4 {
        let refs = ngram_counts(reference, n);
        let preds = ngram_counts(pred, n);
        c.totals[n - 1] = pred.len().saturating_sub(n - 1);
        c.matches[n - 1] = preds
            .iter()
            .map(|(g, &k)| k.min(refs.get(g).copied().unwrap_or(0)))
            .sum();
    }
    c
}

/// Sentence BLEU-4 with brevity penalty. Orders without a match contribute
/// [`BLEU_SMOOTHING`] as their precision.
pub fn bleu4(pred: &[String], reference: &[String]) -> f64 {
    bleu4_counts(pred, reference).score()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// LCS-based F1.
pub fn rouge_l(pred: &[String], reference: &[String]) -> f64 {
    if pred.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(pred, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let (p, r) = (lcs / pred.len() as f64, lcs / reference.len() as f64);
    2.0 * p * r / (p + r)
}

/// Exact-match alignment with the most matches, and among those the fewest
/// chunks. Returns `(matches, chunks)`.
pub(crate) fn align(pred: &[String], reference: &[String]) -> (usize, usize) {
    if reference.len() > 64 {
        return greedy_align(pred, reference);
    }
    let mut memo = HashMap::new();
    best_alignment(pred, reference, 0, 0, None, &mut memo)
}

type Memo = HashMap<(usize, u64, Option<usize>), (usize, usize)>;

fn better(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

fn best_alignment(
    pred: &[String],
    reference: &[String],
    i: usize,
    used: u64,
    prev: Option<usize>,
    memo: &mut Memo,
) -> (usize, usize) {
    if i == pred.len() {
        return (0, 0);
    }
    if let Some(&v) = memo.get(&(i, used, prev)) {
        return v;
    }
    let mut best = best_alignment(pred, reference, i + 1, used, None, memo);
    for (j, r) in reference.iter().enumerate() {
        if r != &pred[i] || used & (1 << j) != 0 {
            continue;
        }
        let (m, c) = best_alignment(pred, reference, i + 1, used | (1 << j), Some(j), memo);
        let extends = j > 0 && prev == Some(j - 1);
        let cand = (m + 1, c + usize::from(!extends));
        if better(cand, best) {
            best = cand;
        }
    }
    memo.insert((i, used, prev), best);
    best
}

fn greedy_align(pred: &[String], reference: &[String]) -> (usize, usize) {
    let mut used = vec![false; reference.len()];
    let (mut m, mut chunks, mut prev) = (0, 0, None);
    for p in pred {
        let hit = (0..reference.len()).find(|&j| !used[j] && &reference[j] == p);
        match hit {
            Some(j) => {
                used[j] = true;
                m += 1;
                if !(j > 0 && prev == Some(j - 1)) {
                    chunks += 1;
                }
                prev = Some(j);
            }
            None => prev = None,
        }
    }
    (m, chunks)
}

/// METEOR with exact matching only: harmonic mean weighted 9:1 towards
/// recall, times `1 - 0.5·(chunks/m)³`.
pub fn meteor_lite(pred: &[String], reference: &[String]) -> f64 {
    if pred.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let (m, chunks) = align(pred, reference);
    if m == 0 {
        return 0.0;
    }
    let m = m as f64;
    let (p, r) = (m / pred.len() as f64, m / reference.len() as f64);
    let f = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m).powi(3);
    f * (1.0 - penalty)
}

/// 1 when every non-stopword reference token occurs in the prediction.
/// A reference made only of stopwords falls back to exact equality.
pub fn keyword_accuracy(pred: &[String], reference: &[String]) -> f64 {
    let keys = keywords(reference);
    let hit = if keys.is_empty() {
        pred == reference
    } else {
        let tokens: HashSet<&String> = pred.iter().collect();
        keys.iter().all(|k| tokens.contains(k))
    };
    if hit {
        1.0
    } else {
        0.0
    }
}
