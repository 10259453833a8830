//! Brute-force metric references, written without the library's counting,
//! DP or alignment code.

#![allow(dead_code)]

use tdora::rng::SplitMix64;
use tdora::textmetrics::{BLEU_SMOOTHING, STOPWORDS_FILE};

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

fn ngrams(t: &[String], n: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + n <= t.len() {
        out.push(t[i..i + n].to_vec());
        i += 1;
    }
    out
}

fn occurrences(list: &[Vec<String>], g: &[String]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

pub fn bleu4(pred: &[String], reference: &[String]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let p = ngrams(pred, n);
        let r = ngrams(reference, n);
        let mut seen: Vec<Vec<String>> = Vec::new();
        let mut clipped = 0;
        for g in &p {
            if seen.contains(g) {
                continue;
            }
            seen.push(g.clone());
            clipped += occurrences(&p, g).min(occurrences(&r, g));
        }
        log_sum += if clipped == 0 {
            BLEU_SMOOTHING.ln()
        } else {
            (clipped as f64 / p.len() as f64).ln()
        };
    }
    let bp = if pred.len() > reference.len() {
        1.0
    } else {
        (1.0 - reference.len() as f64 / pred.len() as f64).exp()
    };
    bp * (log_sum / 4.0).exp()
}

fn lcs(a: &[String], b: &[String]) -> usize {
    match (a.split_first(), b.split_first()) {
        (Some((x, ra)), Some((y, rb))) => {
            if x == y {
                1 + lcs(ra, rb)
            } else {
                lcs(ra, b).max(lcs(a, rb))
            }
        }
        _ => 0,
    }
}

pub fn rouge_l(pred: &[String], reference: &[String]) -> f64 {
    let l = lcs(pred, reference);
    if l == 0 {
        return 0.0;
    }
    let (p, r) = (
        l as f64 / pred.len() as f64,
        l as f64 / reference.len() as f64,
    );
    2.0 * p * r / (p + r)
}

/// Every partial one-to-one exact-match alignment, as `ref index` per
/// prediction token.
fn alignments(
    pred: &[String],
    reference: &[String],
    i: usize,
    cur: &mut Vec<Option<usize>>,
    out: &mut Vec<Vec<Option<usize>>>,
) {
    if i == pred.len() {
        out.push(cur.clone());
        return;
    }
    cur.push(None);
    alignments(pred, reference, i + 1, cur, out);
    cur.pop();
    for j in 0..reference.len() {
        if reference[j] == pred[i] && !cur.contains(&Some(j)) {
            cur.push(Some(j));
            alignments(pred, reference, i + 1, cur, out);
            cur.pop();
        }
    }
}

fn chunks(a: &[Option<usize>]) -> usize {
    let mut c = 0;
    for i in 0..a.len() {
        if let Some(j) = a[i] {
            let continues = i > 0 && j > 0 && a[i - 1] == Some(j - 1);
            if !continues {
                c += 1;
            }
        }
    }
    c
}

pub fn meteor_lite(pred: &[String], reference: &[String]) -> f64 {
    let mut all = Vec::new();
    alignments(pred, reference, 0, &mut Vec::new(), &mut all);
    let m = all
        .iter()
        .map(|a| a.iter().flatten().count())
        .max()
        .unwrap_or(0);
    if m == 0 {
        return 0.0;
    }
    let ch = all
        .iter()
        .filter(|a| a.iter().flatten().count() == m)
        .map(|a| chunks(a))
        .min()
        .unwrap();
    let m = m as f64;
    let (p, r) = (m / pred.len() as f64, m / reference.len() as f64);
    let f = 10.0 * p * r / (r + 9.0 * p);
    f * (1.0 - 0.5 * (ch as f64 / m).powi(3))
}

pub fn keyword_accuracy(pred: &[String], reference: &[String]) -> f64 {
    let stop: Vec<&str> = STOPWORDS_FILE
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let keys: Vec<&String> = reference
        .iter()
        .filter(|t| !stop.contains(&t.as_str()))
        .collect();
    let hit = if keys.is_empty() {
        pred == reference
    } else {
        keys.iter().all(|k| pred.contains(k))
    };
    f64::from(u8::from(hit))
}

/// Short token lists over a small vocabulary, so matches are frequent.
pub fn random_pair(rng: &mut SplitMix64) -> (Vec<String>, Vec<String>) {
    const WORDS: [&str; 7] = ["the", "scope", "is", "a", "tool", "no", "advancing"];
    fn draw(rng: &mut SplitMix64) -> Vec<String> {
        let n = rng.below(8);
        (0..n)
            .map(|_| WORDS[rng.below(WORDS.len())].to_string())
            .collect()
    }
    let p = draw(rng);
    (p, draw(rng))
}
