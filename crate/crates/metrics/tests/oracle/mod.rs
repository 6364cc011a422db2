//! Slow reference implementations written without the library's helpers:
//! n-grams are counted by linear scans, LCS by subset enumeration, and
//! CIDEr vectors are dense over an explicit vocabulary.

#![allow(dead_code)]

use ldp_metrics::{Item, TokenizedCorpus};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Gram = Vec<String>;

fn grams(t: &[String], n: usize) -> Vec<Gram> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + n <= t.len() {
        out.push(t[i..i + n].to_vec());
        i += 1;
    }
    out
}

fn occurrences(list: &[Gram], g: &Gram) -> usize {
    list.iter().filter(|x| *x == g).count()
}

fn distinct(list: &[Gram]) -> Vec<Gram> {
    let mut out: Vec<Gram> = Vec::new();
    for g in list {
        if !out.contains(g) {
            out.push(g.clone());
        }
    }
    out
}

pub fn bleu(c: &TokenizedCorpus, n: usize) -> f64 {
    let mut prod = 1.0;
    for k in 1..=n {
        let (mut m, mut t) = (0usize, 0usize);
        for it in &c.items {
            let h = grams(&it.hypothesis, k);
            t += h.len();
            for g in distinct(&h) {
                let best = it.references.iter().map(|r| occurrences(&grams(r, k), &g)).max().unwrap();
                m += occurrences(&h, &g).min(best);
            }
        }
        prod *= if m == 0 { 1e-9 } else { m as f64 / t as f64 };
    }
    let c_len: usize = c.items.iter().map(|i| i.hypothesis.len()).sum();
    let r_len: usize = c
        .items
        .iter()
        .map(|it| {
            let mut lens: Vec<usize> = it.references.iter().map(Vec::len).collect();
            let hl = it.hypothesis.len() as i64;
            lens.sort_by_key(|&l| ((l as i64 - hl).abs(), l));
            lens[0]
        })
        .sum();
    let bp = if c_len == 0 {
        0.0
    } else if c_len > r_len {
        1.0
    } else {
        (1.0 - r_len as f64 / c_len as f64).exp()
    };
    bp * prod.powf(1.0 / n as f64)
}

fn is_subsequence(sub: &[&String], s: &[String]) -> bool {
    let mut it = s.iter();
    sub.iter().all(|x| it.any(|y| y == *x))
}

pub fn lcs(a: &[String], b: &[String]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let sub: Vec<&String> = (0..short.len()).filter(|i| mask & (1 << i) != 0).map(|i| &short[i]).collect();
        if sub.len() > best && is_subsequence(&sub, long) {
            best = sub.len();
        }
    }
    best
}

pub fn rouge_l(c: &TokenizedCorpus) -> f64 {
    let mut total = 0.0;
    for it in &c.items {
        let mut best: f64 = 0.0;
        for r in &it.references {
            let l = lcs(&it.hypothesis, r) as f64;
            if l > 0.0 {
                let (p, rc) = (l / it.hypothesis.len() as f64, l / r.len() as f64);
                best = best.max(2.0 * p * rc / (p + rc));
            }
        }
        total += best;
    }
    total / c.items.len() as f64
}

fn oracle_stem(w: &str) -> String {
    let list: Vec<&str> = include_str!("../../data/suffixes.txt")
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(str::trim)
        .collect();
    let mut best: Option<&str> = None;
    for s in list {
        if w.ends_with(s) && w.chars().count() - s.chars().count() >= 3 {
            let better = match best {
                None => true,
                Some(b) => s.len() > b.len() || (s.len() == b.len() && s < b),
            };
            if better {
                best = Some(s);
            }
        }
    }
    match best {
        Some(s) => w[..w.len() - s.len()].to_string(),
        None => w.to_string(),
    }
}

pub fn meteor_pair(h: &[String], r: &[String]) -> f64 {
    let mut link: Vec<Option<usize>> = vec![None; h.len()];
    let mut taken = vec![false; r.len()];
    for stage in 0..2 {
        for i in 0..h.len() {
            if link[i].is_some() {
                continue;
            }
            for j in 0..r.len() {
                let ok = if stage == 0 { h[i] == r[j] } else { oracle_stem(&h[i]) == oracle_stem(&r[j]) };
                if !taken[j] && ok {
                    taken[j] = true;
                    link[i] = Some(j);
                    break;
                }
            }
        }
    }
    let m = link.iter().filter(|l| l.is_some()).count();
    if m == 0 {
        return 0.0;
    }
    let mut chunks = 0;
    for i in 0..h.len() {
        if let Some(j) = link[i] {
            let continues = i > 0 && link[i - 1].is_some_and(|p| p + 1 == j);
            if !continues {
                chunks += 1;
            }
        }
    }
    let p = m as f64 / h.len() as f64;
    let rc = m as f64 / r.len() as f64;
    let f = p * rc / (0.9 * p + 0.1 * rc);
    let frag = chunks as f64 / m as f64;
    f * (1.0 - 0.5 * frag * frag * frag)
}

pub fn meteor(c: &TokenizedCorpus) -> f64 {
    let s: f64 = c
        .items
        .iter()
        .map(|it| it.references.iter().map(|r| meteor_pair(&it.hypothesis, r)).fold(0.0, f64::max))
        .sum();
    s / c.items.len() as f64
}

pub fn cider(c: &TokenizedCorpus, sigma: Option<f64>) -> f64 {
    let big_n = c.items.len() as f64;
    let mut per_item = vec![0.0; c.items.len()];
    for n in 1..=4 {
        let mut vocab: Vec<Gram> = Vec::new();
        for it in &c.items {
            for s in std::iter::once(&it.hypothesis).chain(&it.references) {
                for g in grams(s, n) {
                    if !vocab.contains(&g) {
                        vocab.push(g);
                    }
                }
            }
        }
        let idf: Vec<f64> = vocab
            .iter()
            .map(|g| {
                let df = c.items.iter().filter(|it| it.references.iter().any(|r| grams(r, n).contains(g))).count();
                (big_n / df.max(1) as f64).ln()
            })
            .collect();
        let vector = |s: &[String]| -> Vec<f64> {
            let gs = grams(s, n);
            vocab.iter().zip(&idf).map(|(g, w)| occurrences(&gs, g) as f64 / gs.len().max(1) as f64 * w).collect()
        };
        for (k, it) in c.items.iter().enumerate() {
            let hv = vector(&it.hypothesis);
            let mut sum = 0.0;
            for r in &it.references {
                let rv = vector(r);
                let dot: f64 = hv.iter().zip(&rv).map(|(a, b)| a * b).sum();
                let na: f64 = hv.iter().map(|a| a * a).sum::<f64>().sqrt();
                let nb: f64 = rv.iter().map(|b| b * b).sum::<f64>().sqrt();
                let mut cos = if na > 0.0 && nb > 0.0 { dot / na / nb } else { 0.0 };
                if let Some(s) = sigma {
                    let d = (it.hypothesis.len() as f64 - r.len() as f64).abs();
                    cos *= (-(d * d) / (2.0 * s * s)).exp();
                }
                sum += cos;
            }
            per_item[k] += sum / it.references.len() as f64 * 10.0 / 4.0;
        }
    }
    per_item.iter().sum::<f64>() / big_n
}

const WORDS: [&str; 9] = ["polyp", "polyps", "the", "a", "sessile", "colon", "in", "bleeding", "bleed"];

fn sentence(rng: &mut ChaCha8Rng, min: usize) -> Vec<String> {
    let len = rng.random_range(min..=8);
    (0..len).map(|_| WORDS.choose(rng).unwrap().to_string()).collect()
}

/// Random corpus of 1..=5 items, hypotheses of 0..=8 tokens, 1..=3 references of 1..=8 tokens.
pub fn random_corpus(seed: u64) -> TokenizedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=5);
    let items = (0..n)
        .map(|i| Item {
            id: i.to_string(),
            hypothesis: sentence(&mut rng, 0),
            references: (0..rng.random_range(1..=3)).map(|_| sentence(&mut rng, 1)).collect(),
        })
        .collect();
    TokenizedCorpus::new(items).unwrap()
}
