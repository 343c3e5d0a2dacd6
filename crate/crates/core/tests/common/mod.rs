//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's scoring code; inputs are plain vectors.

#![allow(dead_code)]

use rand::Rng;

pub const FILTERS: [&str; 3] = ["none", "filter0", "prefix0"];
pub const SCORES: [&str; 4] = ["prob", "pplx", "count", "normcount"];
pub const IMAGE_AGGS: [&str; 7] = ["sum", "mean", "median", "geomean", "max", "min", "join"];
pub const DATASET_AGGS: [&str; 6] = ["sum", "mean", "median", "geomean", "max", "min"];

/// One caption: `probs` and `flags` cover the m tokens plus the end token.
#[derive(Debug, Clone)]
pub struct RawCaption {
    pub words: Vec<String>,
    pub probs: Vec<f64>,
    pub flags: Vec<bool>,
}

pub type RawImage = (String, Vec<RawCaption>);

pub fn all_names() -> Vec<String> {
    let mut names = Vec::new();
    for t4 in DATASET_AGGS {
        for t3 in IMAGE_AGGS {
            for t2 in SCORES {
                for t1 in FILTERS {
                    names.push(format!("{t4}_{t3}_{t2}_{t1}"));
                }
            }
        }
    }
    names
}

fn selected(c: &RawCaption, filter: &str, with_end: bool) -> (Vec<usize>, usize) {
    let p = if with_end { c.probs.len() } else { c.probs.len() - 1 };
    let mut out = Vec::new();
    match filter {
        "none" => out.extend(0..p),
        "filter0" => {
            for i in 0..p {
                if c.flags[i] {
                    out.push(i);
                }
            }
        }
        "prefix0" => {
            for i in 0..p {
                if !c.flags[i] {
                    break;
                }
                out.push(i);
            }
        }
        _ => panic!("unknown filter {filter}"),
    }
    (out, p)
}

fn caption_score(c: &RawCaption, score: &str, filter: &str, with_end: bool) -> f64 {
    let (sel, p) = selected(c, filter, with_end);
    let mut product = 1.0;
    for &i in &sel {
        product *= c.probs[i];
    }
    match score {
        "prob" => product,
        "pplx" => {
            if sel.is_empty() {
                f64::INFINITY
            } else {
                product.powf(-1.0 / sel.len() as f64)
            }
        }
        "count" => sel.len() as f64,
        "normcount" => sel.len() as f64 / p as f64,
        _ => panic!("unknown score {score}"),
    }
}

pub fn aggregate(kind: &str, xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let n = xs.len() as f64;
    match kind {
        "sum" => xs.iter().sum(),
        "mean" => xs.iter().sum::<f64>() / n,
        "median" => {
            let mut v = xs.to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let h = v.len() / 2;
            if v.len() % 2 == 1 {
                v[h]
            } else {
                (v[h - 1] + v[h]) / 2.0
            }
        }
        "geomean" => {
            if xs.contains(&0.0) {
                0.0
            } else if xs.iter().any(|x| x.is_infinite()) {
                f64::INFINITY
            } else {
                // Taking roots first keeps the product away from underflow.
                xs.iter().map(|x| x.powf(1.0 / n)).product()
            }
        }
        "max" => xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        "min" => xs.iter().cloned().fold(f64::INFINITY, f64::min),
        _ => panic!("unknown aggregator {kind}"),
    }
}

/// Straight evaluation of one `t4_t3_t2_t1` name.
pub fn pregen_oracle(name: &str, images: &[RawImage], with_end: bool) -> f64 {
    let parts: Vec<&str> = name.split('_').collect();
    let (t4, t3, t2, t1) = (parts[0], parts[1], parts[2], parts[3]);
    let mut images: Vec<&RawImage> = images.iter().collect();
    images.sort_by(|a, b| a.0.cmp(&b.0));
    if t3 == "join" {
        let mut all = Vec::new();
        for (_, caps) in &images {
            for c in caps {
                all.push(caption_score(c, t2, t1, with_end));
            }
        }
        aggregate(t4, &all)
    } else {
        let mut per_image = Vec::new();
        for (_, caps) in &images {
            let scores: Vec<f64> = caps.iter().map(|c| caption_score(c, t2, t1, with_end)).collect();
            per_image.push(aggregate(t3, &scores));
        }
        aggregate(t4, &per_image)
    }
}

/// Perplexity of the whole dataset as the geometric mean of per-caption
/// perplexities over every position.
pub fn perplexity_oracle(images: &[RawImage]) -> f64 {
    let mut logs = Vec::new();
    for (_, caps) in images {
        for c in caps {
            let ll: f64 = c.probs.iter().map(|p| p.ln()).sum();
            logs.push(-ll / c.probs.len() as f64);
        }
    }
    (logs.iter().sum::<f64>() / logs.len() as f64).exp()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    if a.is_infinite() || b.is_infinite() || a.is_nan() || b.is_nan() {
        return a == b;
    }
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-300
}

const WORDS: [&str; 6] = ["a", "dog", "cat", "red", "runs", "the"];

pub fn random_words(rng: &mut impl Rng, vocab: usize, min: usize, max: usize) -> Vec<String> {
    let len = rng.gen_range(min..=max);
    (0..len).map(|_| WORDS[rng.gen_range(0..vocab)].to_string()).collect()
}

pub fn random_images(rng: &mut impl Rng) -> Vec<RawImage> {
    let n_images = rng.gen_range(1..=5);
    (0..n_images)
        .map(|i| {
            let n_caps = rng.gen_range(1..=3);
            let caps = (0..n_caps)
                .map(|_| {
                    let words = random_words(rng, WORDS.len(), 1, 6);
                    let all_right = rng.gen_bool(0.2);
                    let probs = (0..=words.len())
                        .map(|_| match rng.gen_range(0..20) {
                            0 => 0.0,
                            1..=3 => 1.0,
                            _ => rng.gen_range(1e-3..1.0),
                        })
                        .collect();
                    let flags = (0..=words.len()).map(|_| all_right || rng.gen_bool(0.6)).collect();
                    RawCaption { words, probs, flags }
                })
                .collect();
            (format!("im{i}"), caps)
        })
        .collect()
}

pub type Sentence = Vec<String>;

fn ngrams(s: &[String], n: usize) -> Vec<Vec<String>> {
    if s.len() < n {
        return Vec::new();
    }
    (0..=s.len() - n).map(|i| s[i..i + n].to_vec()).collect()
}

fn count(list: &[Vec<String>], g: &[String]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

fn distinct(lists: &[&[Vec<String>]]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = Vec::new();
    for l in lists {
        for g in l.iter() {
            if !out.contains(g) {
                out.push(g.clone());
            }
        }
    }
    out
}

/// CIDEr-D of `cand` against `refs`, with document frequencies taken over
/// the reference sets of `corpus`.
pub fn cider_oracle(cand: &[String], refs: &[Sentence], corpus: &[Vec<Sentence>]) -> f64 {
    let n_docs = corpus.len() as f64;
    let idf = |g: &[String]| {
        let df = corpus
            .iter()
            .filter(|doc| doc.iter().any(|r| count(&ngrams(r, g.len()), g) > 0))
            .count();
        n_docs.ln() - (df.max(1) as f64).ln()
    };
    let mut total = 0.0;
    for r in refs {
        let delta = cand.len() as f64 - r.len() as f64;
        let penalty = (-delta * delta / 72.0).exp();
        let mut sum_n = 0.0;
        for n in 1..=4 {
            let gc = ngrams(cand, n);
            let gr = ngrams(r, n);
            let keys = distinct(&[&gc, &gr]);
            let vc: Vec<f64> = keys.iter().map(|g| count(&gc, g) as f64 * idf(g)).collect();
            let vr: Vec<f64> = keys.iter().map(|g| count(&gr, g) as f64 * idf(g)).collect();
            let dot: f64 = vc.iter().zip(&vr).map(|(c, r)| c.min(*r) * r).sum();
            let nc = vc.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nr = vr.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nc > 0.0 && nr > 0.0 {
                sum_n += dot / (nc * nr) * penalty;
            }
        }
        total += sum_n / 4.0;
    }
    10.0 * total / refs.len() as f64
}

pub fn bleu_oracle(pairs: &[(Sentence, Vec<Sentence>)]) -> f64 {
    let mut c_len = 0usize;
    let mut r_len = 0usize;
    let mut log_p = 0.0;
    for n in 1..=4 {
        let mut matched = 0usize;
        let mut total = 0usize;
        for (cand, refs) in pairs {
            let gc = ngrams(cand, n);
            total += gc.len();
            for g in distinct(&[&gc]) {
                let best = refs.iter().map(|r| count(&ngrams(r, n), &g)).max().unwrap_or(0);
                matched += count(&gc, &g).min(best);
            }
        }
        if matched == 0 {
            return 0.0;
        }
        log_p += (matched as f64 / total as f64).ln() / 4.0;
    }
    for (cand, refs) in pairs {
        c_len += cand.len();
        let mut best = refs[0].len();
        for r in refs {
            let (d, bd) = (r.len().abs_diff(cand.len()), best.abs_diff(cand.len()));
            if d < bd || (d == bd && r.len() < best) {
                best = r.len();
            }
        }
        r_len += best;
    }
    let bp = if c_len > r_len { 1.0 } else { (1.0 - r_len as f64 / c_len as f64).exp() };
    bp * log_p.exp()
}

/// Minimum transport cost by enumerating every integer flow.
pub fn transport_oracle(supplies: &[u64], demands: &[u64], costs: &[Vec<f64>]) -> f64 {
    fn rows(i: usize, s: &[u64], left: &mut Vec<u64>, c: &[Vec<f64>], acc: f64, best: &mut f64) {
        if i == s.len() {
            if left.iter().all(|&x| x == 0) && acc < *best {
                *best = acc;
            }
            return;
        }
        cols(i, 0, s[i], s, left, c, acc, best);
    }
    #[allow(clippy::too_many_arguments)]
    fn cols(
        i: usize,
        j: usize,
        rem: u64,
        s: &[u64],
        left: &mut Vec<u64>,
        c: &[Vec<f64>],
        acc: f64,
        best: &mut f64,
    ) {
        if j + 1 == left.len() {
            if rem <= left[j] {
                left[j] -= rem;
                rows(i + 1, s, left, c, acc + rem as f64 * c[i][j], best);
                left[j] += rem;
            }
            return;
        }
        for f in 0..=rem.min(left[j]) {
            left[j] -= f;
            cols(i, j + 1, rem - f, s, left, c, acc + f as f64 * c[i][j], best);
            left[j] += f;
        }
    }
    let mut best = f64::INFINITY;
    rows(0, supplies, &mut demands.to_vec(), costs, 0.0, &mut best);
    best
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Word mover's distance over bag-of-words with integer-scaled masses.
pub fn wmd_oracle(cand: &[String], reference: &[String], vec_of: impl Fn(&str) -> Vec<f64>) -> f64 {
    let bag = |s: &[String]| {
        let mut words: Vec<String> = s.to_vec();
        words.sort();
        words.dedup();
        let counts: Vec<u64> = words.iter().map(|w| s.iter().filter(|x| *x == w).count() as u64).collect();
        (words, counts)
    };
    let (cw, cc) = bag(cand);
    let (rw, rc) = bag(reference);
    let (ct, rt) = (cand.len() as u64, reference.len() as u64);
    let supplies: Vec<u64> = cc.iter().map(|c| c * rt).collect();
    let demands: Vec<u64> = rc.iter().map(|c| c * ct).collect();
    let costs: Vec<Vec<f64>> = cw
        .iter()
        .map(|a| rw.iter().map(|b| euclid(&vec_of(a), &vec_of(b))).collect())
        .collect();
    transport_oracle(&supplies, &demands, &costs) / (ct * rt) as f64
}
