use std::cmp::Ordering;

use super::model::{argmax, Prev, ToyModel, END};
use crate::datamodel::Token;

#[derive(Debug, Clone)]
struct Hypothesis {
    ids: Vec<u32>,
    log_prob: f64,
}

impl Hypothesis {
    fn score(&self) -> f64 {
        normalized_score(self.log_prob, self.ids.len())
    }

    fn finished(&self) -> bool {
        self.ids.last() == Some(&END)
    }
}

/// Length-normalized log probability; the length counts the end token when
/// present.
pub fn normalized_score(log_prob: f64, len: usize) -> f64 {
    log_prob / len as f64
}

// Best first: higher score, then lexicographically smaller ids.
fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score().total_cmp(&a.score()).then_with(|| a.ids.cmp(&b.ids))
}

fn to_tokens(model: &ToyModel, ids: &[u32]) -> Vec<Token> {
    ids.iter()
        .filter(|&&id| id != END)
        .map(|&id| Token::new(model.word(id)).expect("vocab words are canonical"))
        .collect()
}

/// Beam search from the start token until every beam has ended or
/// `max_len` tokens have been produced. The end token is not allowed as the
/// first token, so captions are never empty.
///
/// At each step all expansions of the live beams are ranked and the best
/// `width` kept; kept expansions ending in the end token retire. The result
/// is the best retired or still-live hypothesis.
pub fn beam_search(model: &ToyModel, attributes: &[String], width: usize, max_len: usize) -> Vec<Token> {
    let width = width.max(1);
    let mut live = vec![Hypothesis {
        ids: Vec::new(),
        log_prob: 0.0,
    }];
    let mut retired: Vec<Hypothesis> = Vec::new();
    for step in 0..max_len.max(1) {
        let mut expansions = Vec::with_capacity(live.len() * model.vocab_size());
        for hyp in &live {
            let prev = hyp.ids.last().map_or(Prev::Start, |&id| Prev::Token(id));
            let row = model.row(attributes, prev);
            for (id, p) in row.iter().enumerate() {
                let id = id as u32;
                if step == 0 && id == END {
                    continue;
                }
                let mut ids = hyp.ids.clone();
                ids.push(id);
                expansions.push(Hypothesis {
                    ids,
                    log_prob: hyp.log_prob + p.ln(),
                });
            }
        }
        expansions.sort_by(rank);
        expansions.truncate(width);
        live.clear();
        for hyp in expansions {
            if hyp.finished() {
                retired.push(hyp);
            } else {
                live.push(hyp);
            }
        }
        if live.is_empty() {
            break;
        }
    }
    let best = retired
        .into_iter()
        .chain(live)
        .min_by(rank)
        .expect("at least one hypothesis");
    to_tokens(model, &best.ids)
}

/// Repeatedly takes the most probable next token (lowest id on ties, end
/// token excluded at the first step).
pub fn greedy_decode(model: &ToyModel, attributes: &[String], max_len: usize) -> Vec<Token> {
    let mut ids = Vec::new();
    let mut prev = Prev::Start;
    for step in 0..max_len.max(1) {
        let row = model.row(attributes, prev);
        let next = if step == 0 {
            1 + argmax(&row[1..])
        } else {
            argmax(&row)
        };
        if next == END {
            break;
        }
        ids.push(next);
        prev = Prev::Token(next);
    }
    to_tokens(model, &ids)
}
