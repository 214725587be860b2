//! Synthetic tasks with exactly checkable answers.
//!
//! Every completion has the shape `@{m-1} … @0 <ans> answer <eos>`: a short
//! countdown that paces the model past the first eviction rounds, then the
//! answer span.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{self, ANS, BOS, EOS, FILL, MINUS, N_CLOCK, N_LETTERS, N_PAIR_KEYS, PLUS, QUERY, SEP, TIMES};
use crate::error::{NgcError, Result};
use crate::sampler::StreamKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Bound `key=value` tokens, filler, then a query key; answer the key
    /// followed by its value.
    KeyedRecall,
    /// A run of letters; answer its last `tail` tokens.
    CopyTail,
    /// `a ∘ b` with small operands; answer the result's digits.
    MicroArith,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Number of pairs (keyed-recall).
    pub pairs: usize,
    /// Filler tokens (keyed-recall) or sequence length (copy-tail).
    pub filler: usize,
    /// Operands and values are drawn from `0..digits`.
    pub digits: usize,
    /// Answer length for copy-tail.
    pub tail: usize,
    /// Countdown tokens before `<ans>`.
    pub think: usize,
    /// Filler appended to untagged prompts so they match tagged lengths.
    pub tag_slot: usize,
    pub seed: u64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            kind: TaskKind::KeyedRecall,
            pairs: 3,
            filler: 0,
            digits: 10,
            tail: 2,
            think: 17,
            tag_slot: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub index: u64,
    /// Prompt body without any rate tag.
    pub body: Vec<usize>,
    pub answer: Vec<usize>,
    pub think: usize,
}

const TASK_STREAM: u64 = u64::MAX - 1;

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NgcError::Config(format!("task: {m}")));
        if self.think > N_CLOCK {
            return bad(&format!("think {} exceeds the {N_CLOCK} countdown tokens", self.think));
        }
        if !(1..=10).contains(&self.digits) && self.kind != TaskKind::MicroArith {
            return bad("digits must lie in 1..=10");
        }
        match self.kind {
            TaskKind::KeyedRecall if self.pairs == 0 || self.pairs > N_PAIR_KEYS => bad("pairs must lie in 1..=8"),
            TaskKind::CopyTail if self.tail == 0 || self.tail > self.filler => bad("tail must lie in 1..=filler"),
            TaskKind::MicroArith if !(1..=100).contains(&self.digits) => bad("operand range must lie in 1..=100"),
            _ => Ok(()),
        }
    }

    /// Deterministic instance number `index`.
    pub fn instance(&self, index: u64) -> Instance {
        let mut rng = StreamKey {
            seed: self.seed,
            trajectory: index,
            layer: TASK_STREAM,
            round: 0,
        }
        .rng();
        let mut body = vec![BOS, SEP];
        let answer = match self.kind {
            TaskKind::KeyedRecall => {
                let mut keys: Vec<usize> = (0..N_PAIR_KEYS).collect();
                keys.shuffle(&mut rng);
                keys.truncate(self.pairs);
                let values: Vec<usize> = (0..self.pairs).map(|_| rng.gen_range(0..self.digits)).collect();
                for (k, v) in keys.iter().zip(&values) {
                    body.push(vocab::pair(*k, *v));
                }
                body.extend(std::iter::repeat(FILL).take(self.filler));
                let q = rng.gen_range(0..self.pairs);
                body.push(QUERY);
                body.push(vocab::letter(keys[q]));
                vec![vocab::letter(keys[q]), vocab::digit(values[q])]
            }
            TaskKind::CopyTail => {
                let seq: Vec<usize> = (0..self.filler).map(|_| vocab::letter(rng.gen_range(0..N_LETTERS))).collect();
                body.extend(&seq);
                body.push(QUERY);
                seq[seq.len() - self.tail..].to_vec()
            }
            TaskKind::MicroArith => {
                let a = rng.gen_range(0..self.digits) as i64;
                let b = rng.gen_range(0..self.digits) as i64;
                let (op, value) = match rng.gen_range(0..3) {
                    0 => (PLUS, a + b),
                    1 => (MINUS, a - b),
                    _ => (TIMES, a * b),
                };
                body.extend(number_tokens(a));
                body.push(op);
                body.extend(number_tokens(b));
                body.push(QUERY);
                number_tokens(value)
            }
        };
        Instance {
            index,
            body,
            answer,
            think: self.think,
        }
    }
}

fn number_tokens(v: i64) -> Vec<usize> {
    let mut out = Vec::new();
    if v < 0 {
        out.push(MINUS);
    }
    out.extend(v.unsigned_abs().to_string().bytes().map(|b| vocab::digit((b - b'0') as usize)));
    out
}

/// `n` consecutive instances starting at `start`.
pub fn generate_instances(spec: &TaskSpec, start: u64, n: usize) -> Vec<Instance> {
    (0..n as u64).map(|i| spec.instance(start + i)).collect()
}

impl Instance {
    /// Prompt tokens: the body, then the rate tag if given, otherwise
    /// `tag_slot` filler tokens.
    pub fn prompt(&self, tag: Option<&[usize]>, tag_slot: usize) -> Vec<usize> {
        let mut p = self.body.clone();
        match tag {
            Some(t) => p.extend_from_slice(t),
            None => p.extend(std::iter::repeat(FILL).take(tag_slot)),
        }
        p
    }

    /// The well-formed completion that earns reward.
    pub fn reference_completion(&self) -> Vec<usize> {
        let mut c: Vec<usize> = (0..self.think).rev().map(vocab::clock).collect();
        c.push(ANS);
        c.extend(&self.answer);
        c.push(EOS);
        c
    }
}

/// 1 when the first `<ans>` is followed by exactly the answer and `<eos>`.
pub fn verify(instance: &Instance, completion: &[usize]) -> f64 {
    let Some(pos) = completion.iter().position(|&t| t == ANS) else {
        return 0.0;
    };
    let rest = &completion[pos + 1..];
    let ok = rest.len() == instance.answer.len() + 1
        && rest[..instance.answer.len()] == instance.answer[..]
        && rest.last() == Some(&EOS);
    if ok {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::vocab::{detokenize, VOCAB_SIZE};

    /// Every token that can appear in a keyed-recall answer span, plus a few
    /// distractors.
    fn answer_alphabet() -> Vec<usize> {
        let mut a = vec![ANS, EOS, SEP, QUERY, FILL, vocab::PAIR0, VOCAB_SIZE - 1];
        a.extend((0..10).map(vocab::digit));
        a.extend((0..N_PAIR_KEYS).map(vocab::letter));
        a
    }

    #[test]
    fn single_pair_is_trivially_recoverable() {
        let spec = TaskSpec {
            pairs: 1,
            think: 0,
            ..TaskSpec::default()
        };
        let inst = spec.instance(0);
        assert_eq!(inst.body.len(), 5);
        let bound = inst.body[2] - vocab::PAIR0;
        assert_eq!(inst.answer, vec![vocab::letter(bound / 10), vocab::digit(bound % 10)]);
        assert_eq!(inst.body[4], inst.answer[0]);
    }

    #[test]
    fn instances_are_deterministic() {
        let spec = TaskSpec::default();
        assert_eq!(generate_instances(&spec, 0, 20), generate_instances(&spec, 0, 20));
        let other = TaskSpec { seed: 1, ..spec };
        assert_ne!(generate_instances(&spec, 0, 20), generate_instances(&other, 0, 20));
    }

    #[test]
    fn reference_completion_verifies() {
        for kind in [TaskKind::KeyedRecall, TaskKind::CopyTail, TaskKind::MicroArith] {
            let spec = TaskSpec {
                kind,
                filler: 4,
                ..TaskSpec::default()
            };
            spec.validate().unwrap();
            for inst in generate_instances(&spec, 0, 30) {
                assert_eq!(verify(&inst, &inst.reference_completion()), 1.0, "{}", detokenize(&inst.body));
            }
        }
    }

    #[test]
    fn strict_format() {
        let inst = TaskSpec::default().instance(3);
        let good = inst.reference_completion();
        assert_eq!(verify(&inst, &good[..good.len() - 1]), 0.0);
        let mut wrong_delim = good.clone();
        let ans_pos = good.iter().position(|&t| t == ANS).unwrap();
        wrong_delim[ans_pos] = SEP;
        assert_eq!(verify(&inst, &wrong_delim), 0.0);
        let mut wrong_value = good.clone();
        wrong_value[ans_pos + 2] = vocab::digit((inst.answer[1] - vocab::DIGIT0 + 1) % 10);
        assert_eq!(verify(&inst, &wrong_value), 0.0);
    }

    #[test]
    fn exactly_one_short_completion_is_accepted() {
        let spec = TaskSpec {
            think: 0,
            ..TaskSpec::default()
        };
        let alphabet = answer_alphabet();
        let n = alphabet.len();
        for inst in generate_instances(&spec, 0, 3) {
            let mut accepted = 0;
            for len in 0..=4usize {
                for code in 0..n.pow(len as u32) {
                    let mut c = Vec::with_capacity(len);
                    let mut x = code;
                    for _ in 0..len {
                        c.push(alphabet[x % n]);
                        x /= n;
                    }
                    accepted += verify(&inst, &c) as usize;
                }
            }
            assert_eq!(accepted, 1);
        }
    }

    #[test]
    fn arithmetic_answers() {
        assert_eq!(number_tokens(-12), vec![MINUS, vocab::digit(1), vocab::digit(2)]);
        assert_eq!(number_tokens(0), vec![vocab::digit(0)]);
    }
}
