//! Seeded synthetic listening-test data with a known `alpha`.
//!
//! Items imitate how abstaining transcripts are built from conventional ones:
//! a reference is corrupted into `A` with substitutions, deletions, and
//! hallucinated insertions at a per-item noise level; `B` replaces every
//! error of `A` with a placeholder and masks a few correct words as well.
//! Listener votes are then drawn from the Bradley–Terry model at the true
//! `alpha`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alignment::Alpha;
use crate::calibration::{PreferenceRecord, PreparedRecord};
use crate::text::{Tokenizer, PH_SURFACE};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub items: usize,
    pub votes: u32,
    pub alpha_true: Alpha,
    /// Chance that a single vote is "can't decide".
    pub tie_prob: f64,
    pub min_len: usize,
    pub max_len: usize,
    /// Per-item noise level is drawn uniformly from this range.
    pub noise: (f64, f64),
    /// Chance that a correct word of `A` is masked in `B`.
    pub mask_prob: f64,
    /// Per-gap chance of a hallucinated word, as a multiple of the noise level.
    pub hallucination: f64,
    /// Per-word chance of a substitution or deletion, as a multiple of the
    /// noise level; a ninth of these are deletions.
    pub corruption: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            items: 200,
            votes: 25,
            alpha_true: Alpha::new(0.5).expect("valid"),
            tie_prob: 0.0,
            min_len: 3,
            max_len: 10,
            noise: (0.2, 0.8),
            mask_prob: 0.1,
            hallucination: 0.4,
            corruption: 0.9,
        }
    }
}

impl SynthConfig {
    /// Short items whose abstaining transcript replaces hallucinated words
    /// sitting between correctly recognized ones.
    ///
    /// Each placeholder then moves the RAS gap by a full `alpha` per reference
    /// word or more, so the votes pin `alpha` down about twice as tightly as
    /// with the default design.
    pub fn informative() -> Self {
        SynthConfig {
            min_len: 1,
            max_len: 3,
            noise: (0.8, 1.0),
            hallucination: 1.2,
            corruption: 0.1,
            ..SynthConfig::default()
        }
    }
}

const VOCAB: usize = 40;

fn word(rng: &mut ChaCha8Rng) -> String {
    format!("w{}", rng.random_range(0..VOCAB))
}

fn wrong_word(rng: &mut ChaCha8Rng) -> String {
    format!("x{}", rng.random_range(0..VOCAB))
}

/// Builds one `(reference, A, B)` triple.
fn item(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (String, String, String) {
    let n = rng.random_range(cfg.min_len..=cfg.max_len);
    let noise = rng.random_range(cfg.noise.0..=cfg.noise.1);
    let reference: Vec<String> = (0..n).map(|_| word(rng)).collect();
    let mut plain = Vec::new();
    let mut abstain = Vec::new();
    let hallucinate = |rng: &mut ChaCha8Rng, plain: &mut Vec<String>, abstain: &mut Vec<&str>| {
        if rng.random_bool((noise * cfg.hallucination).min(1.0)) {
            plain.push(wrong_word(rng));
            abstain.push(PH_SURFACE);
        }
    };
    for r in &reference {
        hallucinate(rng, &mut plain, &mut abstain);
        let u: f64 = rng.random();
        let corrupt = noise * cfg.corruption;
        if u < corrupt * 8.0 / 9.0 {
            plain.push(wrong_word(rng));
            abstain.push(PH_SURFACE);
        } else if u < corrupt {
            abstain.push(PH_SURFACE);
        } else {
            plain.push(r.clone());
            abstain.push(if rng.random_bool(cfg.mask_prob) {
                PH_SURFACE
            } else {
                r.as_str()
            });
        }
    }
    hallucinate(rng, &mut plain, &mut abstain);
    (reference.join(" "), plain.join(" "), abstain.join(" "))
}

/// Generates `cfg.items` records; the same seed always yields the same data.
pub fn synth_preferences(cfg: &SynthConfig, seed: u64) -> Vec<PreferenceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tokenizer = Tokenizer::default();
    (0..cfg.items)
        .map(|i| {
            let (reference, hyp_plain, hyp_abstain) = item(cfg, &mut rng);
            let mut rec = PreferenceRecord {
                id: format!("synth-{i:05}"),
                reference,
                hyp_plain,
                hyp_abstain,
                k_a: 0,
                k_b: 0,
                k_c: 1,
            };
            let delta = PreparedRecord::prepare(&rec, &tokenizer)
                .expect("generated records are valid")
                .delta_ras(cfg.alpha_true);
            let p_b = 1.0 / (1.0 + (-delta).exp());
            rec.k_c = 0;
            for _ in 0..cfg.votes {
                if rng.random_bool(cfg.tie_prob) {
                    rec.k_c += 1;
                } else if rng.random_bool(p_b) {
                    rec.k_b += 1;
                } else {
                    rec.k_a += 1;
                }
            }
            rec
        })
        .collect()
}
