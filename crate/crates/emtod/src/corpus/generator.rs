//! Deterministic synthetic corpus generation.
//!
//! Each dialogue is produced from its own RNG stream derived from
//! (seed, dialogue index), so output is identical no matter how generation
//! is scheduled. An organizer opens with a meeting request, attendees reply
//! (sometimes to each other, which the assistant must ignore), and the
//! assistant answers with exactly one action-tagged sentence wrapped in
//! polite filler. A configurable fraction of user turns are ambiguous:
//! their surface text recurs elsewhere in the corpus under different gold
//! intents, and only the preceding agent action pins the meaning.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::schema::{save_jsonl, save_meta, CorpusMeta, Dialogue, Role, Sentence, Turn};
use super::templates::{
    agent_templates, fill_template, user_templates, Augmentation, AGENT_FILLERS,
    AMBIGUOUS_FAMILIES, FIRST_TURN_PAIR, INTENT_PAIRS, NAMES, USER_DISTRACTORS,
};
use super::vocab::Vocab;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.8, val: 0.1, test: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub n_dialogues: usize,
    pub mean_user_turns: f64,
    pub max_user_turns: usize,
    pub ambiguity_rate: f64,
    pub distractor_rate: f64,
    pub multi_intent_rate: f64,
    pub augmentation: Augmentation,
    pub seed: u64,
    pub split: SplitFractions,
    pub min_token_freq: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_dialogues: 6250,
            mean_user_turns: 4.49,
            max_user_turns: 20,
            ambiguity_rate: 0.30,
            distractor_rate: 0.45,
            multi_intent_rate: 0.15,
            augmentation: Augmentation::default(),
            seed: 42,
            split: SplitFractions::default(),
            min_token_freq: 1,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_dialogues == 0 {
            return Err(Error::Config("n_dialogues must be positive".to_string()));
        }
        if self.mean_user_turns <= 1.0 {
            return Err(Error::Config("mean_user_turns must exceed 1".to_string()));
        }
        for (name, v) in [
            ("ambiguity_rate", self.ambiguity_rate),
            ("distractor_rate", self.distractor_rate),
            ("multi_intent_rate", self.multi_intent_rate),
            ("split.train", self.split.train),
            ("split.val", self.split.val),
            ("split.test", self.split.test),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        let sum = self.split.train + self.split.val + self.split.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub train: Vec<Dialogue>,
    pub val: Vec<Dialogue>,
    pub test: Vec<Dialogue>,
}

impl GeneratedCorpus {
    pub fn total(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }
}

/// Generate all dialogues and split them by index range.
pub fn generate(config: &CorpusConfig) -> Result<GeneratedCorpus> {
    config.validate()?;
    let dialogues: Vec<Dialogue> = (0..config.n_dialogues)
        .map(|i| generate_dialogue(i as u64, config))
        .collect();

    let n = config.n_dialogues;
    let n_train = ((n as f64) * config.split.train).round() as usize;
    let n_val = ((n as f64) * config.split.val).round() as usize;
    let n_train = n_train.min(n);
    let n_val = n_val.min(n - n_train);

    let mut it = dialogues.into_iter();
    let train: Vec<Dialogue> = it.by_ref().take(n_train).collect();
    let val: Vec<Dialogue> = it.by_ref().take(n_val).collect();
    let test: Vec<Dialogue> = it.collect();
    Ok(GeneratedCorpus { train, val, test })
}

/// Generate and write `train.jsonl`, `val.jsonl`, `test.jsonl`, `vocab.txt`
/// (built from the train split only), `meta.json`, and `action_table.json`.
pub fn generate_to_dir(config: &CorpusConfig, dir: &Path) -> Result<GeneratedCorpus> {
    let corpus = generate(config)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    save_jsonl(&dir.join("train.jsonl"), &corpus.train)?;
    save_jsonl(&dir.join("val.jsonl"), &corpus.val)?;
    save_jsonl(&dir.join("test.jsonl"), &corpus.test)?;
    let vocab = Vocab::build(&corpus.train, config.min_token_freq)?;
    vocab.save(&dir.join("vocab.txt"))?;
    save_meta(
        &dir.join("meta.json"),
        &CorpusMeta::current(config.n_dialogues, config.seed),
    )?;
    crate::agent::ActionTable::default_table().save(&dir.join("action_table.json"))?;
    Ok(corpus)
}

fn stream_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 over the pair; stable across platforms and releases.
    let mut z = seed ^ (index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct DialogueState<'a> {
    rng: ChaCha8Rng,
    config: &'a CorpusConfig,
    organizer: &'static str,
    attendees: Vec<&'static str>,
    last_action: Option<&'static str>,
    last_primary: Option<&'static str>,
}

fn generate_dialogue(index: u64, config: &CorpusConfig) -> Dialogue {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, index));
    let organizer = *NAMES.choose(&mut rng).unwrap();
    let n_attendees = rng.gen_range(1..=3);
    let mut attendees = Vec::with_capacity(n_attendees);
    while attendees.len() < n_attendees {
        let name = *NAMES.choose(&mut rng).unwrap();
        if name != organizer && !attendees.contains(&name) {
            attendees.push(name);
        }
    }
    let k_user = sample_user_turn_count(&mut rng, config.mean_user_turns, config.max_user_turns);

    let mut state = DialogueState {
        rng,
        config,
        organizer,
        attendees,
        last_action: None,
        last_primary: None,
    };
    let mut turns = Vec::with_capacity(2 * k_user);
    for t in 0..k_user {
        turns.push(state.user_turn(t));
        let emit_agent = t + 1 < k_user || state.rng.gen_bool(0.5);
        if emit_agent {
            turns.push(state.agent_turn());
        }
    }
    Dialogue { id: format!("d{index:06}"), turns }
}

fn sample_user_turn_count(rng: &mut impl Rng, mean: f64, max: usize) -> usize {
    let p = 1.0 / mean;
    let mut k = 1;
    while k < max && rng.gen::<f64>() > p {
        k += 1;
    }
    k
}

impl DialogueState<'_> {
    fn user_turn(&mut self, t: usize) -> Turn {
        let speaker = if t == 0 || self.rng.gen_bool(0.6) {
            self.organizer
        } else {
            *self.attendees.choose(&mut self.rng).unwrap()
        };

        // Ambiguous turns only exist after an agent action that some family
        // covers. The per-turn probability is scaled because turn 1 never
        // qualifies, and further calibrated for the share of actions that no
        // family covers (measured on generated corpora).
        let m = self.config.mean_user_turns;
        let p_amb = (self.config.ambiguity_rate * m / (m - 1.0) / 0.82).min(0.97);
        if let Some(action) = self.last_action {
            if self.rng.gen_bool(p_amb) {
                let coherent: Vec<&super::templates::AmbiguousFamily> = AMBIGUOUS_FAMILIES
                    .iter()
                    .filter(|f| f.intent_by_action.iter().any(|(a, _)| *a == action))
                    .collect();
                if let Some(family) = coherent.choose(&mut self.rng) {
                    let surface = family.surfaces.choose(&mut self.rng).unwrap();
                    let intent = family
                        .intent_by_action
                        .iter()
                        .find(|(a, _)| *a == action)
                        .map(|(_, i)| *i)
                        .unwrap();
                    let text =
                        fill_template(surface, &mut self.rng, &self.config.augmentation);
                    self.last_primary = Some(intent);
                    return self.assemble_user_turn(speaker, vec![(text, intent)], true);
                }
            }
        }

        let intents = self.plain_intents(t);
        self.last_primary = Some(intents[0]);
        let sentences = intents
            .iter()
            .map(|intent| {
                let template = user_templates(intent).choose(&mut self.rng).unwrap();
                (fill_template(template, &mut self.rng, &self.config.augmentation), *intent)
            })
            .collect();
        self.assemble_user_turn(speaker, sentences, false)
    }

    /// Unambiguous intent choice: usually responsive to the agent's last
    /// action, otherwise an open follow-up ask.
    fn plain_intents(&mut self, t: usize) -> Vec<&'static str> {
        let q_multi = (self.config.multi_intent_rate
            / (1.0 - self.config.ambiguity_rate).max(0.05))
        .min(1.0);

        if t == 0 {
            let mut intents = vec![FIRST_TURN_PAIR.0];
            if self.rng.gen_bool(q_multi) {
                intents.push(FIRST_TURN_PAIR.1);
            }
            return intents;
        }

        let responsive: Option<&'static str> = match self.last_action {
            Some(a) if self.rng.gen_bool(0.6) => match a {
                "ask_day" | "ask_time" | "ask_timezone" => Some("provide_availability"),
                "propose_slots" | "propose_single_time" | "offer_alternatives"
                | "request_confirmation" => Some(if self.rng.gen_bool(0.6) {
                    "confirm_time"
                } else {
                    "decline_time"
                }),
                "ask_duration" => Some("change_duration"),
                "ask_location" => Some("change_location"),
                "ask_platform" | "ask_mode" => Some("change_meeting_mode"),
                "ask_attendees" => Some("add_attendee"),
                "report_conflict" | "report_no_availability" | "notify_reschedule_needed" => {
                    Some(if self.rng.gen_bool(0.5) {
                        "provide_availability"
                    } else {
                        "reschedule_meeting"
                    })
                }
                "notify_cancellation_by_attendee" => Some(if self.rng.gen_bool(0.5) {
                    "remove_attendee"
                } else {
                    "reschedule_meeting"
                }),
                _ => None,
            },
            _ => None,
        };

        let primary = responsive.unwrap_or_else(|| {
            choose_weighted(
                &mut self.rng,
                &[
                    ("schedule_meeting", 0.08),
                    ("reschedule_meeting", 0.14),
                    ("cancel_meeting", 0.08),
                    ("add_attendee", 0.12),
                    ("remove_attendee", 0.06),
                    ("change_duration", 0.10),
                    ("change_location", 0.10),
                    ("change_meeting_mode", 0.08),
                    ("ask_status", 0.12),
                    ("no_action", 0.12),
                ],
            )
        });

        let mut intents = vec![primary];
        if self.rng.gen_bool(q_multi) {
            let partners: Vec<&'static str> = INTENT_PAIRS
                .iter()
                .filter(|(a, _)| *a == primary)
                .map(|(_, b)| *b)
                .collect();
            if let Some(second) = partners.choose(&mut self.rng) {
                intents.push(second);
            }
        }
        intents
    }

    fn assemble_user_turn(
        &mut self,
        speaker: &str,
        task_sentences: Vec<(String, &'static str)>,
        ambiguous: bool,
    ) -> Turn {
        let k = task_sentences.len();
        let gold: Vec<String> = {
            let mut seen = Vec::new();
            for (_, intent) in &task_sentences {
                if !seen.contains(&intent.to_string()) {
                    seen.push(intent.to_string());
                }
            }
            seen
        };

        let mut sentences: Vec<Sentence> = task_sentences
            .into_iter()
            .map(|(text, _)| Sentence { text, relevant: true })
            .collect();

        // Distractor count tuned so irrelevant sentences make up roughly
        // distractor_rate of the turn: E[d] = r * k / (1 - r) via 4 trials.
        let r = self.config.distractor_rate;
        let p = (r * k as f64 / ((1.0 - r).max(0.05) * 4.0)).min(1.0);
        for _ in 0..4 {
            if self.rng.gen_bool(p) {
                let text = USER_DISTRACTORS.choose(&mut self.rng).unwrap().to_string();
                let pos = self.rng.gen_range(0..=sentences.len());
                sentences.insert(pos, Sentence { text, relevant: false });
            }
        }

        Turn {
            role: Role::User,
            speaker_id: speaker.to_string(),
            sentences,
            gold_intents: Some(gold),
            gold_action: None,
            ambiguous: Some(ambiguous),
        }
    }

    fn agent_turn(&mut self) -> Turn {
        let action = self.agent_action();
        self.last_action = Some(action);

        let template = agent_templates(action)
            .choose(&mut self.rng)
            .expect("every generated action has a template");
        let action_text = fill_template(template, &mut self.rng, &self.config.augmentation);

        let mut sentences = Vec::new();
        let n_pre = self.rng.gen_range(0..=3);
        for _ in 0..n_pre {
            sentences.push(Sentence {
                text: AGENT_FILLERS.choose(&mut self.rng).unwrap().to_string(),
                relevant: false,
            });
        }
        sentences.push(Sentence { text: action_text, relevant: true });
        if self.rng.gen_bool(0.4) {
            sentences.push(Sentence {
                text: AGENT_FILLERS.choose(&mut self.rng).unwrap().to_string(),
                relevant: false,
            });
        }

        Turn {
            role: Role::Agent,
            speaker_id: "assistant".to_string(),
            sentences,
            gold_intents: None,
            gold_action: Some(action.to_string()),
            ambiguous: None,
        }
    }

    /// Pick the assistant's next action from the user's primary intent,
    /// with a small slice of incident actions mixed in.
    fn agent_action(&mut self) -> &'static str {
        let roll: f64 = self.rng.gen();
        if roll < 0.015 {
            return "apologize_error";
        } else if roll < 0.03 {
            return "notify_cancellation_by_attendee";
        } else if roll < 0.04 {
            return "handoff_human";
        } else if roll < 0.07 {
            return "notify_reschedule_needed";
        }

        let primary = self
            .last_user_primary_intent()
            .unwrap_or("schedule_meeting");
        match primary {
            "schedule_meeting" => choose_weighted(
                &mut self.rng,
                &[
                    ("ask_day", 0.14),
                    ("ask_time", 0.12),
                    ("propose_slots", 0.16),
                    ("propose_single_time", 0.16),
                    ("ask_duration", 0.10),
                    ("ask_location", 0.10),
                    ("ask_platform", 0.08),
                    ("ask_mode", 0.05),
                    ("ask_attendees", 0.05),
                    ("ask_timezone", 0.02),
                    ("greet_introduce", 0.02),
                ],
            ),
            "provide_availability" => choose_weighted(
                &mut self.rng,
                &[
                    ("propose_single_time", 0.35),
                    ("propose_slots", 0.25),
                    ("acknowledge_availability", 0.20),
                    ("request_confirmation", 0.20),
                ],
            ),
            "confirm_time" => choose_weighted(
                &mut self.rng,
                &[
                    ("confirm_scheduled", 0.50),
                    ("send_invite", 0.30),
                    ("summarize_meeting_details", 0.10),
                    ("report_conflict", 0.10),
                ],
            ),
            "decline_time" => choose_weighted(
                &mut self.rng,
                &[
                    ("offer_alternatives", 0.35),
                    ("propose_slots", 0.25),
                    ("acknowledge_decline", 0.25),
                    ("report_no_availability", 0.15),
                ],
            ),
            "reschedule_meeting" => choose_weighted(
                &mut self.rng,
                &[
                    ("propose_slots", 0.30),
                    ("propose_single_time", 0.30),
                    ("ask_day", 0.20),
                    ("confirm_rescheduled", 0.20),
                ],
            ),
            "cancel_meeting" => "confirm_cancelled",
            "add_attendee" => "confirm_attendee_added",
            "remove_attendee" => "confirm_attendee_removed",
            "change_duration" => "confirm_duration_change",
            "change_location" => "confirm_location_change",
            "change_meeting_mode" => "confirm_mode_change",
            "ask_status" => choose_weighted(
                &mut self.rng,
                &[
                    ("report_status", 0.50),
                    ("summarize_meeting_details", 0.30),
                    ("send_reminder", 0.20),
                ],
            ),
            _ => choose_weighted(
                &mut self.rng,
                &[
                    ("report_status", 0.40),
                    ("clarify_request", 0.30),
                    ("send_reminder", 0.30),
                ],
            ),
        }
    }

    fn last_user_primary_intent(&self) -> Option<&'static str> {
        self.last_primary
    }
}

fn choose_weighted<'a>(rng: &mut impl Rng, options: &[(&'a str, f64)]) -> &'a str {
    let total: f64 = options.iter().map(|(_, w)| w).sum();
    let mut roll = rng.gen::<f64>() * total;
    for (value, weight) in options {
        roll -= weight;
        if roll <= 0.0 {
            return value;
        }
    }
    options.last().unwrap().0
}
