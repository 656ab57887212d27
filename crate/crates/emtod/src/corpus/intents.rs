//! The 13-intent schema for the scheduling assistant.

/// Intent names in canonical (index) order.
pub const INTENTS: [&str; 13] = [
    "schedule_meeting",
    "cancel_meeting",
    "reschedule_meeting",
    "add_attendee",
    "remove_attendee",
    "change_duration",
    "change_location",
    "change_meeting_mode",
    "provide_availability",
    "confirm_time",
    "decline_time",
    "ask_status",
    "no_action",
];

pub const N_INTENTS: usize = INTENTS.len();

pub fn intent_index(name: &str) -> Option<usize> {
    INTENTS.iter().position(|&i| i == name)
}

/// Multi-hot vector over the canonical intent order.
pub fn multi_hot(names: &[String]) -> Option<Vec<f64>> {
    let mut v = vec![0.0; N_INTENTS];
    for n in names {
        v[intent_index(n)?] = 1.0;
    }
    Some(v)
}

/// Set of intent indices from a thresholded probability vector (strict >).
pub fn predicted_set(probs: &[f64], threshold: f64) -> Vec<usize> {
    probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > threshold)
        .map(|(i, _)| i)
        .collect()
}
