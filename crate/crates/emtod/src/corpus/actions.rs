//! The 35-action vocabulary used to summarize assistant turns.

/// Action tags in canonical order. `other_action` is the reserved fallback
/// for text that matches no pattern.
pub const ACTIONS: [&str; 35] = [
    "ask_day",
    "ask_time",
    "ask_duration",
    "ask_location",
    "ask_mode",
    "ask_platform",
    "ask_timezone",
    "ask_attendees",
    "propose_slots",
    "propose_single_time",
    "confirm_scheduled",
    "confirm_rescheduled",
    "confirm_cancelled",
    "confirm_duration_change",
    "confirm_location_change",
    "confirm_mode_change",
    "confirm_attendee_added",
    "confirm_attendee_removed",
    "report_conflict",
    "report_no_availability",
    "report_status",
    "send_invite",
    "send_reminder",
    "request_confirmation",
    "acknowledge_availability",
    "acknowledge_decline",
    "apologize_error",
    "clarify_request",
    "notify_reschedule_needed",
    "notify_cancellation_by_attendee",
    "offer_alternatives",
    "summarize_meeting_details",
    "greet_introduce",
    "handoff_human",
    "other_action",
];

pub const N_ACTIONS: usize = ACTIONS.len();
pub const FALLBACK_ACTION: &str = "other_action";

pub fn action_index(name: &str) -> Option<usize> {
    ACTIONS.iter().position(|&a| a == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_has_exactly_35_unique_actions() {
        assert_eq!(N_ACTIONS, 35);
        let mut sorted: Vec<_> = ACTIONS.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 35);
        assert!(action_index(FALLBACK_ACTION).is_some());
    }
}
