//! Surface templates for the synthetic scheduling-assistant corpus.
//!
//! Every agent action template carries a signature phrase that its pattern
//! in the default action table anchors on, so generated agent turns are
//! recoverable exactly. Ambiguous user surfaces are readable only through
//! the preceding agent action: the same text maps to different gold intents
//! in different contexts.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Augmentation {
    pub meeting_mode: bool,
    pub online_platform: bool,
    pub location: bool,
    pub duration: bool,
    pub timezone: bool,
}

impl Default for Augmentation {
    fn default() -> Self {
        Self {
            meeting_mode: true,
            online_platform: true,
            location: true,
            duration: true,
            timezone: true,
        }
    }
}

pub const NAMES: &[&str] = &[
    "ana", "bruno", "carla", "derek", "elena", "felix", "grace", "hani", "ines", "jonas",
    "kira", "leo", "mara", "nadia", "omar", "priya",
];

pub const TOPICS: &[&str] = &[
    "project sync", "budget review", "quarterly planning", "design review", "hiring sync",
    "product demo", "roadmap discussion", "client kickoff", "sprint retro", "onboarding session",
];

pub const DAYS: &[&str] = &["monday", "tuesday", "wednesday", "thursday", "friday"];

pub const TIMES: &[&str] = &["9 am", "10 am", "11 am", "noon", "2 pm", "3 pm", "4:30 pm"];

pub const DURATIONS: &[&str] =
    &["30 minutes", "15 minutes", "45 minutes", "an hour", "90 minutes", "two hours"];

pub const LOCATIONS: &[&str] = &[
    "the main boardroom", "conference room 4b", "the downtown office", "the cafe on 5th",
    "building 7 lobby", "the studio",
];

pub const PLATFORMS: &[&str] = &["teams", "zoom", "skype", "meet", "webex"];

pub const MODES: &[&str] = &["online", "in person", "a conference call"];

pub const TIMEZONES: &[&str] =
    &["pacific time", "eastern time", "central europe time", "india time", "utc"];

pub const TIMEWINDOWS: &[&str] =
    &["all morning", "after lunch", "before 3 pm", "most of the afternoon"];

pub const DOCS: &[&str] = &["agenda", "slides", "budget sheet", "notes", "contract draft"];

/// Small talk and noise for user emails; never relevant to the task.
pub const USER_DISTRACTORS: &[&str] = &[
    "hope your week is going well .",
    "great seeing everyone at the offsite .",
    "the quarterly numbers look strong by the way .",
    "i will send the draft deck separately .",
    "my flight lands late tonight so replies may be slow .",
    "lunch at the new place was fun , we should do it again .",
    "congrats on the launch , the demo looked great .",
    "ps : the printer on floor two is broken again .",
    "sent from my phone , please excuse typos .",
    "the weather has been lovely lately .",
    "still catching up on email after vacation .",
    "did you see the game last night ? what a finish .",
];

/// Polite padding around the agent's action sentence; not task content.
pub const AGENT_FILLERS: &[&str] = &[
    "hi , thanks for the note .",
    "happy to help with this .",
    "thanks for the quick reply .",
    "got it , thanks for the context .",
    "i am on it .",
    "thanks for your patience while i checked calendars .",
    "just a quick update from my side .",
    "let me know if anything changes .",
    "i will keep this thread posted .",
    "always glad to assist .",
];

/// Unambiguous user surface templates per intent.
pub fn user_templates(intent: &str) -> &'static [&'static str] {
    match intent {
        "schedule_meeting" => &[
            "could you set up a {duration} {topic} with {name} and {name2} sometime next week ?",
            "please schedule a {topic} for early next week .",
            "i need a meeting with {name} about the {topic} .",
            "can you arrange a {topic} over {platform} ?",
            "please find time for a {topic} with the team .",
        ],
        "cancel_meeting" => &[
            "please cancel the {topic} .",
            "we no longer need the {day} meeting , please drop it .",
            "go ahead and scrap the {topic} , priorities shifted .",
        ],
        "reschedule_meeting" => &[
            "can we move the meeting to {day} ?",
            "please push the {topic} to next week .",
            "something came up , we have to shift the {day} slot .",
        ],
        "add_attendee" => &[
            "please add {name} to the invite list .",
            "can you include {name} in the meeting ?",
            "loop {name} into this meeting as well .",
        ],
        "remove_attendee" => &[
            "please take {name} off the invite list .",
            "{name} no longer needs to attend , remove them .",
        ],
        "change_duration" => &[
            "let us make it {duration} instead .",
            "{duration} should be enough for this one .",
            "please extend the meeting to {duration} .",
        ],
        "change_location" => &[
            "can we meet at {location} instead ?",
            "please move the meeting over to {location} .",
            "let us hold it at {location} this time .",
        ],
        "change_meeting_mode" => &[
            "let us do this one over {platform} instead .",
            "can we switch the meeting to {mode} ?",
            "please set this up as a {platform} call .",
        ],
        "provide_availability" => &[
            "i am free on {day} {timewindow} .",
            "any time after {time} works on my end .",
            "my calendar is open on {day} and {day2} .",
            "i am on {timezone} , mornings are best for me .",
        ],
        "confirm_time" => &[
            "yes , let us lock in {day} at {time} .",
            "{day} at {time} is confirmed on my side , go ahead .",
            "booking {day} at {time} works , please proceed .",
        ],
        "decline_time" => &[
            "unfortunately {day} at {time} does not work for me .",
            "i have a conflict with the proposed slot , it will not work .",
            "that time clashes with another commitment , i cannot make it .",
        ],
        "ask_status" => &[
            "any update on the scheduling ?",
            "did the invite go out yet ?",
            "where are we with finding a time for the {topic} ?",
        ],
        "no_action" => &[
            "{name} , could you send over the {doc} before we meet ?",
            "thanks {name} , see you there .",
            "{name} , what is your read on the {doc} ?",
            "nice work on the {doc} , {name} .",
        ],
        _ => &[],
    }
}

/// Intent pairs that can share one user turn (one sentence each).
pub const INTENT_PAIRS: &[(&str, &str)] = &[
    ("reschedule_meeting", "change_location"),
    ("reschedule_meeting", "change_duration"),
    ("add_attendee", "change_duration"),
    ("cancel_meeting", "schedule_meeting"),
    ("change_meeting_mode", "add_attendee"),
    ("provide_availability", "change_duration"),
    ("confirm_time", "add_attendee"),
];

/// Pair usable on the opening turn, which always starts with a request.
pub const FIRST_TURN_PAIR: (&str, &str) = ("schedule_meeting", "provide_availability");

/// One ambiguous surface family: identical text whose gold intent is fixed
/// only by the preceding agent action.
pub struct AmbiguousFamily {
    pub surfaces: &'static [&'static str],
    pub intent_by_action: &'static [(&'static str, &'static str)],
}

pub const AMBIGUOUS_FAMILIES: &[AmbiguousFamily] = &[
    AmbiguousFamily {
        surfaces: &["yes , that works for me .", "sure , that works ."],
        intent_by_action: &[
            ("propose_single_time", "confirm_time"),
            ("summarize_meeting_details", "confirm_time"),
            ("ask_duration", "change_duration"),
            ("ask_location", "change_location"),
            ("ask_platform", "change_meeting_mode"),
            ("ask_mode", "change_meeting_mode"),
        ],
    },
    AmbiguousFamily {
        surfaces: &["no , that does not work for me .", "i am afraid that will not work ."],
        intent_by_action: &[
            ("propose_single_time", "decline_time"),
            ("propose_slots", "decline_time"),
            ("request_confirmation", "decline_time"),
            ("confirm_scheduled", "reschedule_meeting"),
            ("confirm_rescheduled", "reschedule_meeting"),
            ("send_invite", "reschedule_meeting"),
            ("summarize_meeting_details", "reschedule_meeting"),
            ("confirm_duration_change", "change_duration"),
            ("confirm_location_change", "change_location"),
            ("confirm_mode_change", "change_meeting_mode"),
        ],
    },
    AmbiguousFamily {
        surfaces: &["{day} would be ideal .", "{day} suits me best ."],
        intent_by_action: &[
            ("ask_day", "provide_availability"),
            ("propose_slots", "confirm_time"),
            ("offer_alternatives", "confirm_time"),
        ],
    },
    AmbiguousFamily {
        surfaces: &["{time} suits me .", "let us do {time} ."],
        intent_by_action: &[
            ("ask_time", "provide_availability"),
            ("propose_slots", "confirm_time"),
        ],
    },
    AmbiguousFamily {
        surfaces: &["please go ahead .", "go ahead , sounds good ."],
        intent_by_action: &[
            ("request_confirmation", "confirm_time"),
            ("acknowledge_availability", "confirm_time"),
            ("report_status", "confirm_time"),
            ("notify_reschedule_needed", "reschedule_meeting"),
            ("acknowledge_decline", "reschedule_meeting"),
        ],
    },
    AmbiguousFamily {
        surfaces: &["any of those is fine .", "either option works ."],
        intent_by_action: &[
            ("propose_slots", "confirm_time"),
            ("ask_day", "provide_availability"),
            ("offer_alternatives", "confirm_time"),
        ],
    },
    AmbiguousFamily {
        surfaces: &["let us just skip it .", "honestly , we can skip it ."],
        intent_by_action: &[
            ("report_conflict", "cancel_meeting"),
            ("offer_alternatives", "decline_time"),
            ("notify_reschedule_needed", "cancel_meeting"),
            ("send_reminder", "cancel_meeting"),
            ("report_status", "cancel_meeting"),
            ("report_no_availability", "cancel_meeting"),
        ],
    },
];

/// Agent action sentence templates; exactly one per generated agent turn.
pub fn agent_templates(action: &str) -> &'static [&'static str] {
    match action {
        "ask_day" => &["which day works best for you , {day} or {day2} ?"],
        "ask_time" => &["what time of day suits you for the {topic} ?"],
        "ask_duration" => &["how long should i reserve ? would {duration} work ?"],
        "ask_location" => &["where would you like to meet ? {location} is available ."],
        "ask_mode" => &["should this be in person or online ? most teams pick online ."],
        "ask_platform" => &["which platform do you prefer ? we usually use {platform} ."],
        "ask_timezone" => &["which timezone should i use for the invite ?"],
        "ask_attendees" => &["who else should i include on the invite ?"],
        "propose_slots" => {
            &["here are a few times that could work : {day} at {time} , or {day2} at {time2} ."]
        }
        "propose_single_time" => &["how about {day} at {time} ?"],
        "confirm_scheduled" => &["your meeting is booked for {day} at {time} ."],
        "confirm_rescheduled" => &["done , i have moved the meeting to {day} at {time} ."],
        "confirm_cancelled" => &["the meeting has been cancelled and attendees were notified ."],
        "confirm_duration_change" => &["i updated the duration to {duration} ."],
        "confirm_location_change" => &["i updated the location to {location} ."],
        "confirm_mode_change" => &["i updated the meeting format as requested ."],
        "confirm_attendee_added" => &["i added {name} to the invite ."],
        "confirm_attendee_removed" => &["i removed {name} from the invite ."],
        "report_conflict" => &["heads up , that slot conflicts with an existing meeting ."],
        "report_no_availability" => &["i could not find a free slot that works for everyone ."],
        "report_status" => &["here is where things stand : waiting on replies before booking ."],
        "send_invite" => &["i sent the calendar invite to all attendees ."],
        "send_reminder" => &["a reminder has been sent to everyone for the {topic} ."],
        "request_confirmation" => &["shall i go ahead and book it for {day} at {time} ?"],
        "acknowledge_availability" => &["noted , i will work with those times ."],
        "acknowledge_decline" => &["understood , i will look for other options ."],
        "apologize_error" => &["apologies for the mix up , i will correct it right away ."],
        "clarify_request" => &["could you clarify what you would like me to do next ?"],
        "notify_reschedule_needed" => &["the room fell through , so we need to pick a new time ."],
        "notify_cancellation_by_attendee" => &["{name} has withdrawn from the meeting ."],
        "offer_alternatives" => {
            &["would either of these alternatives work : {day} at {time} or {day2} at {time2} ?"]
        }
        "summarize_meeting_details" => {
            &["here are the meeting details : {topic} on {day} at {time} ."]
        }
        "greet_introduce" => {
            &["hello , i am the scheduling assistant and i will coordinate this meeting ."]
        }
        "handoff_human" => &["i will loop in a human coordinator to help with this ."],
        _ => &[],
    }
}

/// Pattern → tag pairs for the default action table, in match order.
pub const ACTION_PATTERNS: &[(&str, &str)] = &[
    ("which day works best", "ask_day"),
    ("what time of day suits", "ask_time"),
    ("how long should i reserve", "ask_duration"),
    ("where would you like to meet", "ask_location"),
    ("should this be in person or online", "ask_mode"),
    ("which platform do you prefer", "ask_platform"),
    ("which timezone should i use", "ask_timezone"),
    ("who else should i include", "ask_attendees"),
    ("here are a few times", "propose_slots"),
    ("how about", "propose_single_time"),
    ("your meeting is booked", "confirm_scheduled"),
    ("i have moved the meeting", "confirm_rescheduled"),
    ("the meeting has been cancelled", "confirm_cancelled"),
    ("i updated the duration", "confirm_duration_change"),
    ("i updated the location", "confirm_location_change"),
    ("i updated the meeting format", "confirm_mode_change"),
    (r"i added \w+ to the invite", "confirm_attendee_added"),
    (r"i removed \w+ from the invite", "confirm_attendee_removed"),
    ("conflicts with an existing", "report_conflict"),
    ("could not find a free slot", "report_no_availability"),
    ("here is where things stand", "report_status"),
    ("sent the calendar invite", "send_invite"),
    ("a reminder has been sent", "send_reminder"),
    ("shall i go ahead and book", "request_confirmation"),
    ("i will work with those times", "acknowledge_availability"),
    ("i will look for other options", "acknowledge_decline"),
    ("apologies for the mix up", "apologize_error"),
    ("could you clarify", "clarify_request"),
    ("we need to pick a new time", "notify_reschedule_needed"),
    ("has withdrawn from the meeting", "notify_cancellation_by_attendee"),
    ("would either of these alternatives", "offer_alternatives"),
    ("here are the meeting details", "summarize_meeting_details"),
    ("i am the scheduling assistant", "greet_introduce"),
    ("loop in a human coordinator", "handoff_human"),
];

/// Fill `{slot}` placeholders; paired slots (name/name2, day/day2,
/// time/time2) get distinct values. Disabled augmentation axes pin their
/// pool to the first entry.
pub fn fill_template(template: &str, rng: &mut impl Rng, aug: &Augmentation) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    let mut name: Option<&str> = None;
    let mut day: Option<&str> = None;
    let mut time: Option<&str> = None;

    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let end = rest[start..].find('}').map(|e| start + e).expect("unclosed slot");
        let slot = &rest[start + 1..end];
        let value: &str = match slot {
            "name" => *name.get_or_insert_with(|| NAMES.choose(rng).unwrap()),
            "name2" => pick_distinct(NAMES, name.unwrap_or(""), rng),
            "topic" => TOPICS.choose(rng).unwrap(),
            "day" => *day.get_or_insert_with(|| DAYS.choose(rng).unwrap()),
            "day2" => pick_distinct(DAYS, day.unwrap_or(""), rng),
            "time" => *time.get_or_insert_with(|| TIMES.choose(rng).unwrap()),
            "time2" => pick_distinct(TIMES, time.unwrap_or(""), rng),
            "duration" => pick_axis(DURATIONS, aug.duration, rng),
            "location" => pick_axis(LOCATIONS, aug.location, rng),
            "platform" => pick_axis(PLATFORMS, aug.online_platform, rng),
            "mode" => pick_axis(MODES, aug.meeting_mode, rng),
            "timezone" => pick_axis(TIMEZONES, aug.timezone, rng),
            "timewindow" => TIMEWINDOWS.choose(rng).unwrap(),
            "doc" => DOCS.choose(rng).unwrap(),
            other => panic!("unknown slot `{other}` in template"),
        };
        out.push_str(value);
        rest = &rest[end + 1..];
    }
    out.push_str(rest);
    out
}

fn pick_axis<'a>(pool: &'a [&'a str], vary: bool, rng: &mut impl Rng) -> &'a str {
    if vary {
        pool.choose(rng).unwrap()
    } else {
        pool[0]
    }
}

fn pick_distinct<'a>(pool: &'a [&'a str], taken: &str, rng: &mut impl Rng) -> &'a str {
    loop {
        let v = pool.choose(rng).unwrap();
        if *v != taken {
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::actions::ACTIONS;
    use crate::corpus::intents::INTENTS;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_nonfallback_action_has_a_template_and_pattern() {
        for action in ACTIONS.iter().filter(|a| **a != "other_action") {
            assert!(!agent_templates(action).is_empty(), "missing template for {action}");
            assert!(
                ACTION_PATTERNS.iter().any(|(_, tag)| tag == action),
                "missing pattern for {action}"
            );
        }
        assert_eq!(ACTION_PATTERNS.len(), ACTIONS.len() - 1);
    }

    #[test]
    fn ambiguous_families_cover_at_least_two_intents() {
        for family in AMBIGUOUS_FAMILIES {
            let mut intents: Vec<&str> = family.intent_by_action.iter().map(|(_, i)| *i).collect();
            intents.sort_unstable();
            intents.dedup();
            assert!(intents.len() >= 2, "family {:?} is not ambiguous", family.surfaces);
            for (action, intent) in family.intent_by_action {
                assert!(ACTIONS.contains(action), "unknown action {action}");
                assert!(INTENTS.contains(intent), "unknown intent {intent}");
            }
        }
    }

    #[test]
    fn every_intent_has_unambiguous_templates() {
        for intent in INTENTS {
            assert!(!user_templates(intent).is_empty(), "missing templates for {intent}");
        }
    }

    #[test]
    fn fill_keeps_paired_slots_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let aug = Augmentation::default();
        for _ in 0..50 {
            let s = fill_template("{day} vs {day2} and {time} vs {time2}", &mut rng, &aug);
            let toks: Vec<&str> = s.split(" vs ").collect();
            assert_ne!(toks[0], toks[1].split(" and ").next().unwrap());
        }
    }

    #[test]
    fn disabled_axis_is_pinned() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let aug = Augmentation { online_platform: false, ..Default::default() };
        for _ in 0..20 {
            assert_eq!(fill_template("{platform}", &mut rng, &aug), PLATFORMS[0]);
        }
    }
}
