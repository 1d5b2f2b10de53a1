use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::tokenize;

use super::{DialogueAct, Seating};

/// Values substituted into `{party}`, `{time}` and `{other}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slots {
    pub party: String,
    pub time: String,
    pub other: String,
}

pub const SMALL_PARTY: &str = "2";
pub const LARGE_PARTY: &str = "6";
pub const NOON: &str = "12";
pub const EVENING: &str = "19";

impl Slots {
    pub fn new(large_party: bool, evening: bool) -> Self {
        let (time, other) = if evening { (EVENING, NOON) } else { (NOON, EVENING) };
        Self {
            party: if large_party { LARGE_PARTY } else { SMALL_PARTY }.into(),
            time: time.into(),
            other: other.into(),
        }
    }
}

/// Surface templates per dialogue act, with matching back to acts.
#[derive(Debug, Clone)]
pub struct TemplateBank {
    entries: Vec<(DialogueAct, Vec<String>)>,
}

impl TemplateBank {
    /// Panics if an act is listed twice or has no template.
    pub fn new(entries: Vec<(DialogueAct, Vec<String>)>) -> Self {
        for (i, (act, templates)) in entries.iter().enumerate() {
            assert!(!templates.is_empty(), "no template for {act:?}");
            assert!(
                entries[..i].iter().all(|(a, _)| a != act),
                "{act:?} listed twice"
            );
        }
        Self { entries }
    }

    pub fn templates(&self, act: DialogueAct) -> &[String] {
        self.entries
            .iter()
            .find(|(a, _)| *a == act)
            .map(|(_, t)| t.as_slice())
            .unwrap_or_else(|| panic!("no templates for {act:?}"))
    }

    pub fn acts(&self) -> impl Iterator<Item = DialogueAct> + '_ {
        self.entries.iter().map(|(a, _)| *a)
    }

    pub fn realize<R: Rng>(&self, act: DialogueAct, slots: &Slots, rng: &mut R) -> String {
        let template = self.templates(act).choose(rng).expect("bank entries are nonempty");
        template
            .replace("{party}", &slots.party)
            .replace("{time}", &slots.time)
            .replace("{other}", &slots.other)
    }

    /// The act whose template matches `text` token for token. Placeholders match
    /// any value their slot can take.
    pub fn recognize(&self, text: &str) -> Option<DialogueAct> {
        let tokens = tokenize(text);
        self.entries
            .iter()
            .find(|(_, templates)| templates.iter().any(|t| matches_template(t, &tokens)))
            .map(|(a, _)| *a)
    }
}

fn matches_template(template: &str, tokens: &[String]) -> bool {
    // tokenize splits "{party}" into "{", "party", "}"
    let pattern = tokenize(template);
    let mut want: Vec<&[&str]> = Vec::new();
    let mut exact = Vec::new();
    let mut i = 0;
    while i < pattern.len() {
        if pattern[i] == "{" && i + 2 < pattern.len() && pattern[i + 2] == "}" {
            want.push(if pattern[i + 1] == "party" {
                &[SMALL_PARTY, LARGE_PARTY]
            } else {
                &[NOON, EVENING]
            });
            exact.push(None);
            i += 3;
        } else {
            want.push(&[]);
            exact.push(Some(pattern[i].as_str()));
            i += 1;
        }
    }
    exact.len() == tokens.len()
        && exact.iter().zip(&want).zip(tokens).all(|((e, values), t)| match e {
            Some(e) => *e == t.as_str(),
            None => values.contains(&t.as_str()),
        })
}

/// Word tokens in `text`, punctuation excluded.
pub fn count_words(text: &str) -> usize {
    tokenize(text)
        .iter()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .count()
}

impl Default for TemplateBank {
    fn default() -> Self {
        use DialogueAct::*;
        use Seating::*;
        let e = |act: DialogueAct, ts: &[&str]| (act, ts.iter().map(|s| s.to_string()).collect());
        Self::new(vec![
            e(
                Ask(Table),
                &[
                    "May I reserve a table for {party} people at {time} tomorrow?",
                    "Can you help me book a table for {party} people at {time}?",
                    "I would like a table for {party} at {time} tomorrow.",
                ],
            ),
            e(Ask(Later), &["How about {other} instead?", "Could we come at {other} then?"]),
            e(Ask(Bar), &["Can we sit at the bar then?", "Can I reserve seats at the bar instead?"]),
            e(
                Ask(Premium),
                &["Can I have a more expensive table then?", "Is there a premium table we could pay extra for?"],
            ),
            e(
                Ask(Vip),
                &["In this case, can I reserve a bigger table?", "Do you have a bigger table for us?"],
            ),
            e(
                Offer(Table),
                &["Sure, I have written down your reservation.", "Yes, we have a table for you at that time."],
            ),
            e(
                Offer(Later),
                &["Yes, {other} is fine, we have a table then.", "We can do {other}, there is a free table."],
            ),
            e(Offer(Bar), &["Yes, you can sit at the bar.", "Sure, the bar seats are free."]),
            e(
                Offer(Premium),
                &["Yes, we have a premium table but it costs more.", "We can offer a more expensive table."],
            ),
            e(
                Offer(Vip),
                &["Yes, we have VIP rooms but more expensive.", "We have a bigger table in a private room."],
            ),
            e(
                Refuse(Table),
                &["Sorry, we don't have a table at this point.", "All our tables are reserved at that time."],
            ),
            e(Refuse(Later), &["Sorry, {other} is fully booked too.", "We have no table at {other} either."]),
            e(Refuse(Bar), &["We don't have a bar in the restaurant.", "Sorry, the bar is not available."]),
            e(
                Refuse(Premium),
                &["My apologies, we are required not to do that.", "We don't have premium tables."],
            ),
            e(Refuse(Vip), &["Sorry, there are no bigger tables left.", "We don't have any private rooms."]),
            e(Confirm, &["I want that.", "Great, please book it.", "Perfect, we will take it."]),
            e(Acknowledge, &["OK.", "Done, see you then."]),
            e(Bye, &["Bye.", "Thanks, bye."]),
            e(GiveUp, &["Then I will look elsewhere, bye.", "That does not work for us, bye."]),
            e(
                Decline,
                &["Sorry, we cannot take your reservation, bye.", "I am afraid we are fully booked, bye."],
            ),
            e(Farewell, &["Thank you, bye.", "Have a nice day, bye."]),
        ])
    }
}
