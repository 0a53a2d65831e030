//! Closed vocabularies: relation predicates and the synthetic sentence lexicon.

/// Number of relation predicates (labels `0..50`).
pub const NUM_PREDICATES: usize = 50;
/// Label reserved for self-loop edges in the explicit graph.
pub const SELF_LABEL: usize = NUM_PREDICATES;
/// Predicates plus the self-loop label.
pub const NUM_EDGE_LABELS: usize = NUM_PREDICATES + 1;

/// Predicate names, indexed by predicate id. The first eight are the spatial
/// predicates produced by the geometric stub.
pub const PREDICATES: [&str; NUM_PREDICATES] = [
    // spatial
    "left_of",
    "right_of",
    "above",
    "below",
    "inside",
    "contains",
    "overlaps",
    "near",
    // actions
    "chase",
    "hold",
    "watch",
    "ride",
    "push",
    "hug",
    "grab",
    "kick",
    "lean_on",
    "carry",
    "feed",
    "pull",
    "touch",
    "bite",
    "hit",
    "lift",
    "wave",
    "kiss",
    "pat",
    "point_to",
    "speak_to",
    "shake_hand_with",
    "play_with",
    "lick",
    "throw",
    "catch",
    "drive",
    "use",
    "open",
    "close",
    "squeeze",
    "cut",
    "clean",
    "press",
    "release",
    "smell",
    "get_on",
    "get_off",
    "wash",
    "caress",
    "follow",
    "lead",
];

pub mod spatial {
    pub const LEFT_OF: usize = 0;
    pub const RIGHT_OF: usize = 1;
    pub const ABOVE: usize = 2;
    pub const BELOW: usize = 3;
    pub const INSIDE: usize = 4;
    pub const CONTAINS: usize = 5;
    pub const OVERLAPS: usize = 6;
    pub const NEAR: usize = 7;
}

pub fn predicate_id(name: &str) -> Option<usize> {
    PREDICATES.iter().position(|p| *p == name)
}

/// A noun the synthetic generator can use as an object category.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Noun {
    pub token: &'static str,
    pub is_person: bool,
}

pub const NOUNS: [Noun; 14] = [
    Noun { token: "man", is_person: true },
    Noun { token: "woman", is_person: true },
    Noun { token: "boy", is_person: true },
    Noun { token: "girl", is_person: true },
    Noun { token: "child", is_person: true },
    Noun { token: "baby", is_person: true },
    Noun { token: "dog", is_person: false },
    Noun { token: "cat", is_person: false },
    Noun { token: "horse", is_person: false },
    Noun { token: "ball", is_person: false },
    Noun { token: "car", is_person: false },
    Noun { token: "bicycle", is_person: false },
    Noun { token: "toy", is_person: false },
    Noun { token: "chair", is_person: false },
];

/// An action predicate with its sentence surface forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Verb {
    pub active: &'static str,
    pub passive: &'static str,
    pub predicate: &'static str,
}

pub const VERBS: [Verb; 8] = [
    Verb { active: "chases", passive: "chased", predicate: "chase" },
    Verb { active: "holds", passive: "held", predicate: "hold" },
    Verb { active: "watches", passive: "watched", predicate: "watch" },
    Verb { active: "rides", passive: "ridden", predicate: "ride" },
    Verb { active: "pushes", passive: "pushed", predicate: "push" },
    Verb { active: "hugs", passive: "hugged", predicate: "hug" },
    Verb { active: "grabs", passive: "grabbed", predicate: "grab" },
    Verb { active: "kicks", passive: "kicked", predicate: "kick" },
];

pub const FUNCTION_WORDS: [&str; 5] = ["the", "is", "by", "who", "what"];

pub const INTERROGATIVES: [&str; 2] = ["who", "what"];

pub fn is_interrogative(token: &str) -> bool {
    INTERROGATIVES.contains(&token)
}

/// The full synthetic vocabulary in a fixed order.
pub fn synthetic_vocab() -> Vec<String> {
    FUNCTION_WORDS
        .iter()
        .copied()
        .chain(NOUNS.iter().map(|n| n.token))
        .chain(VERBS.iter().flat_map(|v| [v.active, v.passive]))
        .map(str::to_string)
        .collect()
}

pub fn noun_lexicon() -> impl Iterator<Item = &'static str> {
    NOUNS.iter().map(|n| n.token)
}
