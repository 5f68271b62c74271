//! Embedded noun lemmatizer.
//!
//! WordNet-style morphological reduction restricted to nouns (the default
//! behavior of common lemmatize() calls): an irregular-form table, a keep
//! list standing in for dictionary membership of lemmas that end in `s`, and
//! ordered suffix rules. Pinned in corpus metadata as
//! `builtin-wordnet-noun-lemmatizer-v1`.
//!
//! The output is a fixed point: `lemmatize(lemmatize(t)) == lemmatize(t)` for
//! every ASCII token, which the pipeline's idempotence property relies on.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

pub const LEMMATIZER_ID: &str = "builtin-wordnet-noun-lemmatizer-v1";

/// Irregular plurals and words the suffix rules would mangle.
const EXCEPTIONS: &[(&str, &str)] = &[
    // irregular plurals
    ("children", "child"),
    ("men", "man"),
    ("women", "woman"),
    ("people", "people"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("geese", "goose"),
    ("mice", "mouse"),
    ("lice", "louse"),
    ("dice", "die"),
    ("oxen", "ox"),
    ("brethren", "brother"),
    ("media", "medium"),
    ("data", "data"),
    ("criteria", "criterion"),
    ("phenomena", "phenomenon"),
    ("analyses", "analysis"),
    ("bases", "basis"),
    ("crises", "crisis"),
    ("theses", "thesis"),
    ("hypotheses", "hypothesis"),
    ("diagnoses", "diagnosis"),
    ("oases", "oasis"),
    ("parentheses", "parenthesis"),
    ("syntheses", "synthesis"),
    ("emphases", "emphasis"),
    ("axes", "axis"),
    ("matrices", "matrix"),
    ("indices", "index"),
    ("appendices", "appendix"),
    ("vertices", "vertex"),
    ("vortices", "vortex"),
    ("radii", "radius"),
    ("nuclei", "nucleus"),
    ("stimuli", "stimulus"),
    ("fungi", "fungus"),
    ("alumni", "alumnus"),
    ("cacti", "cactus"),
    ("foci", "focus"),
    ("curricula", "curriculum"),
    ("memoranda", "memorandum"),
    ("bacteria", "bacterium"),
    ("larvae", "larva"),
    ("antennae", "antenna"),
    ("formulae", "formula"),
    ("wives", "wife"),
    ("knives", "knife"),
    ("lives", "life"),
    ("leaves", "leaf"),
    ("loaves", "loaf"),
    ("halves", "half"),
    ("calves", "calf"),
    ("shelves", "shelf"),
    ("selves", "self"),
    ("thieves", "thief"),
    ("wolves", "wolf"),
    ("scarves", "scarf"),
    ("hooves", "hoof"),
    // -us plurals in -uses the generic rule would truncate
    ("buses", "bus"),
    ("gases", "gas"),
    ("viruses", "virus"),
    ("bonuses", "bonus"),
    ("campuses", "campus"),
    ("censuses", "census"),
    ("statuses", "status"),
    ("surpluses", "surplus"),
    ("choruses", "chorus"),
    ("circuses", "circus"),
    ("geniuses", "genius"),
    ("radiuses", "radius"),
    ("walruses", "walrus"),
    ("minuses", "minus"),
    ("pluses", "plus"),
    // -oes plurals of -oe stems
    ("shoes", "shoe"),
    ("toes", "toe"),
    ("foes", "foe"),
    ("woes", "woe"),
    ("canoes", "canoe"),
    ("oboes", "oboe"),
    ("throes", "throe"),
    // -ches of -che stems
    ("aches", "ache"),
    ("caches", "cache"),
    ("headaches", "headache"),
    ("niches", "niche"),
    ("mustaches", "mustache"),
    ("avalanches", "avalanche"),
    // -ies of -ie stems
    ("movies", "movie"),
    ("cookies", "cookie"),
    ("zombies", "zombie"),
    ("calories", "calorie"),
    ("sorties", "sortie"),
    ("pixies", "pixie"),
    ("genies", "genie"),
    ("prairies", "prairie"),
    ("rookies", "rookie"),
    ("goalies", "goalie"),
    ("ties", "tie"),
    ("lies", "lie"),
    ("pies", "pie"),
];

/// Lemmas ending in `s` (or otherwise rule-shaped) that must pass through.
const KEEP: &[&str] = &[
    "news",
    "series",
    "species",
    "means",
    "headquarters",
    "premises",
    "proceeds",
    "outskirts",
    "clothes",
    "thanks",
    "chaos",
    "cosmos",
    "atlas",
    "bias",
    "canvas",
    "alias",
    "iris",
    "texas",
    "christmas",
    "tennis",
    "lens",
    "corps",
    "chassis",
    "debris",
    "bourgeois",
    "specimen",
    "regimen",
    "abdomen",
    "acumen",
    "omen",
    "amen",
    "hymen",
    "lumen",
    "albumen",
    "bitumen",
    "stamen",
];

fn exceptions() -> &'static HashMap<&'static str, &'static str> {
    static MAP: OnceLock<HashMap<&'static str, &'static str>> = OnceLock::new();
    MAP.get_or_init(|| EXCEPTIONS.iter().copied().collect())
}

fn keep_set() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| KEEP.iter().copied().collect())
}

fn ends(token: &str, suffix: &str) -> bool {
    token.len() > suffix.len() && token.ends_with(suffix)
}

/// Reduces a lowercase ASCII token to its noun lemma. Tokens the rules do not
/// recognize pass through unchanged, as a dictionary-backed analyzer would
/// return the surface form when no base form is known.
pub fn lemmatize(token: &str) -> String {
    if !token.is_ascii() || token.is_empty() {
        return token.to_string();
    }
    if let Some(&lemma) = exceptions().get(token) {
        return lemma.to_string();
    }
    if keep_set().contains(token) || token.ends_with("ics") {
        return token.to_string();
    }
    let n = token.len();
    if n >= 5 && (token.ends_with("sses") || token.ends_with("zzes")) {
        return token[..n - 2].to_string();
    }
    if n >= 5
        && (ends(token, "xes") || ends(token, "ches") || ends(token, "shes"))
    {
        return token[..n - 2].to_string();
    }
    if n >= 5 && ends(token, "ies") {
        return format!("{}y", &token[..n - 3]);
    }
    if n >= 5 && ends(token, "oes") {
        return token[..n - 2].to_string();
    }
    if n >= 5 && ends(token, "men") {
        return format!("{}man", &token[..n - 3]);
    }
    if token.ends_with("ss") || token.ends_with("us") || token.ends_with("is") {
        return token.to_string();
    }
    if n >= 4 && token.ends_with('s') {
        return token[..n - 1].to_string();
    }
    token.to_string()
}
