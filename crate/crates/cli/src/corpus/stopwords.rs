//! Embedded English stopword list.
//!
//! The Stone/Denis/Kwantes list as shipped by common text-processing
//! toolkits. Pinned in corpus metadata as `builtin-english-stopwords-v1`; the
//! list is part of the preprocessing contract and must not change without a
//! version bump.

use std::collections::HashSet;
use std::sync::OnceLock;

pub const STOPWORDS_ID: &str = "builtin-english-stopwords-v1";

const LIST: &str = "a about above across after afterwards again against all almost alone along \
already also although always am among amongst amoungst amount an and another any anyhow anyone \
anything anyway anywhere are around as at back be became because become becomes becoming been \
before beforehand behind being below beside besides between beyond bill both bottom but by call \
can cannot cant co computer con could couldnt cry de describe detail did didn do does doesn doing \
don done down due during each eg eight either eleven else elsewhere empty enough etc even ever \
every everyone everything everywhere except few fifteen fifty fill find fire first five for \
former formerly forty found four from front full further get give go had has hasnt have he hence \
her here hereafter hereby herein hereupon hers herself him himself his how however hundred i ie \
if in inc indeed interest into is it its itself just keep kg km last latter latterly least less \
ltd made make many may me meanwhile might mill mine more moreover most mostly move much must my \
myself name namely neither never nevertheless next nine no nobody none noone nor not nothing now \
nowhere of off often on once one only onto or other others otherwise our ours ourselves out over \
own part per perhaps please put quite rather re really regarding same say see seem seemed seeming \
seems serious several she should show side since sincere six sixty so some somehow someone \
something sometime sometimes somewhere still such system take ten than that the their them \
themselves then thence there thereafter thereby therefore therein thereupon these they thick thin \
third this those though three through throughout thru thus to together too top toward towards \
twelve twenty two un under unless until up upon us used using various very via was we well were \
what whatever when whence whenever where whereafter whereas whereby wherein whereupon wherever \
whether which while whither who whoever whole whom whose why will with within without would yet \
you your yours yourself yourselves";

fn set() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| LIST.split_ascii_whitespace().collect())
}

pub fn is_stopword(token: &str) -> bool {
    set().contains(token)
}

pub fn count() -> usize {
    set().len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn common_function_words_are_stopwords() {
        for w in ["the", "and", "of", "doesn", "hereupon", "yourselves"] {
            assert!(is_stopword(w), "{w}");
        }
    }

    #[test]
    fn content_words_are_not() {
        for w in ["plane", "mile", "nuclear", "baseball"] {
            assert!(!is_stopword(w), "{w}");
        }
    }

    #[test]
    fn list_is_deduplicated() {
        let n_tokens = LIST.split_ascii_whitespace().count();
        assert_eq!(n_tokens, count(), "duplicate entries in the embedded list");
        assert!(count() > 300);
    }
}
