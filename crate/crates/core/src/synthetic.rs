//! Template-grammar sentence generator for toy corpora.
//!
//! Word classes are large enough that most adjacent word pairs of a
//! held-out sentence never occur in a few thousand training sentences.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::beam::detokenize;

const NOUNS: &str = "apple anchor arrow attic autumn acorn album angel ankle army \
badge bakery balloon banner barn basket beach beacon bell bench bicycle blanket boat bottle bridge brook bucket button \
cabin cable camera candle canyon carpet castle cellar chair chapel cherry chimney circle cliff clock cloud coat comet cottage crown curtain \
daisy desert diary dinner doctor dolphin donkey door dragon drawer dream drum \
eagle earring echo engine envelope eraser evening \
fabric falcon farmer feather fence ferry field fire flag flower forest fountain fox \
garden gate giant glacier glove goat guitar \
hammer harbor harvest hat helmet hill hive honey horse hotel hut \
igloo island ink insect iron ivy \
jacket jar jewel journey judge jungle \
kettle key kingdom kitchen kite knife knot \
ladder lake lamp lantern leaf lemon letter library lighthouse lion lizard \
magnet map market meadow mirror monkey moon mountain museum \
nail napkin needle nest net notebook nut \
oak ocean office onion orange orchard otter oven owl \
paddle palace parcel parrot path pearl pencil piano pillow planet pocket pond \
quarry queen quilt quiver \
rabbit radio raft rainbow raven ribbon river road robot rocket roof rope \
saddle sailor sandwich scarf school shell ship shovel signal sister sled spoon stable star statue stone street \
table tailor teacup temple tent thimble ticket tiger tower train tree trumpet tunnel turtle \
umbrella uncle unicorn \
valley vase velvet village violin volcano \
wagon wall wallet window wizard wolf \
yacht yard zebra zipper zoo";

const VERBS: &str = "admired adopted answered arranged asked \
baked borrowed bought brought built buried \
called carried caught chased cleaned climbed collected cooked copied counted covered crossed \
danced decorated delivered described discovered dropped \
earned emptied entered escaped examined explored \
fed fetched filled finished fixed folded followed found \
gathered gave grabbed greeted guarded guided \
handled heard helped hid hugged hunted \
ignored imagined inspected invited \
joined judged juggled \
kept kicked kissed knew \
labeled lifted liked lit loved \
made marked measured mended met moved \
named needed noticed \
obeyed offered opened ordered owned \
packed painted parked passed picked planted played polished pulled pushed \
questioned quizzed \
raised reached read repaired rescued returned rode \
saw sold sent shared signed sketched smelled spotted stole studied \
taught tasted threw touched traded trusted \
uncovered unlocked unpacked used \
valued visited viewed \
walked wanted warmed washed watched weighed wrapped wrote \
yanked yelled zipped";

const ADJECTIVES: &str = "ancient angry awkward \
bitter blue brave bright broken busy \
calm careful cheap clever cold crooked curious \
damp dark dear deep dusty \
eager early empty endless \
faint famous fancy fierce foggy fresh friendly funny \
gentle golden grand green \
happy heavy hidden hollow honest huge \
icy idle important \
jolly juicy keen kind \
large lazy little lonely loud lucky \
magic mighty modern muddy \
narrow neat nervous new noisy \
odd old open \
pale perfect plain polite proud purple \
quick quiet \
rapid rare red rich rough round rusty \
sad shiny silent small smooth soft strange sweet \
tall tender tiny tired tough \
ugly unusual useful \
vast violet vivid \
warm weird wet wild wise wooden \
young yellow zany";

const ADVERBS: &str = "again anxiously badly boldly bravely calmly carefully daily deeply eagerly early evenly \
finally fiercely freely gladly gracefully happily hastily honestly idly jointly jokingly keenly kindly \
late lazily lightly loudly madly merrily neatly nearly noisily oddly often openly patiently politely \
quietly quickly rarely rightly sadly safely slowly softly surely tenderly today tonight truly \
urgently usually vainly warmly wildly wisely yearly yesterday zealously";

const DETERMINERS: &str = "the a every my your his her our their this that one some no";
const PREPOSITIONS: &str = "in on under near behind beside with without across over through around into after before between beyond along toward against from at by inside outside past upon";
const CONJUNCTIONS: &str = "and but so yet while because although until unless or";
const PRONOUNS: &str = "I you we they she he";
const NAMES: &str = "Anna Ben Carl Dora Emma Felix Greta Hugo Iris Jack Kate Leo Mia Nora Oscar Paul Quinn Rosa Sam Tina Uma Victor Wendy Xavier Yara Zack";

const TEMPLATES: [&str; 8] = [
    "D A N V P D A N .",
    "R V D A N , C R V B .",
    "D N P D N V D A N B .",
    "B , D A N V P D N .",
    "D A N C D A N V D N P D A N .",
    "R V D A N P D N .",
    "M V D A N , C M V B .",
    "M V D N P D A N ; R V D N !",
];

/// Word lists by class letter: N noun, V verb, A adjective, B adverb,
/// D determiner, P preposition, C conjunction, R pronoun, M name.
pub struct Grammar {
    classes: Vec<(char, Vec<&'static str>)>,
}

impl Default for Grammar {
    fn default() -> Self {
        let split = |s: &'static str| s.split_whitespace().collect::<Vec<_>>();
        Grammar {
            classes: vec![
                ('N', split(NOUNS)),
                ('V', split(VERBS)),
                ('A', split(ADJECTIVES)),
                ('B', split(ADVERBS)),
                ('D', split(DETERMINERS)),
                ('P', split(PREPOSITIONS)),
                ('C', split(CONJUNCTIONS)),
                ('R', split(PRONOUNS)),
                ('M', split(NAMES)),
            ],
        }
    }
}

impl Grammar {
    pub fn class(&self, tag: char) -> Option<&[&'static str]> {
        self.classes.iter().find(|(c, _)| *c == tag).map(|(_, w)| w.as_slice())
    }

    pub fn sentence<R: Rng + ?Sized>(&self, rng: &mut R) -> String {
        let template = TEMPLATES.choose(rng).expect("templates");
        let tokens: Vec<String> = template
            .split(' ')
            .map(|slot| {
                let tag = slot.chars().next().expect("slot");
                match self.class(tag) {
                    Some(words) => words.choose(rng).expect("non-empty class").to_string(),
                    None => slot.to_string(),
                }
            })
            .collect();
        let mut text = detokenize(&tokens);
        if let Some(first) = text.chars().next() {
            text.replace_range(..first.len_utf8(), &first.to_uppercase().to_string());
        }
        text
    }
}

/// `count` distinct sentences drawn from the default grammar.
pub fn synthetic_corpus(count: usize, seed: u64) -> Vec<String> {
    let grammar = Grammar::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let s = grammar.sentence(&mut rng);
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest, IngestConfig};

    #[test]
    fn every_sentence_survives_ingestion() {
        let lines = synthetic_corpus(300, 1);
        let (pairs, stats) = ingest(lines.iter().map(String::as_str), &IngestConfig::default()).unwrap();
        assert_eq!(pairs.len(), 300, "{stats:?}");
        assert!(lines.iter().any(|l| l.contains(", ")));
        assert_eq!(synthetic_corpus(300, 1), lines);
    }

    #[test]
    fn word_lists_have_no_duplicates() {
        let g = Grammar::default();
        for (tag, words) in &g.classes {
            let unique: std::collections::HashSet<_> = words.iter().collect();
            assert_eq!(unique.len(), words.len(), "class {tag}");
        }
    }
}
