//! Hypothesis decomposition into subject/predicate/object sub-facts.
//!
//! The built-in decomposer is a recall-oriented heuristic clause splitter:
//!
//! 1. split on `;`, then on clause-level `and` / `but` when both sides
//!    contain a verb (a right clause with no subject inherits the left one);
//! 2. split off relative clauses (`that` / `which` / `who` + verb), whose
//!    subject becomes the antecedent object;
//! 3. in each clause, subject = tokens before the first verb, predicate =
//!    the maximal run of verbs, object = the rest;
//! 4. distribute `and` / `or` conjoined noun phrases in subject and object;
//! 5. add a core fact with the object cut before its first preposition;
//! 6. fall back to `("", "is", <sentence>)` when no verb is found.
//!
//! At most [`MAX_SUB_FACTS`] survive, earlier ones first. Externally
//! produced decompositions (e.g. from an Open IE system) can be replayed
//! from a TSV file with [`read_decompositions`].

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{join, normalize_tokenize, Token};

pub const MAX_SUB_FACTS: usize = 5;
pub const MAX_FACT_LEN: usize = 25;
/// Upper bound on tokens considered while parsing a hypothesis.
const PARSE_LEN: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactSource {
    Heuristic,
    External,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubFact {
    pub subject: Vec<Token>,
    pub predicate: Vec<Token>,
    pub object: Vec<Token>,
    /// `subject ++ predicate ++ object`, truncated to [`MAX_FACT_LEN`].
    pub flat: Vec<Token>,
    pub source: FactSource,
}

impl SubFact {
    pub fn new(
        subject: Vec<Token>,
        predicate: Vec<Token>,
        object: Vec<Token>,
        source: FactSource,
    ) -> Result<Self> {
        if predicate.is_empty() {
            return Err(Error::Contract(
                "sub-fact predicate must be non-empty".into(),
            ));
        }
        let cap = |mut v: Vec<Token>| {
            v.truncate(MAX_FACT_LEN);
            v
        };
        let (subject, predicate, object) = (cap(subject), cap(predicate), cap(object));
        let flat = subject
            .iter()
            .chain(&predicate)
            .chain(&object)
            .take(MAX_FACT_LEN)
            .cloned()
            .collect();
        Ok(SubFact {
            subject,
            predicate,
            object,
            flat,
            source,
        })
    }

    /// A single fact whose predicate and object come straight from text.
    pub fn parse(subject: &str, predicate: &str, object: &str, source: FactSource) -> Result<Self> {
        SubFact::new(
            normalize_tokenize(subject, MAX_FACT_LEN),
            normalize_tokenize(predicate, MAX_FACT_LEN),
            normalize_tokenize(object, MAX_FACT_LEN),
            source,
        )
    }

    /// The three fields, in subject, predicate, object order.
    pub fn fields(&self) -> [&[Token]; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn text(&self) -> String {
        join(&self.flat)
    }
}

const BE_AUX: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "having", "do",
    "does", "did", "can", "could", "will", "would", "may", "might", "must", "shall", "should",
];

#[rustfmt::skip]
const COMMON_VERBS: &[&str] = &[
    "absorb", "absorbs", "allow", "allows", "attract", "attracts", "become", "becomes", "became",
    "begin", "begins", "began", "break", "breaks", "bring", "brings", "brought", "build", "builds",
    "built", "carry", "carries", "cause", "causes", "change", "changes", "conduct", "conducts",
    "consist", "consists", "contain", "contains", "control", "controls", "convert", "converts",
    "create", "creates", "depend", "depends", "determine", "determines", "eat", "eats", "ate",
    "emit", "emits", "enter", "enters", "found", "give", "gives", "gave", "given", "grow", "grows",
    "grew", "grown", "help", "helps", "hold", "holds", "held", "include", "includes", "keep",
    "keeps", "kept", "know", "known", "lead", "leads", "led", "live", "lives", "make", "makes",
    "made", "mean", "means", "meant", "move", "moves", "need", "needs", "occur", "occurs",
    "produce", "produces", "protect", "protects", "provide", "provides", "reduce", "reduces",
    "reflect", "reflects", "release", "releases", "require", "requires", "seen", "show", "shows",
    "shown", "take", "takes", "took", "taken", "transfer", "transfers", "use", "uses",
];

/// Tokens after which a content word is read as a noun, not a verb.
const NOUN_CONTEXT: &[&str] = &[
    "a", "an", "the", "this", "these", "those", "its", "their", "his", "her", "our", "your", "my",
    "each", "every", "some", "any", "no", "many", "most", "more", "of", "in", "on", "at", "for",
    "from", "by", "with", "into", "through", "during", "under", "over", "between", "and", "or",
    "such",
];

const PREPOSITIONS: &[&str] = &[
    "of", "in", "on", "at", "to", "for", "from", "by", "with", "into", "through", "during",
    "under", "over", "between", "within", "without", "about", "across", "along", "among", "around",
    "inside", "outside", "toward", "towards", "via", "onto", "upon",
];

#[rustfmt::skip]
const NOT_ING: &[&str] = &[
    "thing", "things", "something", "nothing", "everything", "anything", "during", "king", "ring",
    "spring", "string", "wing", "morning", "evening", "ceiling", "sibling", "offspring",
];
const NOT_ED: &[&str] = &[
    "seed", "speed", "bed", "red", "shed", "hundred", "kindred", "sacred", "naked",
];
const NOT_S: &[&str] = &[
    "this", "has", "was", "is", "its", "gas", "always", "perhaps", "series", "species", "thus",
    "less", "across", "yes", "his", "us", "as",
];

fn is(t: &Token, list: &[&str]) -> bool {
    list.contains(&t.as_str())
}

/// Verb shape of a word in isolation: closed list or inflectional suffix.
fn verb_shaped(t: &Token) -> bool {
    let w = t.as_str();
    if is(t, BE_AUX) || is(t, COMMON_VERBS) {
        return true;
    }
    if w.chars().any(|c| c.is_ascii_digit()) {
        return false;
    }
    (w.len() >= 5 && w.ends_with("ing") && !is(t, NOT_ING))
        || (w.len() >= 4 && w.ends_with("ed") && !is(t, NOT_ED))
        || (w.len() >= 4
            && w.ends_with('s')
            && !w.ends_with("ss")
            && !w.ends_with("us")
            && !w.ends_with("is")
            && !is(t, NOT_S))
}

/// Whether `toks[i]` acts as a verb in context.
fn is_verb(toks: &[Token], i: usize) -> bool {
    let t = &toks[i];
    if is(t, BE_AUX) {
        return true;
    }
    if !verb_shaped(t) {
        return false;
    }
    let prev = i.checked_sub(1).map(|p| &toks[p]);
    if prev.is_some_and(|p| is(p, NOUN_CONTEXT)) {
        return false;
    }
    if is(t, COMMON_VERBS) {
        return true;
    }
    let w = t.as_str();
    if w.ends_with('s') {
        // plural-noun guard: sentence-initial, or directly followed by a verb
        if prev.is_none() || toks.get(i + 1).is_some_and(verb_shaped) {
            return false;
        }
    }
    true
}

fn first_verb(toks: &[Token]) -> Option<usize> {
    (0..toks.len()).find(|&i| is_verb(toks, i))
}

fn has_verb(toks: &[Token]) -> bool {
    first_verb(toks).is_some()
}

#[derive(Clone, Debug)]
struct Clause {
    subject: Vec<Token>,
    predicate: Vec<Token>,
    object: Vec<Token>,
}

fn svo(toks: &[Token]) -> Option<Clause> {
    let v = first_verb(toks)?;
    let mut end = v + 1;
    // only auxiliaries chain: "is made", "has been used", "can produce"
    while end < toks.len() && is(&toks[end - 1], BE_AUX) && is_verb(toks, end) {
        end += 1;
    }
    Some(Clause {
        subject: toks[..v].to_vec(),
        predicate: toks[v..end].to_vec(),
        object: toks[end..].to_vec(),
    })
}

/// Splits at `and` / `but` where both sides have a verb.
fn split_coordination(toks: &[Token]) -> Vec<Vec<Token>> {
    let mut pieces: Vec<(Option<Token>, Vec<Token>)> = vec![(None, Vec::new())];
    for t in toks {
        if t.as_str() == "and" || t.as_str() == "but" {
            pieces.push((Some(t.clone()), Vec::new()));
        } else {
            pieces.last_mut().expect("non-empty").1.push(t.clone());
        }
    }
    let mut out: Vec<Vec<Token>> = Vec::new();
    let mut cur: Vec<Token> = Vec::new();
    for (i, (conj, piece)) in pieces.into_iter().enumerate() {
        if i == 0 {
            cur = piece;
        } else if has_verb(&cur) && has_verb(&piece) {
            out.push(std::mem::replace(&mut cur, piece));
        } else {
            cur.extend(conj);
            cur.extend(piece);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Splits a relative clause off the end of `toks`: `(main, relative_rest)`.
fn split_relative(toks: &[Token]) -> Option<(Vec<Token>, Vec<Token>)> {
    let fv = first_verb(toks)?;
    (fv + 1..toks.len().saturating_sub(1))
        .find(|&i| matches!(toks[i].as_str(), "that" | "which" | "who") && is_verb(toks, i + 1))
        .map(|i| (toks[..i].to_vec(), toks[i + 1..].to_vec()))
}

fn split_conjuncts(field: &[Token]) -> Vec<Vec<Token>> {
    let parts: Vec<Vec<Token>> = field
        .split(|t| t.as_str() == "and" || t.as_str() == "or")
        .map(<[Token]>::to_vec)
        .collect();
    if parts.len() > 1 && parts.iter().all(|p| !p.is_empty()) {
        parts
    } else {
        Vec::new()
    }
}

fn expand(c: &Clause, out: &mut Vec<Clause>) {
    out.push(c.clone());
    for part in split_conjuncts(&c.subject) {
        out.push(Clause {
            subject: part,
            ..c.clone()
        });
    }
    for part in split_conjuncts(&c.object) {
        out.push(Clause {
            object: part,
            ..c.clone()
        });
    }
    if let Some(p) = c.object.iter().position(|t| is(t, PREPOSITIONS)) {
        if p > 0 {
            out.push(Clause {
                object: c.object[..p].to_vec(),
                ..c.clone()
            });
        }
    }
}

/// Decomposes a hypothesis into between 1 and [`MAX_SUB_FACTS`] sub-facts.
pub fn decompose(hypothesis: &str) -> Vec<SubFact> {
    let mut clauses: Vec<Clause> = Vec::new();
    let mut last_subject: Vec<Token> = Vec::new();
    for segment in hypothesis.split(';') {
        let toks = normalize_tokenize(segment, PARSE_LEN);
        for piece in split_coordination(&toks) {
            let (main, relative) = match split_relative(&piece) {
                Some((m, r)) => (m, Some(r)),
                None => (piece, None),
            };
            let Some(mut c) = svo(&main) else { continue };
            if c.subject.is_empty() {
                c.subject = last_subject.clone();
            } else {
                last_subject = c.subject.clone();
            }
            let antecedent = if c.object.is_empty() {
                c.subject.clone()
            } else {
                c.object.clone()
            };
            expand(&c, &mut clauses);
            if let Some(rest) = relative {
                let mut toks = antecedent;
                toks.extend(rest);
                if let Some(rc) = svo(&toks) {
                    expand(&rc, &mut clauses);
                }
            }
        }
    }

    let mut seen = HashSet::new();
    let mut facts: Vec<SubFact> = clauses
        .into_iter()
        .filter(|c| seen.insert((c.subject.clone(), c.predicate.clone(), c.object.clone())))
        .filter_map(|c| SubFact::new(c.subject, c.predicate, c.object, FactSource::Heuristic).ok())
        .take(MAX_SUB_FACTS)
        .collect();

    if facts.is_empty() {
        let object = normalize_tokenize(hypothesis, PARSE_LEN);
        let is = vec![Token::new("is").expect("valid token")];
        facts.push(
            SubFact::new(Vec::new(), is, object, FactSource::Heuristic)
                .expect("non-empty predicate"),
        );
    }
    facts
}

/// Parses a decomposition replay file: `id \t subject \t predicate \t object`.
/// Columns beyond the fourth are folded into the object. Each id keeps at
/// most [`MAX_SUB_FACTS`] facts, in file order.
pub fn read_decompositions<R: BufRead>(
    reader: R,
    origin: &Path,
) -> Result<BTreeMap<String, Vec<SubFact>>> {
    let mut out: BTreeMap<String, Vec<SubFact>> = BTreeMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 4 {
            return Err(Error::ingest(
                origin,
                lineno,
                format!("expected 4 tab-separated fields, found {}", cols.len()),
            ));
        }
        let id = cols[0].trim();
        if id.is_empty() {
            return Err(Error::ingest(origin, lineno, "empty hypothesis id"));
        }
        let object = cols[3..].join(" ");
        let fact = SubFact::parse(cols[1], cols[2], &object, FactSource::External)
            .map_err(|_| Error::ingest(origin, lineno, "empty predicate"))?;
        let facts = out.entry(id.to_string()).or_default();
        if facts.len() < MAX_SUB_FACTS {
            facts.push(fact);
        }
    }
    Ok(out)
}

pub fn ingest_decompositions(path: &Path) -> Result<BTreeMap<String, Vec<SubFact>>> {
    let f = File::open(path).map_err(|e| {
        Error::Config(format!(
            "cannot open decomposition file {}: {e}",
            path.display()
        ))
    })?;
    read_decompositions(BufReader::new(f), path)
}

/// Writes facts in the replay format read by [`read_decompositions`].
pub fn write_decompositions<'a, W, I>(mut w: W, facts: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a [SubFact])>,
{
    for (id, list) in facts {
        for f in list {
            writeln!(
                w,
                "{id}\t{}\t{}\t{}",
                join(&f.subject),
                join(&f.predicate),
                join(&f.object)
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(ts: &[Token]) -> String {
        join(ts)
    }

    #[test]
    fn copula_sentence() {
        let f = decompose("hydrogen is an element");
        assert_eq!(f.len(), 1);
        assert_eq!(words(&f[0].subject), "hydrogen");
        assert_eq!(words(&f[0].predicate), "is");
        assert_eq!(words(&f[0].object), "an element");
        assert_eq!(f[0].source, FactSource::Heuristic);
    }

    #[test]
    fn cell_wall_keeps_found_in_predicate() {
        let f = decompose("a cell wall is found in a plant cell but not in an animal cell .");
        assert!(
            f[0].predicate.iter().any(|t| t.as_str() == "found"),
            "{f:?}"
        );
        assert_eq!(
            f[0].text(),
            "a cell wall is found in a plant cell but not in an animal cell"
        );
    }

    #[test]
    fn binary_fission_relative_clause() {
        let f = decompose(
            "binary fission is a form of cell division in prokaryotic organisms that produces identical offspring",
        );
        let texts: Vec<String> = f.iter().map(SubFact::text).collect();
        assert!(f.len() >= 2, "{texts:?}");
        assert!(
            texts
                .iter()
                .any(|t| t.starts_with("binary fission is a form")),
            "{texts:?}"
        );
        assert!(
            texts.contains(&"binary fission is a form".to_string()),
            "{texts:?}"
        );
        assert!(
            texts.contains(
                &"a form of cell division in prokaryotic organisms produces identical offspring"
                    .to_string()
            ),
            "{texts:?}"
        );
    }

    #[test]
    fn coordinated_clauses_share_subject() {
        let f = decompose("the heart pumps blood and releases hormones");
        let texts: Vec<String> = f.iter().map(SubFact::text).collect();
        assert!(
            texts.contains(&"the heart pumps blood".to_string()),
            "{texts:?}"
        );
        assert!(
            texts.contains(&"the heart releases hormones".to_string()),
            "{texts:?}"
        );
    }

    #[test]
    fn conjoined_subjects_are_distributed() {
        let f = decompose("plants and animals need water");
        let texts: Vec<String> = f.iter().map(SubFact::text).collect();
        assert_eq!(texts[0], "plants and animals need water");
        assert!(
            texts.contains(&"plants need water".to_string()),
            "{texts:?}"
        );
        assert!(
            texts.contains(&"animals need water".to_string()),
            "{texts:?}"
        );
    }

    #[test]
    fn no_verb_falls_back_to_copula() {
        let f = decompose("the big red ball");
        assert_eq!(f.len(), 1);
        assert!(f[0].subject.is_empty());
        assert_eq!(words(&f[0].predicate), "is");
        assert_eq!(words(&f[0].object), "the big red ball");
        assert_eq!(decompose("").len(), 1);
    }

    #[test]
    fn at_most_five() {
        let f = decompose("a and b and c and d and e and f make x; g makes y; h is z");
        assert_eq!(f.len(), MAX_SUB_FACTS);
        assert_eq!(f[0].text(), "a and b and c and d and e and f make x");
    }

    #[test]
    fn negation_stays_in_object() {
        let f = decompose("an aorta is not a vein");
        assert_eq!(words(&f[0].predicate), "is");
        assert_eq!(words(&f[0].object), "not a vein");
    }

    #[test]
    fn replay_examples() {
        let facts = read_decompositions(
            "h17\taorta\tis\tmajor artery\n".as_bytes(),
            Path::new("d.tsv"),
        )
        .unwrap();
        let f = &facts["h17"][0];
        assert_eq!(words(&f.subject), "aorta");
        assert_eq!(words(&f.predicate), "is");
        assert_eq!(words(&f.object), "major artery");
        assert_eq!(f.source, FactSource::External);

        let seven: String = (0..7).map(|i| format!("h1\ts{i}\tis\to{i}\n")).collect();
        let facts = read_decompositions(seven.as_bytes(), Path::new("d.tsv")).unwrap();
        assert_eq!(facts["h1"].len(), 5);
        assert_eq!(words(&facts["h1"][4].subject), "s4");

        let err = read_decompositions("ok\ta\tis\tb\nh2\ta\tis\n".as_bytes(), Path::new("d.tsv"))
            .unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 2, .. }), "{err}");
    }

    #[test]
    fn extra_columns_fold_into_object() {
        let facts = read_decompositions("h\tcell\tmoves\tblood\taway\n".as_bytes(), Path::new("d"))
            .unwrap();
        assert_eq!(words(&facts["h"][0].object), "blood away");
    }

    #[test]
    fn replay_round_trip() {
        let facts = decompose("the heart pumps blood and releases hormones");
        let mut buf = Vec::new();
        write_decompositions(&mut buf, [("x", facts.as_slice())]).unwrap();
        let back = read_decompositions(&buf[..], Path::new("mem")).unwrap();
        let flats: Vec<_> = back["x"].iter().map(|f| f.flat.clone()).collect();
        assert_eq!(
            flats,
            facts.iter().map(|f| f.flat.clone()).collect::<Vec<_>>()
        );
    }

    mod props {
        use super::*;
        use crate::text::TokenSet;
        use proptest::prelude::*;

        const WORDS: &[&str] = &[
            "the", "cell", "is", "and", "but", "plants", "produces", "energy", "in", "of", "that",
            "found", "water", "moved", "growing", "a", "not", "which", "animals", "need",
        ];

        proptest! {
            #[test]
            fn decomposition_contract(idx in proptest::collection::vec(0..WORDS.len(), 0..30)) {
                let text: Vec<&str> = idx.iter().map(|&i| WORDS[i]).collect();
                let text = text.join(" ");
                let facts = decompose(&text);
                prop_assert!(!facts.is_empty() && facts.len() <= MAX_SUB_FACTS);
                let hyp: TokenSet = normalize_tokenize(&text, PARSE_LEN).into_iter().collect();
                for f in &facts {
                    prop_assert!(!f.flat.is_empty());
                    prop_assert!(!f.predicate.is_empty());
                    prop_assert!(f.flat.len() <= MAX_FACT_LEN);
                    for t in &f.flat {
                        prop_assert!(hyp.contains(t) || t.as_str() == "is");
                    }
                }
                prop_assert_eq!(facts, decompose(&text));
            }
        }
    }
}
