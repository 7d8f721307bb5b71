//! CoNLL-U treebanks: reading, writing, validation, projectivity and
//! synthetic tree generation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::TreebankError;

/// Index of a dependency relation inside a [`LabelVocab`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabelId(pub u32);

impl LabelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One syntactic word of a sentence. All ten CoNLL-U columns are retained so
/// that writing a parsed sentence reproduces its token lines.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    pub head: usize,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// The POS tag used for featurization: UPOS, falling back to XPOS.
    pub fn pos(&self) -> &str {
        if self.upos != "_" {
            &self.upos
        } else {
            &self.xpos
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Gold heads indexed by token position, with a dummy entry at index 0.
    pub fn heads(&self) -> Vec<usize> {
        std::iter::once(0)
            .chain(self.tokens.iter().map(|t| t.head))
            .collect()
    }

    /// Number of tokens attached to the artificial root.
    pub fn root_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.head == 0).count()
    }

    /// Looks up a `sent_id` comment, if present.
    pub fn sent_id(&self) -> Option<&str> {
        self.comments
            .iter()
            .find_map(|c| c.strip_prefix("# sent_id = "))
            .map(str::trim)
    }

    /// Checks id contiguity, head ranges and tree shape.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.len();
        if n == 0 {
            return Err("empty sentence".into());
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if t.id != i + 1 {
                return Err(format!(
                    "token ids not contiguous: expected {}, found {}",
                    i + 1,
                    t.id
                ));
            }
            if t.head > n {
                return Err(format!(
                    "head {} of token {} out of range [0, {}]",
                    t.head, t.id, n
                ));
            }
            if t.head == t.id {
                return Err(format!("token {} is its own head", t.id));
            }
        }
        let heads = self.heads();
        if let Some(d) = find_cycle(&heads) {
            return Err(format!("cycle through token {}", d));
        }
        Ok(())
    }
}

/// Returns a token on a cycle if the head vector is not a tree rooted at 0.
pub(crate) fn find_cycle(heads: &[usize]) -> Option<usize> {
    let n = heads.len() - 1;
    // 0 = unvisited, 1 = on current path, 2 = reaches root
    let mut mark = vec![0u8; n + 1];
    mark[0] = 2;
    for start in 1..=n {
        let mut path = Vec::new();
        let mut cur = start;
        while mark[cur] == 0 {
            mark[cur] = 1;
            path.push(cur);
            cur = heads[cur];
        }
        if mark[cur] == 1 {
            return Some(cur);
        }
        for p in path {
            mark[p] = 2;
        }
    }
    None
}

/// The ordered set of dependency relations, mapping labels to dense ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelVocab {
    labels: Vec<String>,
    index: HashMap<String, LabelId>,
}

impl LabelVocab {
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = LabelVocab::default();
        for l in labels {
            vocab.insert(l.into());
        }
        vocab
    }

    /// Collects every relation used in `corpus`, sorted lexicographically.
    pub fn from_corpus(corpus: &[Sentence]) -> Self {
        let set: BTreeSet<&str> = corpus
            .iter()
            .flat_map(|s| s.tokens.iter().map(|t| t.deprel.as_str()))
            .collect();
        LabelVocab::new(set)
    }

    pub fn insert(&mut self, label: String) -> LabelId {
        if let Some(&id) = self.index.get(&label) {
            return id;
        }
        let id = LabelId(self.labels.len() as u32);
        self.index.insert(label.clone(), id);
        self.labels.push(label);
        id
    }

    pub fn get(&self, label: &str) -> Option<LabelId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: LabelId) -> &str {
        &self.labels[id.index()]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn ids(&self) -> impl Iterator<Item = LabelId> {
        (0..self.labels.len() as u32).map(LabelId)
    }
}

/// Predicted (or gold) head and relation for every token of a sentence.
/// Index `i` describes token `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub heads: Vec<usize>,
    pub labels: Vec<String>,
}

impl Prediction {
    pub fn from_gold(sentence: &Sentence) -> Self {
        Prediction {
            heads: sentence.tokens.iter().map(|t| t.head).collect(),
            labels: sentence.tokens.iter().map(|t| t.deprel.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn root_count(&self) -> usize {
        self.heads.iter().filter(|&&h| h == 0).count()
    }
}

/// Reads a CoNLL-U (or CoNLL-X) document.
///
/// Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are skipped. Every
/// sentence must form a tree over its syntactic words; sentences with more
/// than one root attachment are accepted with a warning.
pub fn parse_conllu(text: &str) -> Result<Vec<Sentence>, TreebankError> {
    let mut sentences = Vec::new();
    let mut current = Sentence::default();
    let mut block_start = 1;

    let mut token_lines: Vec<usize> = Vec::new();

    let mut finish = |current: &mut Sentence,
                      lines: &mut Vec<usize>,
                      start: usize|
     -> Result<(), TreebankError> {
        if current.tokens.is_empty() {
            current.comments.clear();
            return Ok(());
        }
        let sentence = std::mem::take(current);
        let lines = std::mem::take(lines);
        let n = sentence.len();
        for (t, &line) in sentence.tokens.iter().zip(&lines) {
            if t.head > n {
                return Err(TreebankError::Parse {
                    line,
                    message: format!("HEAD {} out of range [0, {}]", t.head, n),
                });
            }
        }
        sentence
            .validate()
            .map_err(|message| TreebankError::InvalidTree {
                line: start,
                message,
            })?;
        if sentence.root_count() != 1 {
            log::warn!(
                "sentence starting at line {} has {} root attachments",
                start,
                sentence.root_count()
            );
        }
        sentences.push(sentence);
        Ok(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            finish(&mut current, &mut token_lines, block_start)?;
            block_start = lineno + 1;
            continue;
        }
        if line.starts_with('#') {
            if current.tokens.is_empty() {
                current.comments.push(line.to_string());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(TreebankError::Parse {
                line: lineno,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id: usize = cols[0].parse().map_err(|_| TreebankError::Parse {
            line: lineno,
            message: format!("invalid token id {:?}", cols[0]),
        })?;
        let head: usize = cols[6].parse().map_err(|_| TreebankError::Parse {
            line: lineno,
            message: format!("non-integer HEAD {:?}", cols[6]),
        })?;
        current.tokens.push(Token {
            id,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            xpos: cols[4].to_string(),
            feats: cols[5].to_string(),
            head,
            deprel: cols[7].to_string(),
            deps: cols[8].to_string(),
            misc: cols[9].to_string(),
        });
        token_lines.push(lineno);
    }
    finish(&mut current, &mut token_lines, block_start)?;
    Ok(sentences)
}

/// Writes sentences as CoNLL-U. When `predicted` is given, its heads and
/// relations replace the gold HEAD and DEPREL columns.
pub fn write_conllu(
    sentences: &[Sentence],
    predicted: Option<&[Prediction]>,
) -> Result<String, TreebankError> {
    if let Some(pred) = predicted {
        if pred.len() != sentences.len() {
            return Err(TreebankError::Mismatch(format!(
                "{} sentences but {} predictions",
                sentences.len(),
                pred.len()
            )));
        }
    }
    let mut out = String::new();
    for (si, sentence) in sentences.iter().enumerate() {
        let pred = predicted.map(|p| &p[si]);
        if let Some(p) = pred {
            if p.heads.len() != sentence.len() || p.labels.len() != sentence.len() {
                return Err(TreebankError::MissingHead { sentence: si });
            }
        }
        for c in &sentence.comments {
            out.push_str(c);
            out.push('\n');
        }
        for (i, t) in sentence.tokens.iter().enumerate() {
            let (head, deprel) = match pred {
                Some(p) => (p.heads[i], p.labels[i].as_str()),
                None => (t.head, t.deprel.as_str()),
            };
            let cols = [
                t.id.to_string(),
                t.form.clone(),
                t.lemma.clone(),
                t.upos.clone(),
                t.xpos.clone(),
                t.feats.clone(),
                head.to_string(),
                deprel.to_string(),
                t.deps.clone(),
                t.misc.clone(),
            ];
            out.push_str(&cols.join("\t"));
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}

/// True iff no two arcs of the tree cross. `heads[0]` is ignored.
pub fn heads_projective(heads: &[usize]) -> bool {
    let spans: Vec<(usize, usize)> = (1..heads.len())
        .map(|d| (heads[d].min(d), heads[d].max(d)))
        .collect();
    for (i, &(a, b)) in spans.iter().enumerate() {
        for &(c, d) in &spans[i + 1..] {
            if (a < c && c < b && b < d) || (c < a && a < d && d < b) {
                return false;
            }
        }
    }
    true
}

pub fn is_projective(sentence: &Sentence) -> bool {
    heads_projective(&sentence.heads())
}

/// Generates a random projective tree with a single root attachment.
pub fn random_projective_tree(
    n: usize,
    vocab: &LabelVocab,
    seed: u64,
) -> Result<Sentence, TreebankError> {
    if n == 0 {
        return Err(TreebankError::EmptySentence);
    }
    if vocab.is_empty() {
        return Err(TreebankError::Mismatch("label vocabulary is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut heads = vec![0usize; n + 1];
    build_subtree(&mut rng, &mut heads, 1, n, 0);
    Ok(sentence_from_heads(&heads, |_| {
        vocab
            .label(LabelId(rng.random_range(0..vocab.len() as u32)))
            .to_string()
    }))
}

fn build_subtree(rng: &mut ChaCha8Rng, heads: &mut [usize], lo: usize, hi: usize, parent: usize) {
    let h = rng.random_range(lo..=hi);
    heads[h] = parent;
    for (a, b) in random_segments(rng, lo, h) {
        build_subtree(rng, heads, a, b, h);
    }
    for (a, b) in random_segments(rng, h + 1, hi + 1) {
        build_subtree(rng, heads, a, b, h);
    }
}

/// Splits `[lo, end)` into contiguous inclusive segments.
fn random_segments(rng: &mut ChaCha8Rng, lo: usize, end: usize) -> Vec<(usize, usize)> {
    let mut segs = Vec::new();
    if lo >= end {
        return segs;
    }
    let mut start = lo;
    for cut in lo + 1..end {
        if rng.random_bool(0.5) {
            segs.push((start, cut - 1));
            start = cut;
        }
    }
    segs.push((start, end - 1));
    segs
}

/// Builds a synthetic sentence (forms `w1..wn`, POS `X`) over the given heads.
pub fn sentence_from_heads(heads: &[usize], mut label: impl FnMut(usize) -> String) -> Sentence {
    let tokens = (1..heads.len())
        .map(|i| Token {
            id: i,
            form: format!("w{}", i),
            lemma: "_".into(),
            upos: "X".into(),
            xpos: "_".into(),
            feats: "_".into(),
            head: heads[i],
            deprel: label(i),
            deps: "_".into(),
            misc: "_".into(),
        })
        .collect();
    Sentence {
        comments: Vec::new(),
        tokens,
    }
}

/// Which tokens are left out of attachment scoring.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PunctPolicy {
    /// Exclude tokens whose gold relation is `punct`.
    #[default]
    Label,
    /// Exclude tokens with a PTB punctuation tag (`` '' : , .).
    Xpos,
}

impl FromStr for PunctPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "label" => Ok(PunctPolicy::Label),
            "xpos" => Ok(PunctPolicy::Xpos),
            other => Err(format!(
                "unknown punctuation policy {:?} (expected label|xpos)",
                other
            )),
        }
    }
}

impl fmt::Display for PunctPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PunctPolicy::Label => "label",
            PunctPolicy::Xpos => "xpos",
        })
    }
}

const PTB_PUNCT_TAGS: [&str; 5] = ["``", "''", ":", ",", "."];

/// `true` marks a token excluded from evaluation.
pub fn punctuation_mask(sentence: &Sentence, policy: PunctPolicy) -> Vec<bool> {
    sentence
        .tokens
        .iter()
        .map(|t| match policy {
            PunctPolicy::Label => t.deprel == "punct",
            PunctPolicy::Xpos => PTB_PUNCT_TAGS.contains(&t.xpos.as_str()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "1\ta\t_\tX\t_\t_\t2\tdep\t_\t_\n2\tb\t_\tX\t_\t_\t0\troot\t_\t_\n\n";

    #[test]
    fn reads_two_token_block() {
        let s = parse_conllu(TWO).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].heads(), vec![0, 2, 0]);
        assert_eq!(s[0].tokens[0].deprel, "dep");
        assert_eq!(write_conllu(&s, None).unwrap(), TWO);
    }

    #[test]
    fn skips_ranges_and_empty_nodes() {
        let text = "# text = ab c\n1-2\tab\t_\t_\t_\t_\t_\t_\t_\t_\n1\ta\t_\tX\t_\t_\t3\tdep\t_\t_\n\
                    2\tb\t_\tX\t_\t_\t3\tdep\t_\t_\n2.1\tz\t_\tX\t_\t_\t_\t_\t_\t_\n3\tc\t_\tX\t_\t_\t0\troot\t_\t_\n";
        let s = parse_conllu(text).unwrap();
        assert_eq!(s[0].len(), 3);
        assert_eq!(s[0].comments, vec!["# text = ab c".to_string()]);
        let ids: Vec<usize> = s[0].tokens.iter().map(|t| t.id).collect();
        assert_eq!(ids, vec![1, 2, 3]);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let bad_cols = "1\ta\t_\tX\n";
        match parse_conllu(bad_cols) {
            Err(TreebankError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{:?}", other),
        }
        let bad_head = "# c\n1\ta\t_\tX\t_\t_\tx\tdep\t_\t_\n";
        match parse_conllu(bad_head) {
            Err(TreebankError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{:?}", other),
        }
        let out_of_range = "1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n2\tb\t_\tX\t_\t_\t7\tdep\t_\t_\n";
        assert!(matches!(
            parse_conllu(out_of_range),
            Err(TreebankError::Parse { line: 2, .. })
        ));
        let cyclic = "1\ta\t_\tX\t_\t_\t2\tdep\t_\t_\n2\tb\t_\tX\t_\t_\t1\tdep\t_\t_\n";
        assert!(matches!(
            parse_conllu(cyclic),
            Err(TreebankError::InvalidTree { .. })
        ));
    }

    #[test]
    fn predicted_columns_replace_gold() {
        let s = parse_conllu(TWO).unwrap();
        let pred = Prediction {
            heads: vec![0, 1],
            labels: vec!["root".into(), "obj".into()],
        };
        let out = write_conllu(&s, Some(&[pred])).unwrap();
        assert!(out.contains("1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n"));
        assert!(out.contains("2\tb\t_\tX\t_\t_\t1\tobj\t_\t_\n"));
        let short = Prediction {
            heads: vec![0],
            labels: vec!["root".into()],
        };
        assert!(matches!(
            write_conllu(&s, Some(&[short])),
            Err(TreebankError::MissingHead { sentence: 0 })
        ));
    }

    #[test]
    fn projectivity_examples() {
        assert!(heads_projective(&[0, 0, 1, 2]));
        // 3->1 and 2->4 cross, root on 3
        assert!(!heads_projective(&[0, 3, 0, 2, 2]));
        assert!(heads_projective(&[0, 2, 0, 2]));
    }

    #[test]
    fn generator_small_cases() {
        let vocab = LabelVocab::new(["dep", "root"]);
        let s = random_projective_tree(1, &vocab, 3).unwrap();
        assert_eq!(s.heads(), vec![0, 0]);
        for seed in 0..50 {
            let h = random_projective_tree(2, &vocab, seed).unwrap().heads();
            assert!(h == vec![0, 0, 1] || h == vec![0, 2, 0], "{:?}", h);
        }
        assert!(random_projective_tree(0, &vocab, 0).is_err());
        assert_eq!(
            random_projective_tree(12, &vocab, 9).unwrap(),
            random_projective_tree(12, &vocab, 9).unwrap()
        );
    }

    #[test]
    fn punct_policies() {
        let text = "1\ta\t_\tX\tNN\t_\t0\troot\t_\t_\n2\t.\t_\tPUNCT\t.\t_\t1\tpunct\t_\t_\n3\tb\t_\tX\t,\t_\t1\tnsubj\t_\t_\n";
        let s = &parse_conllu(text).unwrap()[0];
        assert_eq!(
            punctuation_mask(s, PunctPolicy::Label),
            vec![false, true, false]
        );
        assert_eq!(
            punctuation_mask(s, PunctPolicy::Xpos),
            vec![false, true, true]
        );
    }
}
