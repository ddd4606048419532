//! Stochastic tree grammars for generating labelled two-language corpora.
//!
//! Grammar text, line oriented, `#` starts a comment:
//!
//! ```text
//! labels: ms bs                      # algorithm labels
//! languages: cpp java                # two language tags
//! map block  block  BlockStmt        # concept, name per language
//! start ms MsProgram                 # start rule per label
//! Stmt = 3: Assign | (if Cond Block) # weighted alternatives (default 1)
//!      | Call                        # continuation line
//! ```
//!
//! Items inside an alternative:
//!
//! - `(concept item*)` emits one node named after `concept` in the target
//!   language, with the items as children;
//! - `Rule` (capitalised) expands a rule in place, possibly to several nodes;
//! - `<lang item*>` expands the items only when rendering `lang`;
//! - any item may carry `?` (present with probability 1/2), `?0.8`, `{n}` or
//!   `{m,n}` (uniform repeat count).

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::{is_valid_name, validate_tag, Ast, AstNode};
use crate::error::{Error, Result};
use crate::numeric::RngStream;

/// Hard limit on generated tree size.
pub const MAX_NODES: usize = 500;
const MAX_EXPANSION_DEPTH: usize = 128;

pub const DEFAULT_GRAMMAR: &str = include_str!("../grammars/default.grammar");

#[derive(Clone, Debug, PartialEq)]
enum Quant {
    One,
    Opt(f64),
    Repeat(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
enum Atom {
    Node {
        concept: String,
        children: Vec<Item>,
    },
    Rule(String),
    Lang {
        lang: usize,
        items: Vec<Item>,
    },
}

#[derive(Clone, Debug, PartialEq)]
struct Item {
    atom: Atom,
    quant: Quant,
}

#[derive(Clone, Debug, PartialEq)]
struct Alt {
    weight: f64,
    items: Vec<Item>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthGrammar {
    labels: Vec<String>,
    languages: [String; 2],
    names: BTreeMap<String, [String; 2]>,
    rules: BTreeMap<String, Vec<Alt>>,
    starts: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    LParen,
    RParen,
    LAngle,
    RAngle,
    Bar,
    Colon,
    Opt(f64),
    Repeat(usize, usize),
    Ident(String),
    Number(f64),
}

fn grammar_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Grammar(format!("grammar line {line}: {msg}"))
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Tok>> {
    let b = text.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    let number_end = |mut j: usize| {
        while j < b.len() && (b[j].is_ascii_digit() || b[j] == b'.') {
            j += 1;
        }
        j
    };
    while i < b.len() {
        let c = b[i];
        match c {
            b' ' | b'\t' => i += 1,
            b'(' => (out.push(Tok::LParen), i += 1).1,
            b')' => (out.push(Tok::RParen), i += 1).1,
            b'<' => (out.push(Tok::LAngle), i += 1).1,
            b'>' => (out.push(Tok::RAngle), i += 1).1,
            b'|' => (out.push(Tok::Bar), i += 1).1,
            b':' => (out.push(Tok::Colon), i += 1).1,
            b'?' => {
                let j = number_end(i + 1);
                let p = if j == i + 1 {
                    0.5
                } else {
                    text[i + 1..j]
                        .parse::<f64>()
                        .map_err(|e| grammar_err(line, e))?
                };
                if !(p > 0.0 && p < 1.0) {
                    return Err(grammar_err(
                        line,
                        format!("option probability {p} outside (0, 1)"),
                    ));
                }
                out.push(Tok::Opt(p));
                i = j;
            }
            b'{' => {
                let close = text[i..]
                    .find('}')
                    .map(|k| i + k)
                    .ok_or_else(|| grammar_err(line, "unclosed `{`"))?;
                let inner = &text[i + 1..close];
                let parse = |s: &str| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|e| grammar_err(line, format!("repeat `{inner}`: {e}")))
                };
                let (m, n) = match inner.split_once(',') {
                    Some((a, z)) => (parse(a)?, parse(z)?),
                    None => {
                        let n = parse(inner)?;
                        (n, n)
                    }
                };
                if m > n {
                    return Err(grammar_err(line, format!("empty repeat range {{{m},{n}}}")));
                }
                out.push(Tok::Repeat(m, n));
                i = close + 1;
            }
            c if c.is_ascii_digit() => {
                let j = number_end(i);
                let v = text[i..j]
                    .parse::<f64>()
                    .map_err(|e| grammar_err(line, e))?;
                out.push(Tok::Number(v));
                i = j;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < b.len() && (b[j].is_ascii_alphanumeric() || b[j] == b'_' || b[j] == b'-')
                {
                    j += 1;
                }
                out.push(Tok::Ident(text[i..j].to_string()));
                i = j;
            }
            _ => {
                return Err(grammar_err(
                    line,
                    format!("unexpected character `{}`", c as char),
                ))
            }
        }
    }
    Ok(out)
}

fn is_rule_name(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_uppercase())
}

struct RuleParser<'a> {
    toks: &'a [Tok],
    pos: usize,
    line: usize,
    languages: &'a [String; 2],
}

impl RuleParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn alts(&mut self) -> Result<Vec<Alt>> {
        let mut alts = vec![self.alt()?];
        while self.peek() == Some(&Tok::Bar) {
            self.pos += 1;
            alts.push(self.alt()?);
        }
        if let Some(t) = self.peek() {
            return Err(grammar_err(self.line, format!("unexpected {t:?}")));
        }
        Ok(alts)
    }

    fn alt(&mut self) -> Result<Alt> {
        let mut weight = 1.0;
        if let (Some(Tok::Number(w)), Some(Tok::Colon)) =
            (self.toks.get(self.pos), self.toks.get(self.pos + 1))
        {
            weight = *w;
            self.pos += 2;
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(grammar_err(
                    self.line,
                    format!("weight {weight} must be positive"),
                ));
            }
        }
        Ok(Alt {
            weight,
            items: self.items()?,
        })
    }

    fn items(&mut self) -> Result<Vec<Item>> {
        let mut items = Vec::new();
        while let Some(t) = self.peek() {
            if matches!(t, Tok::Bar | Tok::RParen | Tok::RAngle) {
                break;
            }
            items.push(self.item()?);
        }
        Ok(items)
    }

    fn item(&mut self) -> Result<Item> {
        let atom = match self.next() {
            Some(Tok::LParen) => {
                let concept = match self.next() {
                    Some(Tok::Ident(c)) if !is_rule_name(&c) => c,
                    other => {
                        return Err(grammar_err(
                            self.line,
                            format!("expected a concept after `(`, got {other:?}"),
                        ))
                    }
                };
                let children = self.items()?;
                self.expect(Tok::RParen)?;
                Atom::Node { concept, children }
            }
            Some(Tok::LAngle) => {
                let lang = match self.next() {
                    Some(Tok::Ident(l)) => {
                        self.languages.iter().position(|x| *x == l).ok_or_else(|| {
                            grammar_err(self.line, format!("unknown language `{l}`"))
                        })?
                    }
                    other => {
                        return Err(grammar_err(
                            self.line,
                            format!("expected a language after `<`, got {other:?}"),
                        ))
                    }
                };
                let items = self.items()?;
                self.expect(Tok::RAngle)?;
                Atom::Lang { lang, items }
            }
            Some(Tok::Ident(r)) if is_rule_name(&r) => Atom::Rule(r),
            other => return Err(grammar_err(self.line, format!("unexpected {other:?}"))),
        };
        let quant = match self.peek() {
            Some(Tok::Opt(p)) => {
                let p = *p;
                self.pos += 1;
                Quant::Opt(p)
            }
            Some(Tok::Repeat(m, n)) => {
                let q = Quant::Repeat(*m, *n);
                self.pos += 1;
                q
            }
            _ => Quant::One,
        };
        Ok(Item { atom, quant })
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.next() {
            Some(got) if got == t => Ok(()),
            other => Err(grammar_err(
                self.line,
                format!("expected {t:?}, got {other:?}"),
            )),
        }
    }
}

impl SynthGrammar {
    pub fn parse(text: &str) -> Result<Self> {
        let mut labels: Option<Vec<String>> = None;
        let mut languages: Option<[String; 2]> = None;
        let mut names = BTreeMap::new();
        let mut starts = BTreeMap::new();
        // (name, first line, body)
        let mut raw_rules: Vec<(String, usize, String)> = Vec::new();

        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let words: Vec<&str> = content.split_whitespace().collect();
            if let Some(rest) = content.strip_prefix("labels:") {
                let ls: Vec<String> = rest.split_whitespace().map(String::from).collect();
                for l in &ls {
                    validate_tag("label", l).map_err(|e| grammar_err(line, e))?;
                }
                if ls.is_empty() || ls.iter().collect::<BTreeSet<_>>().len() != ls.len() {
                    return Err(grammar_err(line, "labels must be non-empty and distinct"));
                }
                labels = Some(ls);
            } else if let Some(rest) = content.strip_prefix("languages:") {
                let ls: Vec<&str> = rest.split_whitespace().collect();
                if ls.len() != 2 || ls[0] == ls[1] {
                    return Err(grammar_err(line, "exactly two distinct languages required"));
                }
                for l in &ls {
                    validate_tag("language", l).map_err(|e| grammar_err(line, e))?;
                }
                languages = Some([ls[0].into(), ls[1].into()]);
            } else if words[0] == "map" {
                if words.len() != 4 {
                    return Err(grammar_err(
                        line,
                        "map needs a concept and one name per language",
                    ));
                }
                for w in &words[2..] {
                    if !is_valid_name(w) {
                        return Err(grammar_err(line, format!("invalid node name `{w}`")));
                    }
                }
                if names
                    .insert(
                        words[1].to_string(),
                        [words[2].to_string(), words[3].to_string()],
                    )
                    .is_some()
                {
                    return Err(grammar_err(
                        line,
                        format!("concept `{}` mapped twice", words[1]),
                    ));
                }
            } else if words[0] == "start" {
                if words.len() != 3 || !is_rule_name(words[2]) {
                    return Err(grammar_err(line, "start needs a label and a rule name"));
                }
                starts.insert(words[1].to_string(), words[2].to_string());
            } else if let Some(rest) = content.strip_prefix('|') {
                let last = raw_rules
                    .last_mut()
                    .ok_or_else(|| grammar_err(line, "continuation without a rule"))?;
                last.2.push_str(" | ");
                last.2.push_str(rest);
            } else if let Some((lhs, rhs)) = content.split_once('=') {
                let name = lhs.trim();
                if !is_rule_name(name)
                    || !name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
                {
                    return Err(grammar_err(line, format!("invalid rule name `{name}`")));
                }
                if raw_rules.iter().any(|r| r.0 == name) {
                    return Err(grammar_err(line, format!("rule `{name}` defined twice")));
                }
                raw_rules.push((name.to_string(), line, rhs.to_string()));
            } else {
                return Err(grammar_err(line, format!("cannot parse `{content}`")));
            }
        }

        let labels =
            labels.ok_or_else(|| Error::Grammar("grammar has no `labels:` line".into()))?;
        let languages =
            languages.ok_or_else(|| Error::Grammar("grammar has no `languages:` line".into()))?;
        let mut rules = BTreeMap::new();
        for (name, line, body) in raw_rules {
            let toks = tokenize(&body, line)?;
            let mut p = RuleParser {
                toks: &toks,
                pos: 0,
                line,
                languages: &languages,
            };
            rules.insert(name, p.alts()?);
        }
        let g = Self {
            labels,
            languages,
            names,
            rules,
            starts,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        for l in &self.labels {
            let r = self
                .starts
                .get(l)
                .ok_or_else(|| Error::Grammar(format!("label `{l}` has no start rule")))?;
            if !self.rules.contains_key(r) {
                return Err(Error::Grammar(format!("start rule `{r}` is not defined")));
            }
        }
        if let Some(l) = self.starts.keys().find(|l| !self.labels.contains(l)) {
            return Err(Error::Grammar(format!(
                "start given for undeclared label `{l}`"
            )));
        }
        fn walk(g: &SynthGrammar, items: &[Item], rule: &str) -> Result<()> {
            for it in items {
                match &it.atom {
                    Atom::Node { concept, children } => {
                        if !g.names.contains_key(concept) {
                            return Err(Error::Grammar(format!(
                                "rule `{rule}` uses unmapped concept `{concept}`"
                            )));
                        }
                        walk(g, children, rule)?;
                    }
                    Atom::Rule(r) => {
                        if !g.rules.contains_key(r) {
                            return Err(Error::Grammar(format!(
                                "rule `{rule}` refers to undefined `{r}`"
                            )));
                        }
                    }
                    Atom::Lang { items, .. } => walk(g, items, rule)?,
                }
            }
            Ok(())
        }
        for (name, alts) in &self.rules {
            for a in alts {
                walk(self, &a.items, name)?;
            }
        }
        let left: BTreeSet<&str> = self.names.values().map(|n| n[0].as_str()).collect();
        if let Some(shared) = self
            .names
            .values()
            .map(|n| n[1].as_str())
            .find(|n| left.contains(n))
        {
            return Err(Error::Grammar(format!(
                "node name `{shared}` appears in both languages"
            )));
        }
        Ok(())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn languages(&self) -> &[String; 2] {
        &self.languages
    }

    /// Every node name the grammar can emit in `language`, sorted.
    pub fn type_names(&self, language: &str) -> Result<Vec<String>> {
        let k = self.language_index(language)?;
        let set: BTreeSet<&String> = self.names.values().map(|n| &n[k]).collect();
        Ok(set.into_iter().cloned().collect())
    }

    fn language_index(&self, language: &str) -> Result<usize> {
        self.languages
            .iter()
            .position(|l| l == language)
            .ok_or_else(|| Error::Grammar(format!("grammar does not render language `{language}`")))
    }

    /// One random program of `label` rendered in `language`.
    pub fn generate(&self, label: &str, language: &str, rng: &mut RngStream) -> Result<AstNode> {
        let lang = self.language_index(language)?;
        let start = self
            .starts
            .get(label)
            .ok_or_else(|| Error::MissingLabel(label.to_string()))?;
        let mut budget = MAX_NODES;
        let mut out = self.expand_rule(start, lang, rng, &mut budget, 0)?;
        if out.len() != 1 {
            return Err(Error::Grammar(format!(
                "start rule `{start}` produced {} top-level nodes, expected 1",
                out.len()
            )));
        }
        Ok(out.pop().expect("one node"))
    }

    fn expand_rule(
        &self,
        name: &str,
        lang: usize,
        rng: &mut RngStream,
        budget: &mut usize,
        depth: usize,
    ) -> Result<Vec<AstNode>> {
        if depth > MAX_EXPANSION_DEPTH {
            return Err(Error::Grammar(format!(
                "expansion deeper than {MAX_EXPANSION_DEPTH} levels at rule `{name}`"
            )));
        }
        let alts = &self.rules[name];
        let total: f64 = alts.iter().map(|a| a.weight).sum();
        let mut u = rng.uniform() * total;
        let mut chosen = &alts[alts.len() - 1];
        for a in alts {
            if u < a.weight {
                chosen = a;
                break;
            }
            u -= a.weight;
        }
        self.expand_items(&chosen.items, lang, rng, budget, depth + 1)
    }

    fn expand_items(
        &self,
        items: &[Item],
        lang: usize,
        rng: &mut RngStream,
        budget: &mut usize,
        depth: usize,
    ) -> Result<Vec<AstNode>> {
        let mut out = Vec::new();
        for it in items {
            let reps = match it.quant {
                Quant::One => 1,
                Quant::Opt(p) => usize::from(rng.bernoulli(p)),
                Quant::Repeat(m, n) => rng.range_inclusive(m, n),
            };
            for _ in 0..reps {
                match &it.atom {
                    Atom::Node { concept, children } => {
                        if *budget == 0 {
                            return Err(Error::Grammar(format!(
                                "generated tree exceeds {MAX_NODES} nodes"
                            )));
                        }
                        *budget -= 1;
                        let kids = self.expand_items(children, lang, rng, budget, depth + 1)?;
                        out.push(AstNode::with_children(
                            self.names[concept][lang].clone(),
                            kids,
                        ));
                    }
                    Atom::Rule(r) => {
                        out.extend(self.expand_rule(r, lang, rng, budget, depth + 1)?)
                    }
                    Atom::Lang { lang: l, items } => {
                        if *l == lang {
                            out.extend(self.expand_items(items, lang, rng, budget, depth + 1)?);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `per_label` programs for every label in both languages. Program `i` of
/// a `(language, label)` cell uses its own forked stream, so cells are
/// independent of each other and of generation order.
pub fn generate_corpus(
    grammar: &SynthGrammar,
    per_label: usize,
    rng: &RngStream,
) -> Result<Vec<Ast>> {
    let mut out = Vec::with_capacity(per_label * grammar.labels.len() * 2);
    for (li, lang) in grammar.languages.iter().enumerate() {
        for (ki, label) in grammar.labels.iter().enumerate() {
            for i in 0..per_label {
                let mut r = rng.fork_path(&[li as u64, ki as u64, i as u64]);
                let root = grammar.generate(label, lang, &mut r)?;
                out.push(
                    Ast::new(root, lang.clone(), format!("{lang}-{label}-{i:04}"))
                        .with_label(label.clone()),
                );
            }
        }
    }
    Ok(out)
}

/// Predicts a program's label from its node count alone: counts fall into
/// fixed-width bins and each bin votes for its most frequent training
/// label (ties to the first label in order; empty bins use the overall
/// majority).
#[derive(Clone, Debug, PartialEq)]
pub struct NodeCountBaseline {
    bin_width: usize,
    bins: BTreeMap<usize, String>,
    fallback: String,
}

impl NodeCountBaseline {
    pub fn fit(samples: &[(String, usize)], bin_width: usize) -> Result<Self> {
        if samples.is_empty() || bin_width == 0 {
            return Err(Error::InvalidArgument(
                "baseline needs samples and a positive bin width".into(),
            ));
        }
        let mut counts: BTreeMap<usize, BTreeMap<&str, usize>> = BTreeMap::new();
        let mut overall: BTreeMap<&str, usize> = BTreeMap::new();
        for (label, n) in samples {
            *counts
                .entry(n / bin_width)
                .or_default()
                .entry(label)
                .or_default() += 1;
            *overall.entry(label).or_default() += 1;
        }
        let top = |m: &BTreeMap<&str, usize>| {
            let mut best: (&str, usize) = ("", 0);
            for (&l, &c) in m {
                if c > best.1 {
                    best = (l, c);
                }
            }
            best.0.to_string()
        };
        Ok(Self {
            bin_width,
            bins: counts.iter().map(|(&b, m)| (b, top(m))).collect(),
            fallback: top(&overall),
        })
    }

    pub fn predict(&self, node_count: usize) -> &str {
        self.bins
            .get(&(node_count / self.bin_width))
            .unwrap_or(&self.fallback)
    }

    pub fn accuracy(&self, samples: &[(String, usize)]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let hits = samples
            .iter()
            .filter(|(l, n)| self.predict(*n) == l)
            .count();
        hits as f64 / samples.len() as f64
    }
}

/// Bin width used by [`baseline_accuracy`].
pub const BASELINE_BIN_WIDTH: usize = 10;

/// Held-out accuracy of [`NodeCountBaseline`] per language. Within every
/// `(language, label)` cell, programs are ordered by id, shuffled and the
/// first `floor(ratio·n)` fit the baseline; the rest score it.
pub fn baseline_accuracy(
    corpus: &[Ast],
    ratio: f64,
    rng: &RngStream,
) -> Result<BTreeMap<String, f64>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "baseline ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut cells: BTreeMap<(&str, &str), Vec<&Ast>> = BTreeMap::new();
    for a in corpus {
        let label = a
            .algorithm_label
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("`{}` has no label", a.source_id)))?;
        cells
            .entry((a.language.as_str(), label))
            .or_default()
            .push(a);
    }
    // (label, node count) rows per language, train then held out
    type Rows = Vec<(String, usize)>;
    let mut split: BTreeMap<&str, (Rows, Rows)> = BTreeMap::new();
    for (k, ((lang, label), mut members)) in cells.into_iter().enumerate() {
        members.sort_by(|a, b| a.source_id.cmp(&b.source_id));
        rng.fork(k as u64).shuffle(&mut members);
        let cut = (ratio * members.len() as f64).floor() as usize;
        let (train, test) = split.entry(lang).or_default();
        for (i, a) in members.iter().enumerate() {
            let s = (label.to_string(), a.root.node_count());
            if i < cut {
                train.push(s);
            } else {
                test.push(s);
            }
        }
    }
    split
        .into_iter()
        .map(|(lang, (train, test))| {
            let b = NodeCountBaseline::fit(&train, BASELINE_BIN_WIDTH)?;
            Ok((lang.to_string(), b.accuracy(&test)))
        })
        .collect()
}
