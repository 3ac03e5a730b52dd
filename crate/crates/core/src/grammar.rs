//! Probabilistic BNF grammars.
//!
//! A grammar file holds one production per logical line:
//!
//! ```text
//! <symbol> ::= body1 | body2 | ... || probs [p1, p2, ...]
//! ```
//!
//! Lines starting with `#` are comments. A line without `::=` continues the
//! previous production. The first production's left-hand side is the start
//! symbol. Every rule of every production gets a global action index, in
//! source order, and the action list is what the policy chooses from.
//!
//! Rule bodies are tokenized as follows: `<name>` is a nonterminal reference,
//! `(` and `)` are standalone terminals, `"..."` is a quoted terminal and any
//! other run of non-whitespace characters is a terminal.
//!
//! A body of the form `1...nvar` expands to one rule per dataset column
//! (`1`, `2`, ..., `nvar`) when the grammar is loaded.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a nonterminal in [`Grammar::nonterminals`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymbolId(pub usize);

/// Zero-based index into the global action list.
///
/// Displayed 1-based, matching the numbering of a grammar listing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId(pub usize);

impl ActionId {
    /// Action from its 1-based listing number.
    pub fn from_number(number: usize) -> Self {
        assert!(number >= 1, "action numbers start at 1");
        ActionId(number - 1)
    }

    pub fn number(self) -> usize {
        self.0 + 1
    }

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Token {
    Terminal(String),
    Nonterminal(SymbolId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub owner: SymbolId,
    pub body: Vec<Token>,
    pub probability: f64,
}

impl Rule {
    pub fn nonterminals(&self) -> impl Iterator<Item = SymbolId> + '_ {
        self.body.iter().filter_map(|t| match t {
            Token::Nonterminal(s) => Some(*s),
            Token::Terminal(_) => None,
        })
    }
}

/// Boolean vector over the global action list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask(Vec<bool>);

impl Mask {
    pub fn from_bools(bits: Vec<bool>) -> Self {
        Mask(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn allows(&self, action: ActionId) -> bool {
        self.0.get(action.0).copied().unwrap_or(false)
    }

    pub fn count_allowed(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn allowed(&self) -> impl Iterator<Item = ActionId> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| ActionId(i))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: production {symbol} has {rules} rules but {probs} probabilities")]
    ProbabilityCount {
        line: usize,
        symbol: String,
        rules: usize,
        probs: usize,
    },
    #[error("line {line}: nonterminal {symbol} is referenced but never defined")]
    UndefinedNonterminal { line: usize, symbol: String },
    #[error("line {line}: nonterminal {symbol} is defined twice")]
    DuplicateProduction { line: usize, symbol: String },
    #[error("grammar has no productions")]
    Empty,
    #[error("production {symbol} uses the `1...nvar` shorthand but no column count was given")]
    MissingVariableCount { symbol: String },
    #[error("invalid grammar: {0}")]
    Invalid(String),
    #[error("unknown symbol {0}")]
    UnknownSymbol(String),
    #[error("invalid action index {0}")]
    InvalidAction(usize),
}

/// Options applied while loading a grammar file.
#[derive(Clone, Debug, Default)]
pub struct ParseOptions {
    /// Column count used to expand `1...nvar` productions.
    pub nvar: Option<usize>,
}

impl ParseOptions {
    pub fn with_nvar(nvar: usize) -> Self {
        ParseOptions { nvar: Some(nvar) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub symbol: Option<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match &self.symbol {
            Some(s) => write!(f, "{tag}: {s}: {}", self.message),
            None => write!(f, "{tag}: {}", self.message),
        }
    }
}

/// A parsed probabilistic context-free grammar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grammar {
    start: SymbolId,
    nonterminals: Vec<String>,
    terminals: Vec<String>,
    rules: Vec<Rule>,
    productions: Vec<Range<usize>>,
    #[serde(default)]
    warnings: Vec<String>,
}

const PROBABILITY_TOLERANCE: f64 = 1e-6;

impl Grammar {
    /// Parse, validate and normalize a grammar.
    ///
    /// Productions whose probabilities miss 1 by more than `1e-6` are
    /// renormalized and a warning is recorded (see [`Grammar::warnings`]).
    pub fn parse(text: &str, opts: &ParseOptions) -> Result<Grammar, GrammarError> {
        let mut g = Self::parse_unchecked(text, opts)?;
        let errors: Vec<Diagnostic> = g
            .validate()
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .collect();
        if let Some(first) = errors.first() {
            return Err(GrammarError::Invalid(first.to_string()));
        }
        g.renormalize();
        Ok(g)
    }

    /// Syntax-level parse only. Probabilities are kept as written and no
    /// reachability or termination checks are run.
    pub fn parse_unchecked(text: &str, opts: &ParseOptions) -> Result<Grammar, GrammarError> {
        let productions = split_productions(text)?;
        if productions.is_empty() {
            return Err(GrammarError::Empty);
        }

        let mut index: HashMap<String, SymbolId> = HashMap::new();
        let mut names = Vec::new();
        for p in &productions {
            if index.contains_key(&p.lhs) {
                return Err(GrammarError::DuplicateProduction {
                    line: p.line,
                    symbol: p.lhs.clone(),
                });
            }
            index.insert(p.lhs.clone(), SymbolId(names.len()));
            names.push(p.lhs.clone());
        }

        let mut rules = Vec::new();
        let mut ranges = Vec::new();
        for (sym_idx, p) in productions.iter().enumerate() {
            let owner = SymbolId(sym_idx);
            let bodies = expand_bodies(p, opts)?;
            let start = rules.len();
            let mut bodies_tok = Vec::with_capacity(bodies.len());
            for (body, col) in &bodies {
                let toks = tokenize_body(body, p.line, *col)?;
                let mut resolved = Vec::with_capacity(toks.len());
                for t in toks {
                    resolved.push(match t {
                        RawToken::Terminal(s) => Token::Terminal(s),
                        RawToken::Nonterminal(name) => match index.get(&name) {
                            Some(id) => Token::Nonterminal(*id),
                            None => {
                                return Err(GrammarError::UndefinedNonterminal {
                                    line: p.line,
                                    symbol: name,
                                })
                            }
                        },
                    });
                }
                if resolved.is_empty() {
                    return Err(GrammarError::Syntax {
                        line: p.line,
                        column: *col,
                        message: format!("empty rule in production {}", p.lhs),
                    });
                }
                bodies_tok.push(resolved);
            }
            let probs = match &p.probs {
                None => vec![1.0 / bodies_tok.len() as f64; bodies_tok.len()],
                Some(text) => parse_probs(text, bodies_tok.len(), p)?,
            };
            for (body, probability) in bodies_tok.into_iter().zip(probs) {
                rules.push(Rule {
                    owner,
                    body,
                    probability,
                });
            }
            ranges.push(start..rules.len());
        }

        let mut terminals: Vec<String> = Vec::new();
        for r in &rules {
            for t in &r.body {
                if let Token::Terminal(s) = t {
                    if !terminals.contains(s) {
                        terminals.push(s.clone());
                    }
                }
            }
        }

        Ok(Grammar {
            start: SymbolId(0),
            nonterminals: names,
            terminals,
            rules,
            productions: ranges,
            warnings: Vec::new(),
        })
    }

    /// Build a grammar directly from rules. Rules must be grouped by owner,
    /// owners in ascending order. No validation is run.
    pub fn from_rules(start: SymbolId, nonterminals: Vec<String>, rules: Vec<Rule>) -> Grammar {
        let mut productions = vec![0..0; nonterminals.len()];
        let mut i = 0;
        while i < rules.len() {
            let owner = rules[i].owner;
            let begin = i;
            while i < rules.len() && rules[i].owner == owner {
                i += 1;
            }
            productions[owner.0] = begin..i;
        }
        let mut terminals: Vec<String> = Vec::new();
        for r in &rules {
            for t in &r.body {
                if let Token::Terminal(s) = t {
                    if !terminals.contains(s) {
                        terminals.push(s.clone());
                    }
                }
            }
        }
        Grammar {
            start,
            nonterminals,
            terminals,
            rules,
            productions,
            warnings: Vec::new(),
        }
    }

    fn renormalize(&mut self) {
        for (sym, range) in self.productions.iter().enumerate() {
            let sum: f64 = self.rules[range.clone()].iter().map(|r| r.probability).sum();
            if (sum - 1.0).abs() > PROBABILITY_TOLERANCE && sum > 0.0 {
                let msg = format!(
                    "probabilities of {} sum to {sum}, renormalized",
                    self.nonterminals[sym]
                );
                log::warn!("{msg}");
                self.warnings.push(msg);
            }
            if sum > 0.0 {
                for r in &mut self.rules[range.clone()] {
                    r.probability /= sum;
                }
            }
        }
    }

    pub fn start_symbol(&self) -> SymbolId {
        self.start
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn action_count(&self) -> usize {
        self.rules.len()
    }

    pub fn nonterminal_count(&self) -> usize {
        self.nonterminals.len()
    }

    pub fn symbol_name(&self, s: SymbolId) -> &str {
        &self.nonterminals[s.0]
    }

    /// Look a nonterminal up by name, with or without angle brackets.
    pub fn symbol(&self, name: &str) -> Option<SymbolId> {
        let key = if name.starts_with('<') {
            name.to_string()
        } else {
            format!("<{name}>")
        };
        self.nonterminals
            .iter()
            .position(|n| *n == key)
            .map(SymbolId)
    }

    pub fn rule(&self, a: ActionId) -> Result<&Rule, GrammarError> {
        self.rules.get(a.0).ok_or(GrammarError::InvalidAction(a.0))
    }

    /// Action indices of a symbol's production.
    pub fn production(&self, s: SymbolId) -> Range<usize> {
        self.productions[s.0].clone()
    }

    pub fn action_mask(&self, s: SymbolId) -> Result<Mask, GrammarError> {
        let range = self
            .productions
            .get(s.0)
            .ok_or_else(|| GrammarError::UnknownSymbol(format!("#{}", s.0)))?;
        let mut bits = vec![false; self.rules.len()];
        for b in &mut bits[range.clone()] {
            *b = true;
        }
        Ok(Mask(bits))
    }

    /// Split a rule body into its nonterminal occurrences and terminal
    /// tokens, each in body order.
    pub fn child_symbols(&self, a: ActionId) -> Result<(Vec<SymbolId>, Vec<String>), GrammarError> {
        let rule = self.rule(a)?;
        let mut nts = Vec::new();
        let mut ts = Vec::new();
        for t in &rule.body {
            match t {
                Token::Nonterminal(s) => nts.push(*s),
                Token::Terminal(s) => ts.push(s.clone()),
            }
        }
        Ok((nts, ts))
    }

    /// Whether any rule mentions the fittable `const` token.
    pub fn has_constants(&self) -> bool {
        self.terminals.iter().any(|t| contains_const_token(t))
    }

    /// Check every structural invariant. Probability sums are reported as
    /// warnings, everything else as errors.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let n = self.nonterminals.len();
        if self.productions.len() != n {
            out.push(Diagnostic {
                severity: Severity::Error,
                symbol: None,
                message: "production table does not match symbol table".into(),
            });
            return out;
        }
        if self.start.0 >= n {
            out.push(Diagnostic {
                severity: Severity::Error,
                symbol: None,
                message: "start symbol is not a nonterminal".into(),
            });
            return out;
        }
        for (i, range) in self.productions.iter().enumerate() {
            let name = Some(self.nonterminals[i].clone());
            if range.is_empty() {
                out.push(Diagnostic {
                    severity: Severity::Error,
                    symbol: name.clone(),
                    message: "symbol has no rules".into(),
                });
                continue;
            }
            let rules = &self.rules[range.clone()];
            if rules.iter().any(|r| r.owner.0 != i) {
                out.push(Diagnostic {
                    severity: Severity::Error,
                    symbol: name.clone(),
                    message: "production slice contains rules owned by another symbol".into(),
                });
            }
            if rules.iter().any(|r| r.body.is_empty()) {
                out.push(Diagnostic {
                    severity: Severity::Error,
                    symbol: name.clone(),
                    message: "empty rule body".into(),
                });
            }
            if rules
                .iter()
                .any(|r| !(r.probability.is_finite() && r.probability >= 0.0))
            {
                out.push(Diagnostic {
                    severity: Severity::Error,
                    symbol: name.clone(),
                    message: "negative or non-finite probability".into(),
                });
            } else {
                let sum: f64 = rules.iter().map(|r| r.probability).sum();
                if sum <= 0.0 {
                    out.push(Diagnostic {
                        severity: Severity::Error,
                        symbol: name.clone(),
                        message: "probabilities are all zero".into(),
                    });
                } else if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                    out.push(Diagnostic {
                        severity: Severity::Warning,
                        symbol: name.clone(),
                        message: format!("probabilities sum ≠ 1 (sum = {sum})"),
                    });
                }
            }
            for r in rules {
                for s in r.nonterminals() {
                    if s.0 >= n {
                        out.push(Diagnostic {
                            severity: Severity::Error,
                            symbol: name.clone(),
                            message: format!("reference to undefined symbol #{}", s.0),
                        });
                    }
                }
            }
        }
        if out.iter().any(|d| d.severity == Severity::Error) {
            return out;
        }

        let reachable = self.reachable();
        for (i, r) in reachable.iter().enumerate() {
            if !r {
                out.push(Diagnostic {
                    severity: Severity::Error,
                    symbol: Some(self.nonterminals[i].clone()),
                    message: "symbol is unreachable from the start symbol".into(),
                });
            }
        }
        let productive = self.productive();
        for (i, p) in productive.iter().enumerate() {
            if !p {
                out.push(Diagnostic {
                    severity: Severity::Error,
                    symbol: Some(self.nonterminals[i].clone()),
                    message: "symbol cannot terminate".into(),
                });
            }
        }
        out
    }

    /// Symbols reachable from the start symbol.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.nonterminals.len()];
        let mut stack = vec![self.start];
        seen[self.start.0] = true;
        while let Some(s) = stack.pop() {
            for r in &self.rules[self.productions[s.0].clone()] {
                for c in r.nonterminals() {
                    if !seen[c.0] {
                        seen[c.0] = true;
                        stack.push(c);
                    }
                }
            }
        }
        seen
    }

    /// Symbols that derive a terminal-only string in finitely many steps.
    pub fn productive(&self) -> Vec<bool> {
        let mut productive = vec![false; self.nonterminals.len()];
        loop {
            let mut changed = false;
            for r in &self.rules {
                if !productive[r.owner.0] && r.nonterminals().all(|c| productive[c.0]) {
                    productive[r.owner.0] = true;
                    changed = true;
                }
            }
            if !changed {
                return productive;
            }
        }
    }

    /// Serialize back to grammar-file text. Re-parsing the output gives the
    /// same action list and probabilities.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.nonterminals.iter().enumerate() {
            let rules = &self.rules[self.productions[i].clone()];
            let bodies: Vec<String> = rules
                .iter()
                .map(|r| {
                    r.body
                        .iter()
                        .map(|t| match t {
                            Token::Nonterminal(s) => self.nonterminals[s.0].clone(),
                            Token::Terminal(s) => quote_terminal(s),
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            let probs: Vec<String> = rules.iter().map(|r| format!("{:?}", r.probability)).collect();
            out.push_str(&format!(
                "{name} ::= {} || probs [{}]\n",
                bodies.join(" | "),
                probs.join(", ")
            ));
        }
        out
    }
}

pub(crate) fn contains_const_token(t: &str) -> bool {
    let bytes = t.as_bytes();
    let mut i = 0;
    while let Some(pos) = t[i..].find("const") {
        let begin = i + pos;
        let end = begin + 5;
        let before_ok = begin == 0 || !is_ident_byte(bytes[begin - 1]);
        let after_ok = end >= bytes.len() || !is_ident_byte(bytes[end]);
        if before_ok && after_ok {
            return true;
        }
        i = end;
    }
    false
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn quote_terminal(s: &str) -> String {
    let standalone = s == "(" || s == ")";
    let special = s
        .chars()
        .any(|c| c.is_whitespace() || matches!(c, '|' | '<' | '"' | '(' | ')'));
    let needs = s.is_empty() || (special && !standalone);
    if needs {
        format!("\"{}\"", s.replace('"', "'"))
    } else {
        s.to_string()
    }
}

struct RawProduction {
    lhs: String,
    line: usize,
    /// Body text with its starting column.
    body: String,
    body_col: usize,
    probs: Option<String>,
}

fn split_productions(text: &str) -> Result<Vec<RawProduction>, GrammarError> {
    // Logical lines: a physical line without `::=` continues the previous one.
    let mut logical: Vec<(usize, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if line.contains("::=") {
            logical.push((i + 1, line.to_string()));
        } else {
            match logical.last_mut() {
                Some((_, acc)) => {
                    acc.push(' ');
                    acc.push_str(trimmed);
                }
                None => {
                    return Err(GrammarError::Syntax {
                        line: i + 1,
                        column: 1,
                        message: "expected `<symbol> ::=`".into(),
                    })
                }
            }
        }
    }

    let mut out = Vec::new();
    for (line, text) in logical {
        let def = text.find("::=").expect("logical lines contain ::=");
        let lhs = text[..def].trim();
        let lhs_col = text.find(|c: char| !c.is_whitespace()).unwrap_or(0) + 1;
        if !is_nonterminal_name(lhs) {
            return Err(GrammarError::Syntax {
                line,
                column: lhs_col,
                message: format!("left-hand side `{lhs}` is not of the form <name>"),
            });
        }
        let rhs_start = def + 3;
        let rhs = &text[rhs_start..];
        let (body, probs) = match rhs.find("||") {
            Some(p) => {
                let tail = rhs[p + 2..].trim();
                let list = tail.strip_prefix("probs").ok_or_else(|| GrammarError::Syntax {
                    line,
                    column: rhs_start + p + 3,
                    message: "expected `probs [..]` after `||`".into(),
                })?;
                (&rhs[..p], Some(list.trim().to_string()))
            }
            None => (rhs, None),
        };
        out.push(RawProduction {
            lhs: lhs.to_string(),
            line,
            body: body.to_string(),
            body_col: rhs_start + 1,
            probs,
        });
    }
    Ok(out)
}

fn is_nonterminal_name(s: &str) -> bool {
    s.len() >= 3
        && s.starts_with('<')
        && s.ends_with('>')
        && s[1..s.len() - 1]
            .chars()
            .all(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

/// Split on `|` outside quotes; expand the `1...nvar` shorthand.
fn expand_bodies(p: &RawProduction, opts: &ParseOptions) -> Result<Vec<(String, usize)>, GrammarError> {
    let mut parts = Vec::new();
    let mut cur = String::new();
    let mut cur_col = p.body_col;
    let mut in_quote = false;
    for (i, c) in p.body.char_indices() {
        match c {
            '"' => {
                in_quote = !in_quote;
                cur.push(c);
            }
            '|' if !in_quote => {
                parts.push((std::mem::take(&mut cur), cur_col));
                cur_col = p.body_col + i + 1;
            }
            _ => cur.push(c),
        }
    }
    parts.push((cur, cur_col));

    let mut out = Vec::new();
    for (body, col) in parts {
        let compact: String = body.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(rest) = compact.strip_prefix("1...") {
            if rest == "nvar" {
                let n = opts.nvar.ok_or_else(|| GrammarError::MissingVariableCount {
                    symbol: p.lhs.clone(),
                })?;
                out.extend((1..=n).map(|i| (i.to_string(), col)));
                continue;
            }
            if let Ok(n) = rest.parse::<usize>() {
                out.extend((1..=n).map(|i| (i.to_string(), col)));
                continue;
            }
        }
        out.push((body, col));
    }
    Ok(out)
}

enum RawToken {
    Terminal(String),
    Nonterminal(String),
}

fn tokenize_body(body: &str, line: usize, col0: usize) -> Result<Vec<RawToken>, GrammarError> {
    let chars: Vec<char> = body.chars().collect();
    let mut out = Vec::new();
    let mut buf = String::new();
    let flush = |buf: &mut String, out: &mut Vec<RawToken>| {
        if !buf.is_empty() {
            out.push(RawToken::Terminal(std::mem::take(buf)));
        }
    };
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            flush(&mut buf, &mut out);
            i += 1;
        } else if c == '(' || c == ')' {
            flush(&mut buf, &mut out);
            out.push(RawToken::Terminal(c.to_string()));
            i += 1;
        } else if c == '"' {
            flush(&mut buf, &mut out);
            let close = chars[i + 1..].iter().position(|&d| d == '"').ok_or_else(|| {
                GrammarError::Syntax {
                    line,
                    column: col0 + i,
                    message: "unterminated quoted terminal".into(),
                }
            })?;
            let s: String = chars[i + 1..i + 1 + close].iter().collect();
            out.push(RawToken::Terminal(s));
            i += close + 2;
        } else if c == '<' {
            let close = chars[i + 1..].iter().position(|&d| d == '>');
            let name_ok = close.is_some_and(|k| {
                k > 0
                    && chars[i + 1..i + 1 + k]
                        .iter()
                        .all(|c| c.is_alphanumeric() || *c == '_' || *c == '-')
            });
            if name_ok {
                let k = close.unwrap();
                flush(&mut buf, &mut out);
                let s: String = chars[i..i + k + 2].iter().collect();
                out.push(RawToken::Nonterminal(s));
                i += k + 2;
            } else {
                buf.push(c);
                i += 1;
            }
        } else {
            buf.push(c);
            i += 1;
        }
    }
    flush(&mut buf, &mut out);
    Ok(out)
}

fn parse_probs(text: &str, rule_count: usize, p: &RawProduction) -> Result<Vec<f64>, GrammarError> {
    let syntax = |message: String| GrammarError::Syntax {
        line: p.line,
        column: p.body_col + p.body.len() + 2,
        message,
    };
    let inner = text
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| syntax(format!("probabilities must be a bracketed list, got `{text}`")))?;
    // `a ... b` and `a,...,b` both mean "repeat a to fill the production".
    let normalized = inner.replace("...", ",...,");
    let items: Vec<&str> = normalized
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    let mut values = Vec::new();
    let mut ellipsis = None;
    for item in items {
        if item == "..." {
            ellipsis = Some(values.len());
            continue;
        }
        values.push(parse_prob_value(item, rule_count).map_err(syntax)?);
    }
    if let Some(at) = ellipsis {
        let fill = *values
            .get(at.saturating_sub(1))
            .ok_or_else(|| syntax("`...` must follow a value".into()))?;
        while values.len() < rule_count {
            values.insert(at, fill);
        }
        // `[a ... a]` over a single rule: the repeated endpoint collapses.
        while values.len() > rule_count && at < values.len() && values[at] == fill {
            values.remove(at);
        }
    }
    if values.len() != rule_count {
        return Err(GrammarError::ProbabilityCount {
            line: p.line,
            symbol: p.lhs.clone(),
            rules: rule_count,
            probs: values.len(),
        });
    }
    Ok(values)
}

fn parse_prob_value(item: &str, rule_count: usize) -> Result<f64, String> {
    let num = |s: &str| -> Result<f64, String> {
        let s = s.trim();
        if s == "nvar" {
            return Ok(rule_count as f64);
        }
        s.parse::<f64>()
            .map_err(|_| format!("invalid probability `{item}`"))
    };
    match item.split_once('/') {
        Some((a, b)) => Ok(num(a)? / num(b)?),
        None => num(item),
    }
}

/// Per-symbol statistics used in reports and the CLI.
pub fn production_sizes(g: &Grammar) -> BTreeMap<String, usize> {
    g.nonterminals
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), g.productions[i].len()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    fn nguyen(nvar: usize) -> Grammar {
        Grammar::parse(builtin::NGUYEN, &ParseOptions::with_nvar(nvar)).unwrap()
    }

    #[test]
    fn benchmark_grammar_has_19_plus_nvar_actions() {
        for nvar in [1, 2, 5] {
            let g = nguyen(nvar);
            assert_eq!(g.nonterminal_count(), 7);
            assert_eq!(g.action_count(), 19 + nvar);
            assert!(g.validate().is_empty(), "{:?}", g.validate());
        }
    }

    #[test]
    fn two_rule_grammar() {
        let g = Grammar::parse(r#"<s> ::= "a" | "b" || probs [0.5,0.5]"#, &ParseOptions::default())
            .unwrap();
        assert_eq!(g.nonterminal_count(), 1);
        assert_eq!(g.action_count(), 2);
        let p: Vec<f64> = g.rules().iter().map(|r| r.probability).collect();
        assert_eq!(p, vec![0.5, 0.5]);
        assert_eq!(g.action_mask(SymbolId(0)).unwrap().as_slice(), &[true, true]);
        assert_eq!(g.terminals(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn airfoil_grammar_shape() {
        let g = Grammar::parse(builtin::AIRFOIL, &ParseOptions::default()).unwrap();
        assert_eq!(g.nonterminal_count(), 7);
        let dop = g.symbol("<dop>").unwrap();
        assert_eq!(g.production(dop).len(), 2);
        let (_, ts) = g.child_symbols(ActionId(g.production(dop).start)).unwrap();
        assert_eq!(ts, vec!["-".to_string()]);
        assert_eq!(g.action_count(), 26);
        // 0.16 x 6 and 0.33 x 3 get renormalized.
        assert_eq!(g.warnings().len(), 2);
        let nu = g.symbol("no_unit").unwrap();
        for r in &g.rules()[g.production(nu)] {
            assert!((r.probability - 1.0 / 6.0).abs() < 1e-12);
        }
        assert!(g.has_constants());
        assert!(!nguyen(1).has_constants());
    }

    #[test]
    fn dop_mask_has_four_operators() {
        let g = nguyen(1);
        let dop = g.symbol("dop").unwrap();
        let mask = g.action_mask(dop).unwrap();
        assert_eq!(mask.count_allowed(), 4);
        let ops: Vec<String> = mask
            .allowed()
            .map(|a| g.child_symbols(a).unwrap().1.join(""))
            .collect();
        assert_eq!(ops, vec!["+", "-", "*", "/"]);
    }

    #[test]
    fn toy_grammar_numbering() {
        let g = Grammar::parse(builtin::TOY, &ParseOptions::default()).unwrap();
        assert_eq!(g.action_count(), 16);
        let exp = g.start_symbol();
        assert_eq!(g.symbol_name(exp), "<exp>");
        let allowed: Vec<usize> = g.action_mask(exp).unwrap().allowed().map(|a| a.number()).collect();
        assert_eq!(allowed, vec![1, 2]);
        let b = g.symbol("b").unwrap();
        let allowed: Vec<usize> = g.action_mask(b).unwrap().allowed().map(|a| a.number()).collect();
        assert_eq!(allowed, vec![5, 6]);
        let (nts, ts) = g.child_symbols(ActionId::from_number(5)).unwrap();
        let i = g.symbol("i").unwrap();
        assert_eq!(nts, vec![i, i]);
        assert_eq!(ts, vec!["+".to_string()]);
    }

    #[test]
    fn child_symbols_of_terminal_and_function_rules() {
        let g = Grammar::parse("<s> ::= x[1]", &ParseOptions::default()).unwrap();
        let (nts, ts) = g.child_symbols(ActionId(0)).unwrap();
        assert!(nts.is_empty());
        assert_eq!(ts, vec!["x[1]".to_string()]);

        let g = nguyen(1);
        let e = g.symbol("e").unwrap();
        let sop = g.symbol("sop").unwrap();
        let a = ActionId(g.production(e).start + 2);
        let (nts, ts) = g.child_symbols(a).unwrap();
        assert_eq!(nts, vec![sop, e]);
        assert_eq!(ts, vec!["(".to_string(), ")".to_string()]);
        assert!(g.child_symbols(ActionId(999)).is_err());
    }

    #[test]
    fn feature_reference_is_split_around_index_symbol() {
        let g = nguyen(3);
        let et = g.symbol("et").unwrap();
        let rule = g.rule(ActionId(g.production(et).start)).unwrap();
        let varidx = g.symbol("varidx").unwrap();
        assert_eq!(
            rule.body,
            vec![
                Token::Terminal("(".into()),
                Token::Terminal("-".into()),
                Token::Terminal("x[".into()),
                Token::Nonterminal(varidx),
                Token::Terminal("]".into()),
                Token::Terminal(")".into()),
            ]
        );
        assert_eq!(g.production(varidx).len(), 3);
    }

    #[test]
    fn missing_probs_default_to_uniform() {
        let g = Grammar::parse("<s> ::= a | b | c | d", &ParseOptions::default()).unwrap();
        assert!(g.rules().iter().all(|r| r.probability == 0.25));
    }

    #[test]
    fn dead_symbol_is_rejected() {
        let err = Grammar::parse("<a> ::= <a><a>", &ParseOptions::default()).unwrap_err();
        assert!(err.to_string().contains("cannot terminate"), "{err}");
        let g = Grammar::parse_unchecked("<a> ::= <a><a>", &ParseOptions::default()).unwrap();
        let d = g.validate();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].message, "symbol cannot terminate");
    }

    #[test]
    fn bad_probability_sum_is_diagnosed() {
        let text = "<s> ::= a | b || probs [0.6, 0.6]";
        let g = Grammar::parse_unchecked(text, &ParseOptions::default()).unwrap();
        let d = g.validate();
        assert_eq!(d.len(), 1);
        assert!(d[0].message.starts_with("probabilities sum ≠ 1"));
        let g = Grammar::parse(text, &ParseOptions::default()).unwrap();
        assert_eq!(g.warnings().len(), 1);
        assert_eq!(g.rules()[0].probability, 0.5);
    }

    #[test]
    fn parse_errors() {
        let opts = ParseOptions::default();
        assert!(matches!(
            Grammar::parse("<s> ::= a | b || probs [1.0]", &opts),
            Err(GrammarError::ProbabilityCount { rules: 2, probs: 1, .. })
        ));
        assert!(matches!(
            Grammar::parse("<s> ::= <t> | b", &opts),
            Err(GrammarError::UndefinedNonterminal { .. })
        ));
        assert!(matches!(
            Grammar::parse("s ::= a", &opts),
            Err(GrammarError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            Grammar::parse("# c\n\n<s> ::= a || prob [1]", &opts),
            Err(GrammarError::Syntax { line: 3, .. })
        ));
        assert!(matches!(
            Grammar::parse("<v> ::= 1...nvar", &opts),
            Err(GrammarError::MissingVariableCount { .. })
        ));
        assert!(matches!(Grammar::parse("# nothing", &opts), Err(GrammarError::Empty)));
        assert!(matches!(
            Grammar::parse("<s> ::= a\n<s> ::= b", &opts),
            Err(GrammarError::DuplicateProduction { line: 2, .. })
        ));
    }

    #[test]
    fn unreachable_symbol_is_an_error() {
        let err = Grammar::parse("<s> ::= a\n<t> ::= b", &ParseOptions::default()).unwrap_err();
        assert!(err.to_string().contains("unreachable"));
    }

    #[test]
    fn masks_are_disjoint_and_sized() {
        let g = nguyen(2);
        let mut union = vec![0usize; g.action_count()];
        for s in 0..g.nonterminal_count() {
            let m = g.action_mask(SymbolId(s)).unwrap();
            assert_eq!(m.count_allowed(), g.production(SymbolId(s)).len());
            for a in m.allowed() {
                union[a.0] += 1;
            }
        }
        assert!(union.iter().all(|&c| c == 1));
        assert!(g.action_mask(SymbolId(42)).is_err());
    }

    #[test]
    fn const_token_detection() {
        assert!(contains_const_token("const"));
        assert!(contains_const_token("const-10*log10"));
        assert!(contains_const_token("/const"));
        assert!(!contains_const_token("constant"));
        assert!(!contains_const_token("x"));
    }
}
