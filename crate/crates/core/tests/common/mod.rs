//! Random grammar generation shared by integration tests.

#![allow(dead_code)]

use ggsr_core::{Grammar, ParseOptions};
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub enum Sym {
    T(String),
    N(usize),
}

/// A grammar kept as plain data, independent of the parser.
#[derive(Clone, Debug)]
pub struct RandomGrammar {
    /// Rules of nonterminal `i`, in listing order.
    pub productions: Vec<Vec<Vec<Sym>>>,
    pub probabilities: Vec<Vec<f64>>,
}

const TERMINALS: [&str; 6] = ["a", "b", "c", "+", "*", "f"];

impl RandomGrammar {
    /// Every nonterminal is reachable from `<s0>` and has a
    /// terminal-only first rule, so derivations can always finish.
    pub fn generate<R: Rng>(rng: &mut R) -> RandomGrammar {
        let n = rng.gen_range(1..=4);
        let mut productions: Vec<Vec<Vec<Sym>>> = Vec::with_capacity(n);
        for _ in 0..n {
            let mut rules = vec![terminals(rng, 1..=2)];
            for _ in 0..rng.gen_range(0..=2) {
                let len = rng.gen_range(1..=3);
                let body = (0..len)
                    .map(|_| {
                        if rng.gen_bool(0.5) {
                            Sym::N(rng.gen_range(0..n))
                        } else {
                            Sym::T(TERMINALS.choose(rng).unwrap().to_string())
                        }
                    })
                    .collect();
                rules.push(body);
            }
            productions.push(rules);
        }
        for i in 1..n {
            let parent = rng.gen_range(0..i);
            let mut body = terminals(rng, 0..=1);
            body.insert(rng.gen_range(0..=body.len()), Sym::N(i));
            productions[parent].push(body);
        }
        let probabilities = productions
            .iter()
            .map(|rules| {
                let w: Vec<f64> = rules.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.iter().map(|x| x / s).collect()
            })
            .collect();
        RandomGrammar {
            productions,
            probabilities,
        }
    }

    pub fn name(i: usize) -> String {
        format!("<s{i}>")
    }

    pub fn to_bnf(&self) -> String {
        let mut out = String::new();
        for (i, rules) in self.productions.iter().enumerate() {
            let bodies: Vec<String> = rules
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|s| match s {
                            Sym::T(t) => t.clone(),
                            Sym::N(j) => Self::name(*j),
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            let probs: Vec<String> = self.probabilities[i].iter().map(|p| format!("{p:.17}")).collect();
            out.push_str(&format!("{} ::= {} || probs [{}]\n", Self::name(i), bodies.join(" | "), probs.join(", ")));
        }
        out
    }

    pub fn parse(&self) -> Grammar {
        Grammar::parse(&self.to_bnf(), &ParseOptions::default()).expect("generated grammar is valid")
    }

    /// Global number (0-based) of the first rule of each nonterminal.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.productions
            .iter()
            .map(|r| {
                let o = acc;
                acc += r.len();
                o
            })
            .collect()
    }

    pub fn action_count(&self) -> usize {
        self.productions.iter().map(Vec::len).sum()
    }
}

fn terminals<R: Rng>(rng: &mut R, len: std::ops::RangeInclusive<usize>) -> Vec<Sym> {
    let n = rng.gen_range(len);
    (0..n).map(|_| Sym::T(TERMINALS.choose(rng).unwrap().to_string())).collect()
}

/// Sentential-form rewriting: always expand the leftmost nonterminal.
pub struct LeftmostOracle<'a> {
    pub grammar: &'a RandomGrammar,
    pub form: Vec<Sym>,
}

impl<'a> LeftmostOracle<'a> {
    pub fn new(grammar: &'a RandomGrammar) -> Self {
        LeftmostOracle {
            grammar,
            form: vec![Sym::N(0)],
        }
    }

    pub fn leftmost(&self) -> Option<(usize, usize)> {
        self.form.iter().enumerate().find_map(|(pos, s)| match s {
            Sym::N(i) => Some((pos, *i)),
            Sym::T(_) => None,
        })
    }

    /// Expand the leftmost nonterminal with its `rule`-th alternative and
    /// return the global action index.
    pub fn expand(&mut self, rule: usize) -> usize {
        let (pos, nt) = self.leftmost().expect("form has a nonterminal");
        let body = self.grammar.productions[nt][rule].clone();
        self.form.splice(pos..=pos, body);
        self.grammar.offsets()[nt] + rule
    }

    pub fn text(&self) -> String {
        self.form
            .iter()
            .map(|s| match s {
                Sym::T(t) => t.clone(),
                Sym::N(i) => RandomGrammar::name(*i),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}
