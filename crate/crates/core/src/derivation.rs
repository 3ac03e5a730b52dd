//! Leftmost derivation state machine.
//!
//! A [`DerivationState`] holds the partial parse tree, the queue of pending
//! nonterminal nodes (front = next to expand) and the trajectory of actions
//! taken so far. Expanding a node pushes its nonterminal children at the
//! front of the queue in body order, which yields a depth-first, leftmost
//! derivation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{parse_expression, Expr, ExprParseError};
use crate::grammar::{ActionId, Grammar, GrammarError, Mask, SymbolId, Token};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DerivationError {
    #[error("action {action} is not legal for symbol {symbol}")]
    MaskedAction { action: ActionId, symbol: String },
    #[error("derivation is already complete")]
    Complete,
    #[error("derivation is incomplete")]
    Incomplete,
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("derived text does not parse: {0}")]
    Parse(#[from] ExprParseError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Child {
    Terminal(String),
    Node(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub symbol: SymbolId,
    pub action: Option<ActionId>,
    pub parent: Option<usize>,
    pub children: Vec<Child>,
}

/// Which observation components are fed to the policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateToggles {
    pub parent: bool,
    pub siblings: bool,
    pub past: bool,
    pub depth: bool,
    pub symbol: bool,
}

impl Default for StateToggles {
    fn default() -> Self {
        StateToggles {
            parent: true,
            siblings: true,
            past: true,
            depth: true,
            symbol: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationShape {
    pub past_window: usize,
    pub sibling_window: usize,
}

impl Default for ObservationShape {
    fn default() -> Self {
        ObservationShape {
            past_window: 10,
            sibling_window: 4,
        }
    }
}

/// What the policy sees at one step. `None` entries are the null token.
#[derive(Clone, Debug, PartialEq)]
pub struct StateObservation {
    pub past_actions: Vec<Option<ActionId>>,
    pub parent_action: Option<ActionId>,
    pub sibling_actions: Vec<Option<ActionId>>,
    pub depth: usize,
    /// `None` when the symbol component is switched off.
    pub symbol: Option<SymbolId>,
    pub mask: Mask,
    pub toggles: StateToggles,
}

impl StateObservation {
    pub fn symbol_one_hot(&self, nonterminal_count: usize) -> Vec<f64> {
        let mut v = vec![0.0; nonterminal_count];
        if let Some(s) = self.symbol {
            v[s.0] = 1.0;
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivationState {
    trajectory: Vec<ActionId>,
    /// Pending nodes; the last element is the queue front.
    stack: Vec<usize>,
    nodes: Vec<Node>,
}

impl DerivationState {
    /// A single unexpanded root holding the start symbol.
    pub fn new(g: &Grammar) -> DerivationState {
        DerivationState {
            trajectory: Vec::new(),
            stack: vec![0],
            nodes: vec![Node {
                symbol: g.start_symbol(),
                action: None,
                parent: None,
                children: Vec::new(),
            }],
        }
    }

    pub fn trajectory(&self) -> &[ActionId] {
        &self.trajectory
    }

    pub fn depth(&self) -> usize {
        self.trajectory.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn is_complete(&self) -> bool {
        self.stack.is_empty()
    }

    /// Pending node ids, front first.
    pub fn queue(&self) -> Vec<usize> {
        self.stack.iter().rev().copied().collect()
    }

    pub fn front(&self) -> Option<usize> {
        self.stack.last().copied()
    }

    pub fn current_symbol(&self) -> Option<SymbolId> {
        self.front().map(|n| self.nodes[n].symbol)
    }

    pub fn current_mask(&self, g: &Grammar) -> Option<Mask> {
        self.current_symbol().map(|s| g.action_mask(s).expect("tree symbols come from g"))
    }

    /// Expand the queue-front node with rule `a`.
    pub fn apply(&mut self, g: &Grammar, a: ActionId) -> Result<(), DerivationError> {
        let node_id = self.front().ok_or(DerivationError::Complete)?;
        let symbol = self.nodes[node_id].symbol;
        if !g.production(symbol).contains(&a.0) {
            return Err(DerivationError::MaskedAction {
                action: a,
                symbol: g.symbol_name(symbol).to_string(),
            });
        }
        self.stack.pop();
        let rule = g.rule(a)?;
        let mut children = Vec::with_capacity(rule.body.len());
        let mut new_nodes = Vec::new();
        for t in &rule.body {
            match t {
                Token::Terminal(s) => children.push(Child::Terminal(s.clone())),
                Token::Nonterminal(s) => {
                    let id = self.nodes.len();
                    self.nodes.push(Node {
                        symbol: *s,
                        action: None,
                        parent: Some(node_id),
                        children: Vec::new(),
                    });
                    children.push(Child::Node(id));
                    new_nodes.push(id);
                }
            }
        }
        self.stack.extend(new_nodes.into_iter().rev());
        let node = &mut self.nodes[node_id];
        node.action = Some(a);
        node.children = children;
        self.trajectory.push(a);
        Ok(())
    }

    /// Replay a whole action sequence from the start symbol.
    pub fn replay(g: &Grammar, actions: &[ActionId]) -> Result<DerivationState, DerivationError> {
        let mut s = DerivationState::new(g);
        for &a in actions {
            s.apply(g, a)?;
        }
        Ok(s)
    }

    /// Observation for the queue-front node.
    pub fn observation(
        &self,
        g: &Grammar,
        shape: &ObservationShape,
        toggles: StateToggles,
    ) -> Result<StateObservation, DerivationError> {
        let node_id = self.front().ok_or(DerivationError::Complete)?;
        let node = &self.nodes[node_id];

        let past_actions = if toggles.past {
            left_padded(&self.trajectory, shape.past_window)
        } else {
            vec![None; shape.past_window]
        };

        let parent_action = match (toggles.parent, node.parent) {
            (true, Some(p)) => self.nodes[p].action,
            _ => None,
        };

        let sibling_actions = match (toggles.siblings, node.parent) {
            (true, Some(p)) => {
                let done: Vec<ActionId> = self.nodes[p]
                    .children
                    .iter()
                    .filter_map(|c| match c {
                        Child::Node(id) if *id != node_id => self.nodes[*id].action,
                        _ => None,
                    })
                    .collect();
                left_padded(&done, shape.sibling_window)
            }
            _ => vec![None; shape.sibling_window],
        };

        Ok(StateObservation {
            past_actions,
            parent_action,
            sibling_actions,
            depth: if toggles.depth { self.depth() } else { 0 },
            symbol: toggles.symbol.then_some(node.symbol),
            mask: g.action_mask(node.symbol)?,
            toggles,
        })
    }

    /// Terminals of the tree in order, joined by single spaces. Pending
    /// nonterminals print as their names.
    pub fn text(&self, g: &Grammar) -> String {
        let mut out = Vec::new();
        self.collect_text(g, 0, &mut out);
        out.join(" ")
    }

    fn collect_text(&self, g: &Grammar, id: usize, out: &mut Vec<String>) {
        let node = &self.nodes[id];
        if node.action.is_none() {
            out.push(g.symbol_name(node.symbol).to_string());
            return;
        }
        for c in &node.children {
            match c {
                Child::Terminal(s) => out.push(s.clone()),
                Child::Node(n) => self.collect_text(g, *n, out),
            }
        }
    }

    /// The finished expression, with `x.name` references resolved against
    /// `feature_names`.
    pub fn to_expression(&self, g: &Grammar, feature_names: &[String]) -> Result<Expr, DerivationError> {
        if !self.is_complete() {
            return Err(DerivationError::Incomplete);
        }
        Ok(parse_expression(&self.text(g), feature_names)?)
    }

    /// Check that every expanded node used a rule of its own symbol and
    /// that its children match the rule body.
    pub fn audit(&self, g: &Grammar) -> Result<(), String> {
        for (i, node) in self.nodes.iter().enumerate() {
            let Some(a) = node.action else { continue };
            if !g.production(node.symbol).contains(&a.0) {
                return Err(format!(
                    "node {i} ({}) expanded with foreign action {a}",
                    g.symbol_name(node.symbol)
                ));
            }
            let rule = g.rule(a).map_err(|e| e.to_string())?;
            if rule.body.len() != node.children.len() {
                return Err(format!("node {i} has {} children for a {}-token rule", node.children.len(), rule.body.len()));
            }
            for (t, c) in rule.body.iter().zip(&node.children) {
                let ok = match (t, c) {
                    (Token::Terminal(a), Child::Terminal(b)) => a == b,
                    (Token::Nonterminal(s), Child::Node(n)) => {
                        self.nodes[*n].symbol == *s && self.nodes[*n].parent == Some(i)
                    }
                    _ => false,
                };
                if !ok {
                    return Err(format!("node {i} children do not match rule {a}"));
                }
            }
        }
        Ok(())
    }
}

fn left_padded(items: &[ActionId], width: usize) -> Vec<Option<ActionId>> {
    let take = items.len().min(width);
    let mut out = vec![None; width - take];
    out.extend(items[items.len() - take..].iter().copied().map(Some));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::grammar::ParseOptions;

    fn toy() -> Grammar {
        Grammar::parse(builtin::TOY, &ParseOptions::default()).unwrap()
    }

    fn a(n: usize) -> ActionId {
        ActionId::from_number(n)
    }

    #[test]
    fn init_state() {
        let g = toy();
        let s = DerivationState::new(&g);
        assert_eq!(g.symbol_name(s.current_symbol().unwrap()), "<exp>");
        assert_eq!(s.current_mask(&g).unwrap().count_allowed(), 2);
        assert_eq!(s.queue().len(), 1);
        assert_eq!(s.depth(), 0);
        assert!(!s.is_complete());
    }

    #[test]
    fn walkthrough_trajectory() {
        let g = toy();
        let mut s = DerivationState::new(&g);
        s.apply(&g, a(2)).unwrap();
        assert_eq!(s.trajectory(), &[a(2)]);
        assert_eq!(g.symbol_name(s.current_symbol().unwrap()), "<b>");
        assert_eq!(s.queue().len(), 1);

        s.apply(&g, a(5)).unwrap();
        let q = s.queue();
        assert_eq!(q.len(), 2);
        assert!(q.iter().all(|&n| g.symbol_name(s.nodes()[n].symbol) == "<i>"));
        assert!(q[0] < q[1], "leftmost child is at the front");

        // x[9] is action 15, x[1] action 7.
        s.apply(&g, a(15)).unwrap();
        s.apply(&g, a(7)).unwrap();
        assert!(s.is_complete());
        assert_eq!(s.depth(), 4);
        let e = s.to_expression(&g, &[]).unwrap();
        assert_eq!(e.to_string(), "(x[9] + x[1])");
        s.audit(&g).unwrap();
    }

    #[test]
    fn sibling_slot_sees_resolved_left_sibling() {
        let g = toy();
        let s = DerivationState::replay(&g, &[a(2), a(5), a(15)]).unwrap();
        let obs = s.observation(&g, &ObservationShape::default(), StateToggles::default()).unwrap();
        assert_eq!(obs.parent_action, Some(a(5)));
        assert_eq!(obs.sibling_actions, vec![None, None, None, Some(a(15))]);

        // The first <i> has no expanded sibling yet.
        let s = DerivationState::replay(&g, &[a(2), a(5)]).unwrap();
        let obs = s.observation(&g, &ObservationShape::default(), StateToggles::default()).unwrap();
        assert_eq!(obs.sibling_actions, vec![None; 4]);
    }

    #[test]
    fn root_observation_and_padding() {
        let g = toy();
        let shape = ObservationShape {
            past_window: 5,
            sibling_window: 4,
        };
        let s = DerivationState::new(&g);
        let obs = s.observation(&g, &shape, StateToggles::default()).unwrap();
        assert_eq!(obs.parent_action, None);
        assert_eq!(obs.sibling_actions, vec![None; 4]);
        assert_eq!(obs.past_actions, vec![None; 5]);

        let s = DerivationState::replay(&g, &[a(1), a(3), a(6)]).unwrap();
        let obs = s.observation(&g, &shape, StateToggles::default()).unwrap();
        assert_eq!(obs.past_actions, vec![None, None, Some(a(1)), Some(a(3)), Some(a(6))]);
        assert_eq!(obs.depth, 3);
    }

    #[test]
    fn toggles_null_out_fields() {
        let g = toy();
        let s = DerivationState::replay(&g, &[a(2), a(5), a(15)]).unwrap();
        let off = StateToggles {
            parent: false,
            siblings: false,
            past: false,
            depth: false,
            symbol: false,
        };
        let obs = s.observation(&g, &ObservationShape::default(), off).unwrap();
        assert_eq!(obs.parent_action, None);
        assert!(obs.sibling_actions.iter().all(Option::is_none));
        assert!(obs.past_actions.iter().all(Option::is_none));
        assert_eq!(obs.depth, 0);
        assert_eq!(obs.symbol, None);
        assert!(obs.symbol_one_hot(4).iter().all(|&v| v == 0.0));
        assert_eq!(obs.mask.count_allowed(), 10);
    }

    #[test]
    fn errors() {
        let g = toy();
        let mut s = DerivationState::new(&g);
        assert!(matches!(s.apply(&g, a(5)), Err(DerivationError::MaskedAction { .. })));
        assert!(matches!(s.to_expression(&g, &[]), Err(DerivationError::Incomplete)));
        let mut s = DerivationState::replay(&g, &[a(2), a(5), a(7), a(8)]).unwrap();
        assert!(matches!(s.apply(&g, a(1)), Err(DerivationError::Complete)));
        assert!(s.observation(&g, &ObservationShape::default(), StateToggles::default()).is_err());
    }

    #[test]
    fn single_rule_grammar() {
        let g = Grammar::parse("<s> ::= x[1]", &ParseOptions::default()).unwrap();
        let s = DerivationState::replay(&g, &[ActionId(0)]).unwrap();
        assert!(s.is_complete());
        assert_eq!(s.to_expression(&g, &[]).unwrap().to_string(), "x[1]");
    }

    #[test]
    fn function_application_path() {
        let g = Grammar::parse(builtin::NGUYEN, &ParseOptions::with_nvar(1)).unwrap();
        let e = g.symbol("e").unwrap();
        let sop = g.symbol("sop").unwrap();
        let et = g.symbol("et").unwrap();
        let varidx = g.symbol("varidx").unwrap();
        let pick = |s: SymbolId, k: usize| ActionId(g.production(s).start + k);
        // <e> -> <sop>(<e>), <sop> -> cos, <e> -> <et>, <et> -> x[<varidx>], <varidx> -> 1
        let actions = [pick(e, 2), pick(sop, 0), pick(e, 3), pick(et, 1), pick(varidx, 0)];
        let s = DerivationState::replay(&g, &actions).unwrap();
        assert!(s.is_complete());
        assert_eq!(s.text(&g), "cos ( x[ 1 ] )");
        assert_eq!(s.to_expression(&g, &[]).unwrap().to_string(), "cos(x[1])");
    }
}
