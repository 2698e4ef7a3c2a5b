//! Text formats: flow-spec files, partition literals, and set literals.
//!
//! Flow-spec files hold one flow per line:
//!
//! ```text
//! flow 1 -> 5 : {1} k=1 ; {2} k=2 ; {3} k=inf
//! ```
//!
//! Hop sets are brace-enclosed comma-separated node ids, delays follow
//! `k=`, `inf` marks the infinite terminal delay. Partitions render as
//! `({3,4},{},{2},{1})` and may be prefixed `L d=<dest> :` in partition
//! files. All parsing is whitespace-insensitive; `#` starts a comment.

use thiserror::Error;

use crate::flow::{Delay, Flow, FlowSet, Hop};
use crate::node::{NodeId, NodeSet};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Malformed(String),
}

fn err(line: usize, message: impl Into<String>) -> TextError {
    TextError::Parse {
        line,
        message: message.into(),
    }
}

/// Character-level cursor over one logical line, skipping whitespace.
struct Cursor<'a> {
    rest: &'a str,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Cursor { rest: text, line }
    }

    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start();
    }

    fn eat(&mut self, token: &str) -> Result<(), TextError> {
        self.skip_ws();
        if let Some(rest) = self.rest.strip_prefix(token) {
            self.rest = rest;
            Ok(())
        } else {
            Err(err(
                self.line,
                format!("expected `{token}` before `{}`", self.preview()),
            ))
        }
    }

    fn try_eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if let Some(rest) = self.rest.strip_prefix(token) {
            self.rest = rest;
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<u64, TextError> {
        self.skip_ws();
        let digits: String = self.rest.chars().take_while(|c| c.is_ascii_digit()).collect();
        if digits.is_empty() {
            return Err(err(
                self.line,
                format!("expected a number before `{}`", self.preview()),
            ));
        }
        self.rest = &self.rest[digits.len()..];
        digits
            .parse()
            .map_err(|_| err(self.line, "number out of range"))
    }

    fn node(&mut self) -> Result<NodeId, TextError> {
        let n = self.number()?;
        u32::try_from(n)
            .map(NodeId)
            .map_err(|_| err(self.line, "node id out of range"))
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.rest.is_empty()
    }

    fn expect_end(&mut self) -> Result<(), TextError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(err(
                self.line,
                format!("trailing input `{}`", self.preview()),
            ))
        }
    }

    fn preview(&self) -> String {
        self.rest.chars().take(16).collect()
    }

    /// `{1,2,3}` or `{}`.
    fn node_set(&mut self) -> Result<NodeSet, TextError> {
        self.eat("{")?;
        let mut set = NodeSet::new();
        if self.try_eat("}") {
            return Ok(set);
        }
        loop {
            let n = self.node()?;
            if !set.insert(n) {
                return Err(err(self.line, format!("duplicate node {n} in set")));
            }
            if self.try_eat("}") {
                return Ok(set);
            }
            self.eat(",")?;
        }
    }

    fn delay(&mut self) -> Result<Delay, TextError> {
        self.eat("k")?;
        self.eat("=")?;
        if self.try_eat("inf") {
            Ok(Delay::Infinite)
        } else {
            Ok(Delay::Finite(self.number()?))
        }
    }
}

/// Parse one `flow <s> -> <d> : {..} k=.. ; ..` line.
pub fn parse_flow_line(text: &str, line: usize) -> Result<Flow, TextError> {
    let mut c = Cursor::new(text, line);
    c.eat("flow")?;
    let source = c.node()?;
    c.eat("->")?;
    let destination = c.node()?;
    c.eat(":")?;
    let mut hops = Vec::new();
    loop {
        let nodes = c.node_set()?;
        let delay = c.delay()?;
        hops.push(Hop::new(nodes, delay));
        if !c.try_eat(";") {
            break;
        }
    }
    c.expect_end()?;
    Ok(Flow {
        source,
        destination,
        hops,
    })
}

/// Parse a whole flow-spec file (blank lines and `#` comments ignored).
pub fn parse_flow_file(text: &str) -> Result<FlowSet, TextError> {
    let mut set = FlowSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let flow = parse_flow_line(content, line)?;
        set.insert(flow)
            .map_err(|e| err(line, e.to_string()))?;
    }
    Ok(set)
}

/// Parse a `{1,2}` set literal (used for `-S` on the command line).
pub fn parse_set_literal(text: &str) -> Result<NodeSet, TextError> {
    let mut c = Cursor::new(text, 1);
    let set = c.node_set()?;
    c.expect_end()?;
    Ok(set)
}

/// Parse a `({3,4},{},{2},{1})` partition literal into ordered layer sets.
pub fn parse_partition_literal(text: &str) -> Result<Vec<NodeSet>, TextError> {
    let mut c = Cursor::new(text, 1);
    c.eat("(")?;
    let mut layers = Vec::new();
    if c.try_eat(")") {
        c.expect_end()?;
        return Ok(layers);
    }
    loop {
        layers.push(c.node_set()?);
        if c.try_eat(")") {
            break;
        }
        c.eat(",")?;
    }
    c.expect_end()?;
    Ok(layers)
}

/// Parse a `L d=<dest> : (<layers>)` partition-file line.
pub fn parse_partition_line(text: &str, line: usize) -> Result<(NodeId, Vec<NodeSet>), TextError> {
    let mut c = Cursor::new(text, line);
    c.eat("L")?;
    c.eat("d")?;
    c.eat("=")?;
    let dest = c.node()?;
    c.eat(":")?;
    let layers = parse_partition_literal(c.rest.trim())?;
    Ok((dest, layers))
}

/// Parse a one-line partition file (comments and blanks ignored).
pub fn parse_partition_file(text: &str) -> Result<(NodeId, Vec<NodeSet>), TextError> {
    for (idx, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        return parse_partition_line(content, idx + 1);
    }
    Err(TextError::Malformed(
        "partition file contains no partition line".to_string(),
    ))
}

/// Parse a sum of mutual-information terms in the constraint rendering
/// format: `I(X{3};Y5) + I(X{2};Y5|X{3,4})`.
pub fn parse_terms(text: &str) -> Result<Vec<crate::region::MiTerm>, TextError> {
    let mut c = Cursor::new(text, 1);
    let mut terms = Vec::new();
    loop {
        c.eat("I")?;
        c.eat("(")?;
        c.eat("X")?;
        let fresh = c.node_set()?;
        c.eat(";")?;
        c.eat("Y")?;
        let dest = c.node()?;
        let given = if c.try_eat("|") {
            c.eat("X")?;
            c.node_set()?
        } else {
            NodeSet::new()
        };
        c.eat(")")?;
        terms.push(crate::region::MiTerm::new(fresh, given, dest));
        if !c.try_eat("+") {
            break;
        }
    }
    c.expect_end()?;
    Ok(terms)
}

/// Parse the hop-sequence body `{1} k=1 ; {2} k=inf` on its own (used for
/// structured expectations in the fixture catalog).
pub fn parse_hops(text: &str) -> Result<Vec<Hop>, TextError> {
    let mut c = Cursor::new(text, 1);
    let mut hops = Vec::new();
    loop {
        let nodes = c.node_set()?;
        let delay = c.delay()?;
        hops.push(Hop::new(nodes, delay));
        if !c.try_eat(";") {
            break;
        }
    }
    c.expect_end()?;
    Ok(hops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::node::{nodes, render_set};

    #[test]
    fn parse_and_render_round_trip() {
        let line = "flow 1 -> 5 : {1} k=1 ; {2} k=2 ; {3} k=inf";
        let flow = parse_flow_line(line, 1).unwrap();
        assert_eq!(flow.to_string(), line);
    }

    #[test]
    fn whitespace_insensitive() {
        let a = parse_flow_line("flow 1 -> 3 : {1} k=1 ; {2} k=inf", 1).unwrap();
        let b = parse_flow_line("flow  1->3:{ 1 }k = 1;{2}  k=inf", 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn comments_and_blanks_skipped() {
        let set = parse_flow_file(
            "# diamond\n\
             \n\
             flow 1 -> 5 : {1} k=1 ; {2} k=2 ; {3} k=inf  # long branch\n\
             flow 2 -> 5 : {2} k=1 ; {4} k=inf\n",
        )
        .unwrap();
        assert_eq!(set.sources(), nodes([1, 2]));
    }

    #[test]
    fn partition_literal_round_trip() {
        let layers = parse_partition_literal("({3,4},{},{2},{1})").unwrap();
        assert_eq!(layers.len(), 4);
        assert_eq!(layers[0], nodes([3, 4]));
        assert!(layers[1].is_empty());
        let rendered: Vec<String> = layers.iter().map(render_set).collect();
        assert_eq!(format!("({})", rendered.join(",")), "({3,4},{},{2},{1})");
    }

    #[test]
    fn partition_line_carries_destination() {
        let (d, layers) = parse_partition_line("L d=5 : ({3},{4},{2},{1})", 1).unwrap();
        assert_eq!(d, NodeId(5));
        assert_eq!(layers.len(), 4);
    }

    #[test]
    fn set_literal() {
        assert_eq!(parse_set_literal("{2}").unwrap(), nodes([2]));
        assert_eq!(parse_set_literal("{}").unwrap(), NodeSet::new());
        assert_eq!(parse_set_literal(" { 1 , 2 } ").unwrap(), nodes([1, 2]));
        assert!(parse_set_literal("{1,1}").is_err());
        assert!(parse_set_literal("{1} extra").is_err());
    }

    #[test]
    fn term_lists_round_trip_through_the_renderer() {
        let text = "I(X{3};Y5) + I(X{2};Y5|X{3,4})";
        let terms = parse_terms(text).unwrap();
        let rendered: Vec<String> = terms.iter().map(|t| t.to_string()).collect();
        assert_eq!(rendered.join(" + "), text);
        assert!(parse_terms("I(X{1};Y2").is_err());
    }

    #[test]
    fn malformed_lines_report_position() {
        let e = parse_flow_file("flow 1 -> 3 : {1} k=\n").unwrap_err();
        assert!(matches!(e, TextError::Parse { line: 1, .. }));
        let e = parse_flow_file("flow 1 -> 1 : {1} k=inf\n").unwrap_err();
        assert!(e.to_string().contains("equal source and destination"));
    }

    proptest::proptest! {
        #[test]
        fn rendered_flows_reparse(
            src in 1u32..6,
            mid in 6u32..9,
            k in 1u64..4,
        ) {
            let flow = Flow {
                source: NodeId(src),
                destination: NodeId(9),
                hops: vec![
                    Hop::new(nodes([src]), Delay::Finite(k)),
                    Hop::new(nodes([mid]), Delay::Infinite),
                ],
            };
            let reparsed = parse_flow_line(&flow.to_string(), 1).unwrap();
            proptest::prop_assert_eq!(flow, reparsed);
        }
    }
}
