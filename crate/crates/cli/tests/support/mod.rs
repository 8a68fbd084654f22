//! Helpers shared by the CLI test targets.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

/// Node ids and edges found by [`check_dot`].
#[derive(Debug, Default)]
pub struct DotGraph {
    pub directed: bool,
    pub nodes: BTreeSet<String>,
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Id(String),
    Punct(char),
    EdgeOp(&'static str),
}

fn tokenize(text: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err("unterminated string".into()),
                    Some('"') => break,
                    Some('\\') if chars.get(i + 1).is_some() => {
                        if chars[i + 1] != '"' {
                            s.push('\\');
                        }
                        s.push(chars[i + 1]);
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            i += 1;
            out.push(Tok::Id(s));
        } else if c == '-' && matches!(chars.get(i + 1), Some('-') | Some('>')) {
            out.push(Tok::EdgeOp(if chars[i + 1] == '-' { "--" } else { "->" }));
            i += 2;
        } else if "{}[]=;,".contains(c) {
            out.push(Tok::Punct(c));
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' || !c.is_ascii() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || !chars[i].is_ascii()) {
                i += 1;
            }
            out.push(Tok::Id(chars[start..i].iter().collect()));
        } else if c.is_ascii_digit() || c == '.' || c == '-' {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let num: String = chars[start..i].iter().collect();
            if num.matches('.').count() > 1 || num == "-" || num == "." {
                return Err(format!("bad numeral {num:?}"));
            }
            out.push(Tok::Id(num));
        } else {
            return Err(format!("unexpected character {c:?}"));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    graph: DotGraph,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, c: char) -> Result<(), String> {
        match self.next() {
            Some(Tok::Punct(p)) if p == c => Ok(()),
            other => Err(format!("expected {c:?}, found {other:?}")),
        }
    }

    fn id(&mut self) -> Result<String, String> {
        match self.next() {
            Some(Tok::Id(s)) => Ok(s),
            other => Err(format!("expected an id, found {other:?}")),
        }
    }

    fn attr_lists(&mut self) -> Result<(), String> {
        while self.peek() == Some(&Tok::Punct('[')) {
            self.next();
            while self.peek() != Some(&Tok::Punct(']')) {
                self.id()?;
                self.expect('=')?;
                self.id()?;
                if matches!(self.peek(), Some(Tok::Punct(';')) | Some(Tok::Punct(','))) {
                    self.next();
                }
            }
            self.expect(']')?;
        }
        Ok(())
    }

    fn stmt(&mut self) -> Result<(), String> {
        let first = self.id()?;
        if ["graph", "node", "edge"].contains(&first.to_ascii_lowercase().as_str())
            && self.peek() == Some(&Tok::Punct('['))
        {
            return self.attr_lists();
        }
        if self.peek() == Some(&Tok::Punct('=')) {
            self.next();
            self.id()?;
            return Ok(());
        }
        let op = if self.graph.directed { "->" } else { "--" };
        let mut prev = first.clone();
        self.graph.nodes.insert(first);
        while let Some(Tok::EdgeOp(found)) = self.peek().cloned() {
            if found != op {
                return Err(format!("edge operator {found} in a graph expecting {op}"));
            }
            self.next();
            let target = self.id()?;
            self.graph.nodes.insert(target.clone());
            self.graph.edges.push((prev, target.clone()));
            prev = target;
        }
        self.attr_lists()
    }
}

/// Checks `text` against the DOT language grammar (without subgraphs or
/// ports, which the exporters never emit).
pub fn check_dot(text: &str) -> Result<DotGraph, String> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
        graph: DotGraph::default(),
    };
    let mut head = p.id()?;
    if head.eq_ignore_ascii_case("strict") {
        head = p.id()?;
    }
    p.graph.directed = match head.to_ascii_lowercase().as_str() {
        "graph" => false,
        "digraph" => true,
        _ => return Err(format!("expected graph or digraph, found {head:?}")),
    };
    if matches!(p.peek(), Some(Tok::Id(_))) {
        p.next();
    }
    p.expect('{')?;
    while p.peek() != Some(&Tok::Punct('}')) {
        if p.peek().is_none() {
            return Err("missing closing brace".into());
        }
        p.stmt()?;
        if p.peek() == Some(&Tok::Punct(';')) {
            p.next();
        }
    }
    p.expect('}')?;
    if p.pos != p.toks.len() {
        return Err("trailing tokens after the graph".into());
    }
    Ok(p.graph)
}

/// Every file below `root`, keyed by its path relative to `root`.
pub fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn dot_checker_self_test() -> Result<(), String> {
    let g = check_dot("graph g { a -- b [weight=\"0.5\"]; c [label=\"x\\\"y\"]; layout=neato; }")?;
    if g.nodes.len() != 3 || g.edges.len() != 1 {
        return Err("self test: wrong node or edge count".into());
    }
    for bad in ["graph { a -- }", "graph g { a -> b }", "digraph { a -- b }", "graph { a [x=] }", "graph { a"] {
        if check_dot(bad).is_ok() {
            return Err(format!("self test accepted {bad:?}"));
        }
    }
    Ok(())
}
