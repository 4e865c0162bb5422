//! Newick reading and label quoting.
//!
//! Accepted grammar: an optional `[&R]` or `[&U]` comment, then
//! `subtree ;` where a subtree is a leaf label or a parenthesized list,
//! each optionally followed by an internal label and `:length`. Other
//! `[...]` comments are skipped. Internal labels are discarded.

use super::{ClusterError, DendroTree, TreeNode};

const SPECIAL: &[char] = &['(', ')', '[', ']', '\'', ':', ';', ','];

pub(super) fn quote_label(label: &str) -> String {
    if label.is_empty() || label.chars().any(|c| c.is_whitespace() || SPECIAL.contains(&c)) {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    nodes: Vec<TreeNode>,
    leaves: Vec<usize>,
    labels: Vec<String>,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> ClusterError {
        ClusterError::Newick {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    /// Skips whitespace and comments; returns the text of the first comment.
    fn skip_trivia(&mut self) -> Result<Option<&'a str>, ClusterError> {
        let mut first = None;
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('[') => {
                    let start = self.pos + 1;
                    let end = self.src[start..]
                        .find(']')
                        .ok_or_else(|| self.err("unterminated comment"))?;
                    first.get_or_insert(&self.src[start..start + end]);
                    self.pos = start + end + 1;
                }
                _ => return Ok(first),
            }
        }
    }

    fn label(&mut self) -> Result<Option<String>, ClusterError> {
        self.skip_trivia()?;
        if self.peek() == Some('\'') {
            self.bump();
            let mut s = String::new();
            loop {
                match self.bump() {
                    Some('\'') if self.peek() == Some('\'') => {
                        self.bump();
                        s.push('\'');
                    }
                    Some('\'') => return Ok(Some(s)),
                    Some(c) => s.push(c),
                    None => return Err(self.err("unterminated quoted label")),
                }
            }
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || SPECIAL.contains(&c) {
                break;
            }
            self.bump();
        }
        Ok((self.pos > start).then(|| self.src[start..self.pos].to_string()))
    }

    fn length(&mut self) -> Result<f64, ClusterError> {
        self.skip_trivia()?;
        if self.peek() != Some(':') {
            return Ok(0.0);
        }
        self.bump();
        self.skip_trivia()?;
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '+')) {
            self.bump();
        }
        let text = &self.src[start..self.pos];
        let bad = |message: String| ClusterError::Newick { offset: start, message };
        let value: f64 = text.parse().map_err(|_| bad(format!("bad branch length `{text}`")))?;
        if !value.is_finite() {
            return Err(bad(format!("branch length `{text}` is not finite")));
        }
        Ok(value)
    }

    fn subtree(&mut self, depth: usize) -> Result<usize, ClusterError> {
        if depth > 10_000 {
            return Err(self.err("nesting too deep"));
        }
        self.skip_trivia()?;
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            parent: None,
            children: Vec::new(),
            branch_length: 0.0,
            label: None,
        });
        if self.peek() == Some('(') {
            self.bump();
            loop {
                let child = self.subtree(depth + 1)?;
                self.nodes[child].parent = Some(id);
                self.nodes[id].children.push(child);
                self.skip_trivia()?;
                match self.bump() {
                    Some(',') => continue,
                    Some(')') => break,
                    _ => return Err(self.err("expected `,` or `)`")),
                }
            }
            self.label()?;
        } else {
            let label = self.label()?.ok_or_else(|| self.err("expected a leaf label or `(`"))?;
            if self.labels.contains(&label) {
                return Err(self.err(format!("duplicate leaf label `{label}`")));
            }
            self.labels.push(label.clone());
            self.leaves.push(id);
            self.nodes[id].label = Some(label);
        }
        self.nodes[id].branch_length = self.length()?;
        Ok(id)
    }
}

/// Parses one tree. Rootedness comes from a leading `[&R]`; otherwise the
/// tree is unrooted.
pub fn parse_newick(text: &str) -> Result<DendroTree, ClusterError> {
    let mut p = Parser {
        src: text,
        pos: 0,
        nodes: Vec::new(),
        leaves: Vec::new(),
        labels: Vec::new(),
    };
    let rooted = matches!(p.skip_trivia()?, Some(c) if c.eq_ignore_ascii_case("&R"));
    let root = p.subtree(0)?;
    p.nodes[root].branch_length = 0.0;
    p.skip_trivia()?;
    if p.bump() != Some(';') {
        return Err(p.err("expected `;`"));
    }
    p.skip_trivia()?;
    if p.pos != text.len() {
        return Err(p.err("trailing content after `;`"));
    }
    Ok(DendroTree::assemble(p.nodes, root, rooted, p.leaves, p.labels, 0))
}
