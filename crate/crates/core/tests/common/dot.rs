//! Recursive-descent parser for the DOT language (graphs, node, edge and
//! attribute statements, subgraphs), used to check generated output.

use std::collections::BTreeMap;

pub type Attrs = BTreeMap<String, String>;

#[derive(Debug, Default)]
pub struct Graph {
    pub directed: bool,
    pub nodes: BTreeMap<String, Attrs>,
    pub edges: Vec<(String, String, Attrs)>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Id(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Eq,
    Semi,
    Comma,
    Arrow,
    Line,
}

fn lex(src: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '{' => { out.push(Tok::LBrace); i += 1 }
            '}' => { out.push(Tok::RBrace); i += 1 }
            '[' => { out.push(Tok::LBracket); i += 1 }
            ']' => { out.push(Tok::RBracket); i += 1 }
            '=' => { out.push(Tok::Eq); i += 1 }
            ';' => { out.push(Tok::Semi); i += 1 }
            ',' => { out.push(Tok::Comma); i += 1 }
            '-' if chars.get(i + 1) == Some(&'>') => { out.push(Tok::Arrow); i += 2 }
            '-' if chars.get(i + 1) == Some(&'-') => { out.push(Tok::Line); i += 2 }
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '"' => {
                i += 1;
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None => return Err("unterminated string".into()),
                        Some('"') => { i += 1; break }
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some('"') => s.push('"'),
                                Some(&o) => { s.push('\\'); s.push(o) }
                                None => return Err("dangling escape".into()),
                            }
                            i += 2;
                        }
                        Some(&o) => { s.push(o); i += 1 }
                    }
                }
                out.push(Tok::Id(s));
            }
            c if c.is_alphanumeric() || c == '_' || c == '.' || c == '-' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.' || chars[i] == '-') {
                    if chars[i] == '-' && i > start {
                        break;
                    }
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let numeral = word.trim_start_matches('-');
                let is_num = !numeral.is_empty()
                    && numeral.chars().all(|c| c.is_ascii_digit() || c == '.')
                    && numeral.matches('.').count() <= 1;
                let is_ident = word.starts_with(|c: char| c.is_alphabetic() || c == '_')
                    && word.chars().all(|c| c.is_alphanumeric() || c == '_');
                if !is_num && !is_ident {
                    return Err(format!("bad identifier `{word}`"));
                }
                out.push(Tok::Id(word));
            }
            other => return Err(format!("unexpected character `{other}`")),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    graph: Graph,
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

    fn expect(&mut self, t: Tok) -> Result<(), String> {
        match self.next() {
            Some(ref got) if *got == t => Ok(()),
            got => Err(format!("expected {t:?}, got {got:?}")),
        }
    }

    fn id(&mut self) -> Result<String, String> {
        match self.next() {
            Some(Tok::Id(s)) => Ok(s),
            got => Err(format!("expected identifier, got {got:?}")),
        }
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Id(s)) if s.eq_ignore_ascii_case(kw))
    }

    fn attr_list(&mut self) -> Result<Attrs, String> {
        let mut attrs = Attrs::new();
        while self.peek() == Some(&Tok::LBracket) {
            self.next();
            while self.peek() != Some(&Tok::RBracket) {
                let k = self.id()?;
                self.expect(Tok::Eq)?;
                let v = self.id()?;
                attrs.insert(k, v);
                if matches!(self.peek(), Some(Tok::Comma | Tok::Semi)) {
                    self.next();
                }
            }
            self.expect(Tok::RBracket)?;
        }
        Ok(attrs)
    }

    fn stmt_list(&mut self) -> Result<(), String> {
        while self.peek() != Some(&Tok::RBrace) {
            if self.peek().is_none() {
                return Err("unexpected end of input".into());
            }
            self.stmt()?;
            if self.peek() == Some(&Tok::Semi) {
                self.next();
            }
        }
        Ok(())
    }

    fn stmt(&mut self) -> Result<(), String> {
        if self.keyword("graph") || self.keyword("node") || self.keyword("edge") {
            self.next();
            self.attr_list()?;
            return Ok(());
        }
        if self.keyword("subgraph") || self.peek() == Some(&Tok::LBrace) {
            if self.keyword("subgraph") {
                self.next();
                if matches!(self.peek(), Some(Tok::Id(_))) {
                    self.next();
                }
            }
            self.expect(Tok::LBrace)?;
            self.stmt_list()?;
            return self.expect(Tok::RBrace);
        }
        let first = self.id()?;
        if self.peek() == Some(&Tok::Eq) {
            self.next();
            self.id()?;
            return Ok(());
        }
        let mut chain = vec![first];
        while matches!(self.peek(), Some(Tok::Arrow | Tok::Line)) {
            let op = self.next().unwrap();
            if (op == Tok::Arrow) != self.graph.directed {
                return Err("edge operator does not match graph kind".into());
            }
            chain.push(self.id()?);
        }
        let attrs = self.attr_list()?;
        if chain.len() == 1 {
            self.graph.nodes.entry(chain.pop().unwrap()).or_default().extend(attrs);
        } else {
            for w in chain.windows(2) {
                self.graph.edges.push((w[0].clone(), w[1].clone(), attrs.clone()));
            }
        }
        Ok(())
    }
}

pub fn parse(src: &str) -> Result<Graph, String> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        graph: Graph::default(),
    };
    if p.keyword("strict") {
        p.next();
    }
    p.graph.directed = if p.keyword("digraph") {
        true
    } else if p.keyword("graph") {
        false
    } else {
        return Err("expected `graph` or `digraph`".into());
    };
    p.next();
    if matches!(p.peek(), Some(Tok::Id(_))) {
        p.next();
    }
    p.expect(Tok::LBrace)?;
    p.stmt_list()?;
    p.expect(Tok::RBrace)?;
    if p.pos != p.toks.len() {
        return Err("trailing tokens after graph".into());
    }
    Ok(p.graph)
}
