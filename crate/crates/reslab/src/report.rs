//! Structured text reports.
//!
//! A report is a tree of named blocks holding `key = value` lines, rendered
//! with stable ordering so two runs with the same config produce byte
//! identical files. Timing goes to stderr, never in here.

use std::fmt::Write as _;

use crate::csvio::fmt_f64;

#[derive(Clone, Debug)]
pub enum Value {
    Str(String),
    Float(f64),
    Int(i64),
    UInt(u64),
    Bool(bool),
    FloatList(Vec<f64>),
}

impl Value {
    fn render(&self, out: &mut String) {
        match self {
            Value::Str(s) => {
                let _ = write!(out, "\"{}\"", escape(s));
            }
            Value::Float(x) => {
                let _ = write!(out, "{}", fmt_f64(*x));
            }
            Value::Int(n) => {
                let _ = write!(out, "{n}");
            }
            Value::UInt(n) => {
                let _ = write!(out, "{n}");
            }
            Value::Bool(b) => {
                let _ = write!(out, "{b}");
            }
            Value::FloatList(xs) => {
                out.push('[');
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(&fmt_f64(*x));
                }
                out.push(']');
            }
        }
    }
}

fn escape(s: &str) -> String {
    s.chars()
        .flat_map(|c| match c {
            '"' => vec!['\\', '"'],
            '\\' => vec!['\\', '\\'],
            '\n' => vec!['\\', 'n'],
            c => vec![c],
        })
        .collect()
}

enum Item {
    Scalar(String, Value),
    Block(Block),
}

pub struct Block {
    name: String,
    items: Vec<Item>,
}

impl Block {
    pub fn new(name: &str) -> Block {
        Block { name: name.to_string(), items: Vec::new() }
    }

    pub fn str(&mut self, key: &str, v: &str) -> &mut Self {
        self.items.push(Item::Scalar(key.to_string(), Value::Str(v.to_string())));
        self
    }

    pub fn float(&mut self, key: &str, v: f64) -> &mut Self {
        self.items.push(Item::Scalar(key.to_string(), Value::Float(v)));
        self
    }

    pub fn int(&mut self, key: &str, v: i64) -> &mut Self {
        self.items.push(Item::Scalar(key.to_string(), Value::Int(v)));
        self
    }

    pub fn uint(&mut self, key: &str, v: u64) -> &mut Self {
        self.items.push(Item::Scalar(key.to_string(), Value::UInt(v)));
        self
    }

    pub fn bool(&mut self, key: &str, v: bool) -> &mut Self {
        self.items.push(Item::Scalar(key.to_string(), Value::Bool(v)));
        self
    }

    pub fn float_list(&mut self, key: &str, v: &[f64]) -> &mut Self {
        self.items.push(Item::Scalar(key.to_string(), Value::FloatList(v.to_vec())));
        self
    }

    pub fn block(&mut self, b: Block) -> &mut Self {
        self.items.push(Item::Block(b));
        self
    }

    fn render(&self, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        let _ = writeln!(out, "{pad}{} {{", self.name);
        let inner = "  ".repeat(depth + 1);
        for item in &self.items {
            match item {
                Item::Scalar(key, value) => {
                    let _ = write!(out, "{inner}{key} = ");
                    value.render(out);
                    out.push('\n');
                }
                Item::Block(b) => b.render(depth + 1, out),
            }
        }
        let _ = writeln!(out, "{pad}}}");
    }
}

pub struct Report {
    tool: String,
    items: Vec<Item>,
    warnings: Vec<String>,
    config_raw: String,
}

impl Report {
    pub fn new(tool: &str, config_raw: &str) -> Report {
        Report {
            tool: tool.to_string(),
            items: Vec::new(),
            warnings: Vec::new(),
            config_raw: config_raw.to_string(),
        }
    }

    pub fn scalar(&mut self, key: &str, v: Value) -> &mut Self {
        self.items.push(Item::Scalar(key.to_string(), v));
        self
    }

    pub fn block(&mut self, b: Block) -> &mut Self {
        self.items.push(Item::Block(b));
        self
    }

    pub fn warn(&mut self, text: impl Into<String>) {
        self.warnings.push(text.into());
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Full report text. Ends with the config echo so a report alone is
    /// enough to reproduce the run.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "report \"{}\" {{", escape(&self.tool));
        for item in &self.items {
            match item {
                Item::Scalar(key, value) => {
                    let _ = write!(out, "  {key} = ");
                    value.render(&mut out);
                    out.push('\n');
                }
                Item::Block(b) => b.render(1, &mut out),
            }
        }
        let mut warn = Block::new("warnings");
        warn.uint("count", self.warnings.len() as u64);
        for (i, w) in self.warnings.iter().enumerate() {
            warn.str(&format!("warning_{}", i + 1), w);
        }
        warn.render(1, &mut out);
        let _ = writeln!(out, "  config {{");
        for line in self.config_raw.lines() {
            let _ = writeln!(out, "  | {line}");
        }
        let _ = writeln!(out, "  }}");
        let _ = writeln!(out, "}}");
        out
    }
}

/// Disclosure attached to every report: predictions come from leading-order
/// formulas whose error terms shrink only as the parameters grow.
pub fn o1_disclosure(rep: &mut Report) {
    rep.scalar(
        "asymptotic_terms",
        Value::Str(
            "predicted_* values use leading-order formulas; o(1) corrections in the exponents \
             are dropped, so measured/predicted ratios drift at small parameters"
                .into(),
        ),
    );
}
