//! Parser and renderer for the supported subset of The Model Language.
//!
//! ```text
//! ($ fill (1) $)
//! model DataExchangeAPI
//!
//! source [lambda]
//!   ($0.01$) "C_f/c_e"      [lambda]
//!            "C_t/c_s, c_a" [C_t]
//! ```
//!
//! One construct per line. Full-line `//` comments are skipped. Anything else
//! TML allows (constraints, labels, embedded scripts) is rejected.

use std::collections::HashMap;
use std::fmt::Write;

use crate::model::{Arc, ModelError, ResponseLabel, StateId, StimulusLabel, UsageModel};

const DEFAULT_SINK: &str = "Exit";

struct Cursor<'a> {
    line: usize,
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(line: usize, text: &'a str) -> Self {
        Self { line, text, pos: 0 }
    }

    fn column(&self) -> usize {
        self.text[..self.pos].chars().count() + 1
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.text.len()
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn error(&self, message: impl Into<String>) -> ModelError {
        ModelError::Syntax {
            line: self.line,
            column: self.column(),
            message: message.into(),
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), ModelError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    /// Consumes up to (not including) `close`, which is then consumed too.
    fn delimited(&mut self, close: char) -> Result<&'a str, ModelError> {
        match self.rest().find(close) {
            Some(end) => {
                let inner = &self.rest()[..end];
                self.pos += end + close.len_utf8();
                Ok(inner)
            }
            None => Err(self.error(format!("missing `{close}`"))),
        }
    }

    /// `[name]`, returning the name and the column where it starts.
    fn state_ref(&mut self) -> Result<(String, usize), ModelError> {
        self.expect("[")?;
        let column = self.column();
        let name = self.delimited(']')?.trim();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(ModelError::Syntax {
                line: self.line,
                column,
                message: format!("invalid state name `{name}`"),
            });
        }
        Ok((name.to_string(), column))
    }

    fn end(&mut self) -> Result<(), ModelError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected trailing text `{}`", self.rest())))
        }
    }
}

struct PendingArc {
    from: usize,
    target: String,
    line: usize,
    column: usize,
    stimulus: StimulusLabel,
    response: ResponseLabel,
    weight: Option<f64>,
}

/// Parses a model without filling unannotated probabilities. Annotated
/// values are normalized by the fill mass (1 when no directive is given).
pub fn parse_model(text: &str) -> Result<UsageModel, ModelError> {
    let mut fill: Option<f64> = None;
    let mut name: Option<String> = None;
    let mut states: Vec<String> = Vec::new();
    let mut declared: HashMap<String, usize> = HashMap::new();
    let mut source: Option<usize> = None;
    let mut tagged_sink: Option<usize> = None;
    let mut current: Option<usize> = None;
    let mut pending: Vec<PendingArc> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let mut cur = Cursor::new(i + 1, raw);
        if cur.at_end() || cur.rest().starts_with("//") {
            continue;
        }
        let mut weight = None;
        if cur.eat("($") {
            let column = cur.column();
            let inner = cur.delimited('$')?.trim();
            cur.expect(")")?;
            if let Some(arg) = inner.strip_prefix("fill") {
                if name.is_some() {
                    return Err(ModelError::Syntax {
                        line: i + 1,
                        column,
                        message: "fill directive must precede `model`".into(),
                    });
                }
                let mass = arg
                    .trim()
                    .strip_prefix('(')
                    .and_then(|s| s.strip_suffix(')'))
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .filter(|m| *m > 0.0 && m.is_finite())
                    .ok_or_else(|| ModelError::Syntax {
                        line: i + 1,
                        column,
                        message: format!("malformed fill directive `{inner}`"),
                    })?;
                fill = Some(mass);
                cur.end()?;
                continue;
            }
            let value: f64 = inner.parse().map_err(|_| ModelError::Unsupported {
                line: i + 1,
                column,
                construct: format!("($ {inner} $)"),
            })?;
            weight = Some((value, column));
        }

        cur.skip_ws();
        if cur.rest().starts_with('"') {
            let Some(from) = current else {
                return Err(cur.error("arc outside of a state block"));
            };
            cur.expect("\"")?;
            let label_col = cur.column();
            let label = cur.delimited('"')?;
            let Some((stim, resp)) = label.split_once('/') else {
                return Err(ModelError::Syntax {
                    line: i + 1,
                    column: label_col,
                    message: format!("arc label `{label}` lacks `/response`"),
                });
            };
            let bad_label = |e: ModelError| ModelError::Syntax {
                line: i + 1,
                column: label_col,
                message: e.to_string(),
            };
            let stimulus = StimulusLabel::new(stim.trim()).map_err(bad_label)?;
            let response = ResponseLabel::new(resp.split(',').map(str::trim)).map_err(bad_label)?;
            let (target, column) = cur.state_ref()?;
            cur.end()?;
            let weight = match weight {
                Some((value, column)) => {
                    let mass = fill.unwrap_or(1.0);
                    if !(value > 0.0 && value <= mass) {
                        return Err(ModelError::ProbabilityOutOfRange {
                            value,
                            line: i + 1,
                            column,
                        });
                    }
                    Some(value / mass)
                }
                None => None,
            };
            pending.push(PendingArc {
                from,
                target,
                line: i + 1,
                column,
                stimulus,
                response,
                weight,
            });
            continue;
        }
        if weight.is_some() {
            return Err(cur.error("probability annotation must be followed by an arc"));
        }

        if cur.rest().starts_with("model") && cur.rest()[5..].starts_with(char::is_whitespace) {
            cur.eat("model");
            if name.is_some() {
                return Err(cur.error("duplicate `model` header"));
            }
            let n = cur.rest().trim();
            if n.is_empty() || n.chars().any(char::is_whitespace) {
                return Err(cur.error("expected a model name"));
            }
            name = Some(n.to_string());
            continue;
        }
        if name.is_none() {
            return Err(cur.error("expected `model <name>`"));
        }

        let tag = if cur.eat("source") {
            Some("source")
        } else if cur.eat("sink") {
            Some("sink")
        } else {
            None
        };
        if !cur.rest().trim_start().starts_with('[') {
            return Err(ModelError::Unsupported {
                line: i + 1,
                column: cur.column(),
                construct: cur.rest().trim().to_string(),
            });
        }
        let (state, _) = cur.state_ref()?;
        cur.end()?;
        if declared.contains_key(&state) {
            return Err(ModelError::DuplicateState {
                name: state,
                line: i + 1,
            });
        }
        let id = states.len();
        declared.insert(state.clone(), id);
        states.push(state);
        match tag {
            Some("source") => {
                if source.replace(id).is_some() {
                    return Err(ModelError::MultipleSources { line: i + 1 });
                }
            }
            Some(_) if tagged_sink.is_some() => return Err(cur.error("more than one sink state")),
            Some(_) => tagged_sink = Some(id),
            None => {}
        }
        current = Some(id);
    }

    let Some(name) = name else {
        return Err(ModelError::Syntax {
            line: 1,
            column: 1,
            message: "expected `model <name>`".into(),
        });
    };
    let source = source.ok_or(ModelError::NoSource)?;
    if let Some(p) = pending
        .iter()
        .find(|p| p.target != DEFAULT_SINK && !declared.contains_key(&p.target))
    {
        return Err(ModelError::UnknownTarget {
            target: p.target.clone(),
            line: p.line,
            column: p.column,
        });
    }
    let sink = match tagged_sink {
        Some(s) => s,
        None => match declared.get(DEFAULT_SINK) {
            Some(&s) => s,
            None if pending.iter().any(|p| p.target == DEFAULT_SINK) => {
                declared.insert(DEFAULT_SINK.to_string(), states.len());
                states.push(DEFAULT_SINK.to_string());
                states.len() - 1
            }
            None => return Err(ModelError::NoSink),
        },
    };

    let mut arcs = Vec::with_capacity(pending.len());
    for p in pending {
        let to = *declared.get(&p.target).ok_or(ModelError::UnknownTarget {
            target: p.target.clone(),
            line: p.line,
            column: p.column,
        })?;
        arcs.push(Arc {
            from: StateId(p.from),
            to: StateId(to),
            stimulus: p.stimulus,
            response: p.response,
            probability: p.weight.unwrap_or(0.0),
            annotated: p.weight.is_some(),
        });
    }
    UsageModel::new(name, states, StateId(source), StateId(sink), arcs, fill)
}

/// Renders a model back to model-language text. Only annotated arcs carry a
/// probability, so `parse_model(render_model(m))` reproduces `m`.
pub fn render_model(model: &UsageModel) -> String {
    let mut out = String::new();
    let mass = model.fill_directive();
    if let Some(m) = mass {
        let _ = writeln!(out, "($ fill ({m}) $)");
    }
    let _ = writeln!(out, "model {}", model.name());
    for s in model.state_ids() {
        out.push('\n');
        let tag = if s == model.source() {
            "source "
        } else if s == model.sink() {
            "sink "
        } else {
            ""
        };
        let _ = writeln!(out, "{tag}[{}]", model.state_name(s));
        for &a in model.outgoing(s) {
            let arc = model.arc(a);
            let label = format!("\"{}/{}\"", arc.stimulus, arc.response.atoms().join(", "));
            if arc.annotated {
                let value = arc.probability * mass.unwrap_or(1.0);
                let _ = writeln!(out, "  ($ {value} $) {label} [{}]", model.state_name(arc.to));
            } else {
                let _ = writeln!(out, "  {label} [{}]", model.state_name(arc.to));
            }
        }
    }
    out
}
