//! Line-oriented network format.
//!
//! ```text
//! # comment
//! MODES P1 P2 P3 P4
//! COUPLER P1 P2 0.5235987755982988
//! PHASE P2 0
//! SWITCH P3 P4 sw0
//! MIRROR P4 P3
//! SINK P3 dump
//! DETECT P1 D0
//! ```
//!
//! `MODES` is optional; without it modes are declared in order of first use.
//! Angles are radians written as decimal literals. Everything after `#` on a
//! line is ignored.

use thiserror::Error;

use super::{Element, EngineError, ModeId, NetworkSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error(transparent)]
    Invalid(#[from] EngineError),
}

pub(super) fn write(net: &NetworkSpec) -> String {
    let mut out = String::new();
    out.push_str("MODES");
    for m in &net.modes {
        out.push(' ');
        out.push_str(m);
    }
    out.push('\n');
    let l = |m: &ModeId| net.modes[m.0].as_str();
    for el in &net.elements {
        let line = match el {
            Element::Coupler { a, b, theta } => format!("COUPLER {} {} {theta:?}", l(a), l(b)),
            Element::PhaseShift { mode, phi } => format!("PHASE {} {phi:?}", l(mode)),
            Element::Switch { a, b, id } => format!("SWITCH {} {} {id}", l(a), l(b)),
            Element::Mirror { a, b } => format!("MIRROR {} {}", l(a), l(b)),
            Element::Sink { mode, id } => format!("SINK {} {id}", l(mode)),
            Element::Detect { mode, id } => format!("DETECT {} {id}", l(mode)),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

struct Modes {
    labels: Vec<String>,
    declared: bool,
}

impl Modes {
    fn get(&mut self, label: &str, line: usize) -> Result<ModeId, ParseError> {
        if let Some(i) = self.labels.iter().position(|m| m == label) {
            return Ok(ModeId(i));
        }
        if self.declared {
            return Err(ParseError::Syntax {
                line,
                msg: format!("undeclared mode `{label}`"),
            });
        }
        self.labels.push(label.to_string());
        Ok(ModeId(self.labels.len() - 1))
    }
}

fn angle(tok: &str, line: usize) -> Result<f64, ParseError> {
    let v: f64 = tok.parse().map_err(|_| ParseError::Syntax {
        line,
        msg: format!("bad angle `{tok}`"),
    })?;
    if !v.is_finite() {
        return Err(ParseError::Syntax {
            line,
            msg: format!("non-finite angle `{tok}`"),
        });
    }
    Ok(v)
}

pub(super) fn parse(src: &str) -> Result<NetworkSpec, ParseError> {
    let mut modes = Modes {
        labels: Vec::new(),
        declared: false,
    };
    let mut elements = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_whitespace().collect();
        let Some((&kw, args)) = toks.split_first() else {
            continue;
        };
        let arity = |n: usize| -> Result<(), ParseError> {
            if args.len() == n {
                Ok(())
            } else {
                Err(ParseError::Syntax {
                    line,
                    msg: format!("{kw} takes {n} arguments, got {}", args.len()),
                })
            }
        };
        let el = match kw {
            "MODES" => {
                if modes.declared || !elements.is_empty() {
                    return Err(ParseError::Syntax {
                        line,
                        msg: "MODES must come first and only once".into(),
                    });
                }
                modes.labels = args.iter().map(|s| s.to_string()).collect();
                modes.declared = true;
                continue;
            }
            "COUPLER" => {
                arity(3)?;
                Element::Coupler {
                    a: modes.get(args[0], line)?,
                    b: modes.get(args[1], line)?,
                    theta: angle(args[2], line)?,
                }
            }
            "PHASE" => {
                arity(2)?;
                Element::PhaseShift {
                    mode: modes.get(args[0], line)?,
                    phi: angle(args[1], line)?,
                }
            }
            "SWITCH" => {
                arity(3)?;
                Element::Switch {
                    a: modes.get(args[0], line)?,
                    b: modes.get(args[1], line)?,
                    id: args[2].to_string(),
                }
            }
            "MIRROR" => {
                arity(2)?;
                Element::Mirror {
                    a: modes.get(args[0], line)?,
                    b: modes.get(args[1], line)?,
                }
            }
            "SINK" => {
                arity(2)?;
                Element::Sink {
                    mode: modes.get(args[0], line)?,
                    id: args[1].to_string(),
                }
            }
            "DETECT" => {
                arity(2)?;
                Element::Detect {
                    mode: modes.get(args[0], line)?,
                    id: args[1].to_string(),
                }
            }
            other => {
                return Err(ParseError::Syntax {
                    line,
                    msg: format!("unknown element `{other}`"),
                })
            }
        };
        elements.push(el);
    }
    Ok(NetworkSpec::new(modes.labels, elements)?)
}
