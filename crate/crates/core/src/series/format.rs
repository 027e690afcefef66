//! Canonical text and JSON forms of a series.
//!
//! Text: `c * x^a * y^b + ... + O(N)` in graded-lexicographic order (total
//! degree ascending, then higher powers of the first variable first), with a
//! `; w=wx,wy` suffix inside `O(...)` for non-default weights.
//! JSON: `{p, n, prec, vars, terms: [[a, b, "c"], ...]}` plus `weights` when
//! they are not `(1, 1)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{vars, Exp, TruncSeries, Weights};
use crate::error::{Error, Result};
use crate::field::Field;

fn graded_lex(terms: &std::collections::BTreeMap<Exp, u32>) -> Vec<(Exp, u32)> {
    let mut v: Vec<(Exp, u32)> = terms.iter().map(|(&e, &c)| (e, c)).collect();
    v.sort_by(|(a, _), (b, _)| (a.0 + a.1).cmp(&(b.0 + b.1)).then(b.0.cmp(&a.0)));
    v
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesJson {
    pub p: u32,
    pub n: u32,
    pub prec: u64,
    pub vars: [String; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<[u32; 2]>,
    pub terms: Vec<(u32, u32, String)>,
}

impl TruncSeries {
    pub fn to_text(&self) -> String {
        let [xn, yn] = &*self.vars;
        let mut parts: Vec<String> = graded_lex(&self.terms)
            .into_iter()
            .map(|((a, b), c)| {
                let mut s = c.to_string();
                match a {
                    0 => {}
                    1 => s.push_str(&format!(" * {xn}")),
                    _ => s.push_str(&format!(" * {xn}^{a}")),
                }
                match b {
                    0 => {}
                    1 => s.push_str(&format!(" * {yn}")),
                    _ => s.push_str(&format!(" * {yn}^{b}")),
                }
                s
            })
            .collect();
        if self.weights == Weights::default() {
            parts.push(format!("O({})", self.prec));
        } else {
            parts.push(format!("O({}; w={},{})", self.prec, self.weights.x, self.weights.y));
        }
        parts.join(" + ")
    }

    pub fn parse_text(field: &Arc<Field>, var_names: &Arc<[String; 2]>, text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("{m} in `{text}`"));
        let mut terms = Vec::new();
        let mut tail = None;
        for part in text.split(" + ") {
            let part = part.trim();
            if let Some(inner) = part.strip_prefix("O(").and_then(|r| r.strip_suffix(')')) {
                let (prec, weights) = match inner.split_once("; w=") {
                    Some((p, w)) => {
                        let (wx, wy) = w.split_once(',').ok_or_else(|| bad("weights"))?;
                        let wx: u32 = wx.parse().map_err(|_| bad("weight"))?;
                        let wy: u32 = wy.parse().map_err(|_| bad("weight"))?;
                        if wx == 0 || wy == 0 {
                            return Err(bad("zero weight"));
                        }
                        (p, Weights::new(wx, wy))
                    }
                    None => (inner, Weights::default()),
                };
                tail = Some((prec.parse::<u64>().map_err(|_| bad("precision"))?, weights));
                continue;
            }
            let mut factors = part.split(" * ");
            let c: u32 = factors.next().ok_or_else(|| bad("empty term"))?.parse().map_err(|_| bad("coefficient"))?;
            let (mut a, mut b) = (0u32, 0u32);
            for f in factors {
                let (name, e) = match f.split_once('^') {
                    Some((n, e)) => (n, e.parse::<u32>().map_err(|_| bad("exponent"))?),
                    None => (f, 1),
                };
                if name == var_names[0] {
                    a += e;
                } else if name == var_names[1] {
                    b += e;
                } else {
                    return Err(Error::UnknownVariable(name.to_string()));
                }
            }
            terms.push(((a, b), c));
        }
        let (prec, weights) = tail.ok_or_else(|| bad("missing O(...)"))?;
        TruncSeries::make_weighted(field, var_names, weights, terms, prec)
    }

    pub fn to_json_value(&self) -> SeriesJson {
        SeriesJson {
            p: self.field.p(),
            n: self.field.n(),
            prec: self.prec,
            vars: (*self.vars).clone(),
            weights: (self.weights != Weights::default()).then_some([self.weights.x, self.weights.y]),
            terms: graded_lex(&self.terms).into_iter().map(|((a, b), c)| (a, b, c.to_string())).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("series serializes")
    }

    pub fn from_json_value(j: &SeriesJson) -> Result<Self> {
        let field = Field::new(j.p, j.n)?;
        let weights = match j.weights {
            Some([wx, wy]) if wx > 0 && wy > 0 => Weights::new(wx, wy),
            Some(_) => return Err(Error::Parse("weights must be positive".into())),
            None => Weights::default(),
        };
        let mut terms = Vec::with_capacity(j.terms.len());
        for (a, b, c) in &j.terms {
            let c: u32 = c.parse().map_err(|_| Error::Parse(format!("coefficient `{c}`")))?;
            terms.push(((*a, *b), c));
        }
        TruncSeries::make_weighted(&field, &vars(&j.vars[0], &j.vars[1]), weights, terms, j.prec)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: SeriesJson = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json_value(&j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_is_graded_lex() {
        let k = Field::prime(5).unwrap();
        let s = TruncSeries::from_ints(&k, &vars("x", "y"), &[((0, 2), 1), ((1, 1), 2), ((2, 0), 3), ((0, 0), 4)], 4).unwrap();
        assert_eq!(s.to_text(), "4 + 3 * x^2 + 2 * x * y + 1 * y^2 + O(4)");
        let back = TruncSeries::parse_text(&k, &vars("x", "y"), &s.to_text()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn json_layout() {
        let k = Field::prime(3).unwrap();
        let s = TruncSeries::from_ints(&k, &vars("x", "y"), &[((0, 3), 1), ((2, 1), -1)], 6).unwrap();
        assert_eq!(
            s.to_json(),
            r#"{"p":3,"n":1,"prec":6,"vars":["x","y"],"terms":[[2,1,"2"],[0,3,"1"]]}"#
        );
        assert_eq!(TruncSeries::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn parse_errors() {
        let k = Field::prime(3).unwrap();
        let v = vars("x", "y");
        assert!(matches!(TruncSeries::parse_text(&k, &v, "1 * z + O(3)"), Err(Error::UnknownVariable(_))));
        assert!(matches!(TruncSeries::parse_text(&k, &v, "1 * x"), Err(Error::Parse(_))));
        assert!(matches!(TruncSeries::from_json("{"), Err(Error::Parse(_))));
    }
}
