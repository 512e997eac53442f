//! Rendering and parsing of grounded prediction statements.

use crate::error::{NetError, Result};

/// Machine-checkable content of one emitted statement.
#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub a_slot: usize,
    pub horizon: usize,
    pub argmax_bin: usize,
    /// Probability of the argmax bin, carried at 3-decimal precision.
    pub max_prob: f64,
    /// Conditioning slot ids, ascending.
    pub b_slots: Vec<usize>,
}

impl Statement {
    /// Render into the fixed template, e.g.
    /// `slot[4] in 5 steps: bin 12 (p=0.482) | given slots {3,7,12}`.
    pub fn render(&self) -> String {
        let b_list =
            self.b_slots.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        format!(
            "slot[{}] in {} steps: bin {} (p={:.3}) | given slots {{{}}}",
            self.a_slot, self.horizon, self.argmax_bin, self.max_prob, b_list
        )
    }

    /// Parse a rendered statement back into its fields. Inverse of
    /// [`Statement::render`] up to the 3-decimal probability precision.
    pub fn parse(text: &str) -> Result<Statement> {
        fn expect<'a>(rest: &'a str, lit: &str, field: &'static str) -> Result<&'a str> {
            rest.strip_prefix(lit).ok_or_else(|| NetError::StatementParse {
                field,
                reason: format!("expected {lit:?} at {:?}", truncate(rest)),
            })
        }
        fn take_until<'a>(
            rest: &'a str,
            stop: char,
            field: &'static str,
        ) -> Result<(&'a str, &'a str)> {
            match rest.find(stop) {
                Some(i) => Ok((&rest[..i], &rest[i..])),
                None => Err(NetError::StatementParse {
                    field,
                    reason: format!("missing {stop:?} after {:?}", truncate(rest)),
                }),
            }
        }
        fn parse_usize(s: &str, field: &'static str) -> Result<usize> {
            s.trim().parse().map_err(|e| NetError::StatementParse {
                field,
                reason: format!("{e}: {s:?}"),
            })
        }
        fn truncate(s: &str) -> &str {
            &s[..s.len().min(24)]
        }

        let rest = expect(text, "slot[", "a_slot")?;
        let (a, rest) = take_until(rest, ']', "a_slot")?;
        let rest = expect(rest, "] in ", "horizon")?;
        let (k, rest) = take_until(rest, ' ', "horizon")?;
        let rest = expect(rest, " steps: bin ", "argmax_bin")?;
        let (bin, rest) = take_until(rest, ' ', "argmax_bin")?;
        let rest = expect(rest, " (p=", "max_prob")?;
        let (prob, rest) = take_until(rest, ')', "max_prob")?;
        let rest = expect(rest, ") | given slots {", "b_slots")?;
        let (blist, rest) = take_until(rest, '}', "b_slots")?;
        if rest != "}" {
            return Err(NetError::StatementParse {
                field: "b_slots",
                reason: format!("trailing text {:?}", truncate(&rest[1..])),
            });
        }
        let b_slots = blist
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_usize(s, "b_slots"))
            .collect::<Result<Vec<_>>>()?;
        Ok(Statement {
            a_slot: parse_usize(a, "a_slot")?,
            horizon: parse_usize(k, "horizon")?,
            argmax_bin: parse_usize(bin, "argmax_bin")?,
            max_prob: prob.trim().parse().map_err(|e| NetError::StatementParse {
                field: "max_prob",
                reason: format!("{e}: {prob:?}"),
            })?,
            b_slots,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_matches_template() {
        let s = Statement {
            a_slot: 4,
            horizon: 5,
            argmax_bin: 12,
            max_prob: 0.4821,
            b_slots: vec![3, 7, 12],
        };
        assert_eq!(s.render(), "slot[4] in 5 steps: bin 12 (p=0.482) | given slots {3,7,12}");
    }

    #[test]
    fn parse_inverts_render() {
        let s = Statement {
            a_slot: 15,
            horizon: 5,
            argmax_bin: 0,
            max_prob: 0.125,
            b_slots: vec![0, 9, 11],
        };
        let back = Statement::parse(&s.render()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.render(), s.render());
    }

    #[test]
    fn parse_rejects_malformed() {
        assert!(Statement::parse("slot[4] in 5 steps").is_err());
        assert!(Statement::parse("slot[x] in 5 steps: bin 1 (p=0.1) | given slots {2}").is_err());
        assert!(
            Statement::parse("slot[4] in 5 steps: bin 1 (p=0.1) | given slots {2} extra").is_err()
        );
    }
}
