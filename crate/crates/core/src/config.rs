//! Plain-text sequence spec files.
//!
//! One `key = value` pair per line; `#` starts a comment. Nested families
//! are addressed with dotted prefixes (`inner.`, `part.<i>.`):
//!
//! ```text
//! family = interleaved
//! start_index = 1
//! parts = 2
//! part.0.family = power-decay
//! part.0.coeffs = 1, 0
//! part.0.exponents = 1
//! part.1.family = power-decay
//! part.1.coeffs = 0, 1
//! part.1.exponents = 1
//! levy_directions = 1, 0; 0, 1
//! ```
//!
//! | family              | keys                                             |
//! |---------------------|--------------------------------------------------|
//! | `explicit`          | `terms` (rows `;`-separated), `dim` if no terms  |
//! | `power-decay`       | `coeffs`, `exponents` (one value broadcasts)     |
//! | `geometric`         | `ratio`, `coeffs` (default `1`)                  |
//! | `alternating`       | `inner.*`                                        |
//! | `interleaved`       | `parts`, `part.<i>.*`                            |
//! | `repeat`            | `times`, `inner.*`                               |
//! | `liouville`         | `growth` = `decimal` or `square`                 |
//! | `random-directions` | `seed`, `scale` (default `1`)                    |
//!
//! Top level only: `start_index` (0 or 1, default 1), `dim` (checked if
//! present), `levy_directions`.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::exact::Real;
use crate::sequence::{Family, Growth, SequenceSpec};

struct Doc {
    entries: BTreeMap<String, (String, usize)>,
    used: RefCell<BTreeSet<String>>,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

impl Doc {
    fn parse(text: &str) -> Result<Doc> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected `key = value`, found `{content}`")))?;
            let k = k.trim().to_string();
            if k.is_empty() {
                return Err(err(line, "empty key"));
            }
            if let Some((_, prev)) = entries.insert(k.clone(), (v.trim().to_string(), line)) {
                return Err(err(line, format!("duplicate key `{k}` (first on line {prev})")));
            }
        }
        Ok(Doc { entries, used: RefCell::new(BTreeSet::new()) })
    }

    fn get(&self, key: &str) -> Option<(&str, usize)> {
        let (v, l) = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some((v.as_str(), *l))
    }

    fn require(&self, key: &str, anchor: usize) -> Result<(&str, usize)> {
        self.get(key).ok_or_else(|| err(anchor, format!("missing key `{key}`")))
    }

    fn check_unused(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.entries.iter().filter(|(k, _)| !used.contains(*k)).min_by_key(|(_, (_, l))| *l) {
            Some((k, (_, l))) => Err(err(*l, format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}

fn parse_reals(text: &str, line: usize) -> Result<Vec<Real>> {
    text.split(',')
        .map(|t| t.parse::<Real>().map_err(|e| err(line, e)))
        .collect()
}

fn parse_rows(text: &str, line: usize) -> Result<Vec<Vec<Real>>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(';').map(|row| parse_reals(row, line)).collect()
}

fn parse_int<T: std::str::FromStr>(text: &str, line: usize, what: &str) -> Result<T> {
    text.trim().parse().map_err(|_| err(line, format!("`{what}` must be an integer, got `{text}`")))
}

fn parse_family(doc: &Doc, prefix: &str, anchor: usize) -> Result<(Family, usize)> {
    let key = |k: &str| format!("{prefix}{k}");
    let (name, line) = doc.require(&key("family"), anchor)?;
    let fam = match name {
        "explicit" => {
            let terms = match doc.get(&key("terms")) {
                Some((t, l)) => parse_rows(t, l)?,
                None => Vec::new(),
            };
            let dim = match doc.get(&key("dim")) {
                Some((d, l)) => parse_int(d, l, "dim")?,
                None => terms.first().map_or(1, Vec::len),
            };
            Family::Explicit { dim, terms }
        }
        "power-decay" => {
            let (c, cl) = doc.require(&key("coeffs"), line)?;
            let coeffs = parse_reals(c, cl)?;
            let (e, el) = doc.require(&key("exponents"), line)?;
            let mut exponents = parse_reals(e, el)?;
            if exponents.len() == 1 && coeffs.len() > 1 {
                exponents = vec![exponents[0].clone(); coeffs.len()];
            }
            if exponents.len() != coeffs.len() {
                return Err(err(el, "`exponents` and `coeffs` differ in length"));
            }
            Family::PowerDecay { coeffs, exponents }
        }
        "geometric" => {
            let (r, rl) = doc.require(&key("ratio"), line)?;
            let ratio = r.parse::<Real>().map_err(|e| err(rl, e))?;
            let coeffs = match doc.get(&key("coeffs")) {
                Some((c, l)) => parse_reals(c, l)?,
                None => vec![Real::int(1)],
            };
            Family::Geometric { coeffs, ratio }
        }
        "alternating" => Family::Alternating(Box::new(parse_family(doc, &key("inner."), line)?.0)),
        "repeat" => {
            let (t, tl) = doc.require(&key("times"), line)?;
            let times: u64 = parse_int(t, tl, "times")?;
            if times == 0 {
                return Err(err(tl, "`times` must be positive"));
            }
            Family::Repeat { inner: Box::new(parse_family(doc, &key("inner."), line)?.0), times }
        }
        "interleaved" => {
            let (p, pl) = doc.require(&key("parts"), line)?;
            let parts: usize = parse_int(p, pl, "parts")?;
            if parts == 0 {
                return Err(err(pl, "`parts` must be positive"));
            }
            let fams = (0..parts)
                .map(|i| parse_family(doc, &key(&format!("part.{i}.")), pl).map(|f| f.0))
                .collect::<Result<Vec<_>>>()?;
            Family::Interleaved(fams)
        }
        "liouville" => {
            let growth = match doc.get(&key("growth")) {
                None | Some(("decimal", _)) => Growth::Decimal,
                Some(("square", _)) => Growth::Square,
                Some((other, l)) => return Err(err(l, format!("unknown growth `{other}`"))),
            };
            Family::Liouville { growth }
        }
        "random-directions" => {
            let (s, sl) = doc.require(&key("seed"), line)?;
            let seed: u64 = parse_int(s, sl, "seed")?;
            let scale = match doc.get(&key("scale")) {
                Some((v, l)) => v.parse::<Real>().map_err(|e| err(l, e))?,
                None => Real::int(1),
            };
            Family::RandomDirections { seed, scale }
        }
        other => return Err(err(line, format!("unknown family `{other}`"))),
    };
    Ok((fam, line))
}

/// Parses a spec document.
pub fn parse_spec(text: &str) -> Result<SequenceSpec> {
    let doc = Doc::parse(text)?;
    let (family, line) = parse_family(&doc, "", 1)?;
    let start = match doc.get("start_index") {
        Some((s, l)) => {
            let v: u64 = parse_int(s, l, "start_index")?;
            if v > 1 {
                return Err(err(l, "`start_index` must be 0 or 1"));
            }
            v
        }
        None => 1,
    };
    let declared_dim = match doc.get("dim") {
        // an explicit family consumes its own `dim`
        Some((d, l)) if !matches!(family, Family::Explicit { .. }) => {
            Some((parse_int::<usize>(d, l, "dim")?, l))
        }
        _ => None,
    };
    let dirs = match doc.get("levy_directions") {
        Some((d, l)) => Some((
            parse_rows(d, l)?
                .into_iter()
                .map(|r| r.iter().map(Real::value).collect())
                .collect::<Vec<Vec<f64>>>(),
            l,
        )),
        None => None,
    };
    doc.check_unused()?;
    let spec = SequenceSpec::new(family, start).map_err(|e| err(line, e.to_string()))?;
    if let Some((d, l)) = declared_dim {
        if d != spec.dim() {
            return Err(err(l, format!("`dim = {d}` but the family has dimension {}", spec.dim())));
        }
    }
    match dirs {
        Some((d, l)) => spec.with_levy_directions(d).map_err(|e| err(l, e.to_string())),
        None => Ok(spec),
    }
}

/// Reads and parses a spec file.
pub fn load_spec(path: &Path) -> Result<SequenceSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(0, format!("cannot read {}: {e}", path.display())))?;
    parse_spec(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_interleaved_harmonic() {
        let text = "family = interleaved\nparts = 2\npart.0.family = power-decay\n\
                    part.0.coeffs = 1, 0\npart.0.exponents = 1\npart.1.family = power-decay\n\
                    part.1.coeffs = 0, 1\npart.1.exponents = 1\nlevy_directions = 1,0; 0,2\n";
        let spec = parse_spec(text).unwrap();
        assert_eq!(spec.dim(), 2);
        assert_eq!(spec.term(2).unwrap(), vec![0.0, 0.5]);
        assert_eq!(spec.levy_directions()[1], vec![0.0, 1.0]);
    }

    #[test]
    fn geometric_with_start_zero() {
        let spec = parse_spec("family = geometric\nratio = 1/2\nstart_index = 0 # origin\n").unwrap();
        assert_eq!(spec.term(0).unwrap(), vec![1.0]);
    }

    #[test]
    fn explicit_rows() {
        let spec = parse_spec("family = explicit\nterms = 1, 0; 0, 1; 1/2, 1/2\n").unwrap();
        assert_eq!(spec.dim(), 2);
        assert_eq!(spec.term(3).unwrap(), vec![0.5, 0.5]);
        assert_eq!(spec.term(4).unwrap(), vec![0.0, 0.0]);
        let zero = parse_spec("family = explicit\ndim = 2\n").unwrap();
        assert_eq!(zero.term(9).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let e = parse_spec("family = geometric\n\nratio = x\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }), "{e}");
        let e = parse_spec("family = geometric\nratio = 1/2\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }), "{e}");
        let e = parse_spec("family = power-decay\ncoeffs = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }), "{e}");
        let e = parse_spec("# spec\nno equals sign\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }), "{e}");
        let e = parse_spec("family = geometric\nratio = 1/2\nratio = 1/3\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }), "{e}");
    }

    #[test]
    fn nested_alternating_and_repeat() {
        let spec = parse_spec(
            "family = repeat\ntimes = 2\ninner.family = alternating\n\
             inner.inner.family = power-decay\ninner.inner.coeffs = 1\ninner.inner.exponents = 1\n",
        )
        .unwrap();
        assert_eq!(spec.terms(0, 4), vec![vec![-1.0], vec![-1.0], vec![0.5], vec![0.5]]);
    }

    #[test]
    fn liouville_square() {
        let spec = parse_spec("family = liouville\ngrowth = square\n").unwrap();
        assert_eq!(spec.term(1).unwrap(), vec![-0.5, -0.5]);
        assert_eq!(spec.term(5).unwrap(), vec![-1.0 / 16.0, -0.25]);
    }
}
