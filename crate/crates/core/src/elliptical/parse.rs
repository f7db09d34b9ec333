//! Textual family specifications: `kotz a=1 b=0.5 s=1` or `family=kotz a=1 b=0.5 s=1`.

use std::collections::BTreeMap;
use std::fmt;

use super::FamilyKind;
use crate::error::{Error, Result};

/// Parses a whitespace-separated family specification.
pub fn parse_family_kind(spec: &str) -> Result<FamilyKind> {
    let mut tokens = spec.split_whitespace();
    let head = tokens.next().ok_or_else(|| Error::Parse("empty family specification".into()))?;
    let name = head.strip_prefix("family=").unwrap_or(head);
    if name.contains('=') {
        return Err(Error::Parse(format!("expected a family name, got `{head}`")));
    }

    let mut params = BTreeMap::new();
    for tok in tokens {
        let (key, value) =
            tok.split_once('=').ok_or_else(|| Error::Parse(format!("expected key=value, got `{tok}`")))?;
        let value: f64 = value.parse().map_err(|_| Error::Parse(format!("`{value}` is not a number (key `{key}`)")))?;
        if params.insert(key.to_string(), value).is_some() {
            return Err(Error::Parse(format!("duplicate key `{key}`")));
        }
    }
    family_from_parts(name, params)
}

/// Builds a family from its name and a complete, exact set of parameters.
pub fn family_from_parts(name: &str, mut params: BTreeMap<String, f64>) -> Result<FamilyKind> {
    let mut take =
        |key: &str| params.remove(key).ok_or_else(|| Error::Parse(format!("family `{name}` requires `{key}`")));
    let kind = match name {
        "kotz" => FamilyKind::Kotz { a: take("a")?, b: take("b")?, s: take("s")? },
        "pearson7" => FamilyKind::PearsonVII { v: take("v")?, s: take("s")? },
        "hyperbolic" => FamilyKind::Hyperbolic { v: take("v")?, a: take("a")?, lambda: take("lambda")? },
        "logistic" => FamilyKind::Logistic,
        "alphastable" => FamilyKind::AlphaStable { a: take("a")? },
        "pearson2" => FamilyKind::PearsonII { s: take("s")? },
        other => return Err(Error::Parse(format!("unknown family `{other}`"))),
    };
    if let Some(key) = params.keys().next() {
        return Err(Error::Parse(format!("family `{name}` has no parameter `{key}`")));
    }
    Ok(kind)
}

impl FamilyKind {
    /// Named parameters in their canonical order.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            FamilyKind::Kotz { a, b, s } => vec![("a", a), ("b", b), ("s", s)],
            FamilyKind::PearsonVII { v, s } => vec![("v", v), ("s", s)],
            FamilyKind::Hyperbolic { v, a, lambda } => vec![("v", v), ("a", a), ("lambda", lambda)],
            FamilyKind::Logistic => vec![],
            FamilyKind::AlphaStable { a } => vec![("a", a)],
            FamilyKind::PearsonII { s } => vec![("s", s)],
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        for (key, value) in self.params() {
            write!(f, " {key}={value:?}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_family_kind(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn both_forms_parse() {
        let a = parse_family_kind("kotz a=1 b=0.5 s=1").unwrap();
        let b = parse_family_kind("family=kotz s=1 a=1 b=0.5").unwrap();
        assert_eq!(a, b);
        assert!(a.is_gaussian());
        assert_eq!(parse_family_kind("logistic").unwrap(), FamilyKind::Logistic);
    }

    #[test]
    fn malformed_specs_are_rejected() {
        for bad in [
            "",
            "gauss",
            "kotz a=1 b=0.5",
            "kotz a=1 b=0.5 s=1 s=2",
            "kotz a=1 b=0.5 s=1 q=3",
            "kotz a=x b=0.5 s=1",
            "pearson7 v=1 s",
            "a=1",
        ] {
            assert!(parse_family_kind(bad).is_err(), "{bad:?}");
        }
    }

    fn any_kind() -> impl Strategy<Value = FamilyKind> {
        let x = || -1e6..1e6f64;
        prop_oneof![
            (x(), x(), x()).prop_map(|(a, b, s)| FamilyKind::Kotz { a, b, s }),
            (x(), x()).prop_map(|(v, s)| FamilyKind::PearsonVII { v, s }),
            (x(), x(), x()).prop_map(|(v, a, lambda)| FamilyKind::Hyperbolic { v, a, lambda }),
            Just(FamilyKind::Logistic),
            x().prop_map(|a| FamilyKind::AlphaStable { a }),
            x().prop_map(|s| FamilyKind::PearsonII { s }),
        ]
    }

    proptest! {
        #[test]
        fn display_round_trips(kind in any_kind()) {
            prop_assert_eq!(parse_family_kind(&kind.to_string()).unwrap(), kind);
        }

        #[test]
        fn never_panics(s in "\\PC*") {
            let _ = parse_family_kind(&s);
        }
    }
}
