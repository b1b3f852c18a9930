use super::measure::LambdaMeasure;
use super::observables::{sweep_measure, SweepPoint};
use crate::{Error, Result};

fn perr(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn number(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| perr(format!("expected a number, found '{s}'")))
}

fn term(s: &str) -> Result<LambdaMeasure> {
    let (body, weight) = match s.rsplit_once('*') {
        Some((b, w)) => (b, Some(number(w)?)),
        None => (s, None),
    };
    let (name, param) = match body.split_once(':') {
        Some((n, p)) => (n.trim(), Some(number(p)?)),
        None => (body.trim(), None),
    };
    let m = match (name, param) {
        ("kingman", None) => LambdaMeasure::kingman(),
        ("bs", None) => LambdaMeasure::bolthausen_sznitman(),
        ("beta", Some(a)) => LambdaMeasure::beta(a)?,
        ("dirac", Some(p)) => LambdaMeasure::dirac(p)?,
        _ => return Err(perr(format!("unknown measure term '{s}'"))),
    };
    match weight {
        Some(w) => m.scaled(w),
        None => Ok(m),
    }
}

fn sweep_points(s: &str) -> Result<Vec<SweepPoint>> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|x| x.strip_suffix(']'))
        .ok_or_else(|| perr("sweep list must be enclosed in [ ]"))?;
    let mut out = Vec::new();
    let mut rest = inner.trim();
    while !rest.is_empty() {
        let open = rest
            .strip_prefix('(')
            .ok_or_else(|| perr(format!("expected '(' in '{rest}'")))?;
        let close = open.find(')').ok_or_else(|| perr("unclosed '('"))?;
        let fields: Vec<&str> = open[..close].split(',').collect();
        if fields.len() != 3 {
            return Err(perr("sweep points are (rate,s,r) triples"));
        }
        out.push(SweepPoint {
            rate: number(fields[0])?,
            s: number(fields[1])?,
            r: number(fields[2])?,
        });
        rest = open[close + 1..].trim_start();
        if let Some(r) = rest.strip_prefix(',') {
            rest = r.trim_start();
        }
    }
    Ok(out)
}

/// Parses a measure description: `kingman`, `bs`, `beta:A`, `dirac:P`,
/// `mix:T1+T2+...` with terms optionally weighted as `T*W`, and
/// `sweep:[(rate,s,r),...]`.
pub fn parse_measure(spec: &str) -> Result<LambdaMeasure> {
    let spec = spec.trim();
    if let Some(list) = spec.strip_prefix("sweep:") {
        return sweep_measure(&sweep_points(list)?).map_err(|e| perr(e.to_string()));
    }
    let result = if let Some(terms) = spec.strip_prefix("mix:") {
        let mut parts = terms.split('+');
        let first = term(parts.next().unwrap_or(""))?;
        parts.try_fold(first, |acc, t| Ok::<_, Error>(acc.plus(&term(t)?)))
    } else {
        term(spec)
    };
    result.map_err(|e| match e {
        Error::Parse(_) => e,
        other => perr(other.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_examples() {
        assert_eq!(parse_measure("kingman").unwrap().label(), "kingman");
        assert_eq!(parse_measure("bs").unwrap().label(), "bs");
        assert_eq!(parse_measure("beta:1.5").unwrap().label(), "beta:1.5");
        assert_eq!(parse_measure("dirac:0.3").unwrap().label(), "dirac:0.3");
        let m = parse_measure("mix:kingman*0.5+dirac:0.3*0.5").unwrap();
        assert_eq!(m.kingman_mass(), 0.5);
        assert_eq!(m.atoms()[0].mass, 0.5);
        let s = parse_measure("sweep:[(1,0.5,0.1),(2, 0.2, 0)]").unwrap();
        assert_eq!(s.kingman_mass(), 1.0);
        assert_eq!(s.atoms().len(), 2);
    }

    #[test]
    fn errors() {
        for bad in [
            "",
            "beta",
            "beta:x",
            "dirac:2",
            "foo",
            "mix:kingman+",
            "sweep:(1,2,3)",
            "sweep:[(1,2)]",
        ] {
            assert!(matches!(parse_measure(bad), Err(Error::Parse(_))), "{bad}");
        }
    }
}
