//! Flat `key = value` settings files.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Keys mirror the long command-line flags; `-` and `_` are interchangeable.

use std::path::PathBuf;

use crate::filter::FilterKind;
use crate::sim::QForm;

/// Settings that may come from a file or from flags. `None` means "not given".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub dt: Option<f64>,
    pub runs: Option<usize>,
    pub filters: Option<Vec<FilterKind>>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub kappa: Option<f64>,
    pub q_form: Option<QForm>,
    pub out: Option<PathBuf>,
}

impl Settings {
    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: Settings) -> Settings {
        Settings {
            seed: over.seed.or(self.seed),
            steps: over.steps.or(self.steps),
            dt: over.dt.or(self.dt),
            runs: over.runs.or(self.runs),
            filters: over.filters.or(self.filters),
            alpha: over.alpha.or(self.alpha),
            beta: over.beta.or(self.beta),
            kappa: over.kappa.or(self.kappa),
            q_form: over.q_form.or(self.q_form),
            out: over.out.or(self.out),
        }
    }
}

pub fn parse_filters(s: &str) -> Result<Vec<FilterKind>, String> {
    let kinds = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<FilterKind>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    if kinds.is_empty() {
        return Err("filter list is empty".into());
    }
    let mut seen = Vec::new();
    for k in kinds {
        if seen.contains(&k) {
            return Err(format!("filter '{k}' listed twice"));
        }
        seen.push(k);
    }
    Ok(seen)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("bad value '{value}' for {key}: {e}"))
}

/// Parses settings text. Unknown or repeated keys are errors.
pub fn parse_settings(text: &str) -> Result<Settings, String> {
    let mut s = Settings::default();
    let mut seen: Vec<String> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {lineno}: expected key = value"))?;
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        if seen.contains(&key) {
            return Err(format!("line {lineno}: duplicate key '{key}'"));
        }
        let at = |e: String| format!("line {lineno}: {e}");
        match key.as_str() {
            "seed" => s.seed = Some(parse_num(&key, value).map_err(at)?),
            "steps" => s.steps = Some(parse_num(&key, value).map_err(at)?),
            "dt" => s.dt = Some(parse_num(&key, value).map_err(at)?),
            "runs" => s.runs = Some(parse_num(&key, value).map_err(at)?),
            "alpha" => s.alpha = Some(parse_num(&key, value).map_err(at)?),
            "beta" => s.beta = Some(parse_num(&key, value).map_err(at)?),
            "kappa" => s.kappa = Some(parse_num(&key, value).map_err(at)?),
            "filters" => s.filters = Some(parse_filters(value).map_err(at)?),
            "q_form" => s.q_form = Some(value.parse().map_err(|e: crate::EstimationError| at(e.to_string()))?),
            "out" => {
                if value.is_empty() {
                    return Err(at("empty output directory".into()));
                }
                s.out = Some(PathBuf::from(value));
            }
            _ => return Err(format!("line {lineno}: unknown key '{key}'")),
        }
        seen.push(key);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let text = "# comment\nseed = 7\nsteps=10 # trailing\n\ndt = 0.5\nruns = 20\n\
                    filters = ukf, ekf\nalpha = 0.5\nbeta = 2\nkappa = 1\nq-form = diag\nout = res\n";
        let s = parse_settings(text).unwrap();
        assert_eq!(s.seed, Some(7));
        assert_eq!(s.steps, Some(10));
        assert_eq!(s.dt, Some(0.5));
        assert_eq!(s.runs, Some(20));
        assert_eq!(s.filters, Some(vec![FilterKind::Ukf, FilterKind::Ekf]));
        assert_eq!(s.alpha, Some(0.5));
        assert_eq!(s.kappa, Some(1.0));
        assert_eq!(s.q_form, Some(QForm::Diagonal));
        assert_eq!(s.out, Some(PathBuf::from("res")));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_settings("colour = red").unwrap_err().contains("unknown key"));
        assert!(parse_settings("seed 4").is_err());
        assert!(parse_settings("seed = -4").is_err());
        assert!(parse_settings("seed = 1\nseed = 2").unwrap_err().contains("duplicate"));
        assert!(parse_settings("filters = kf").is_err());
        assert!(parse_settings("filters = ukf,ukf").is_err());
        assert!(parse_settings("q_form = full").is_err());
    }

    #[test]
    fn overlay_prefers_override() {
        let file = Settings { seed: Some(1), steps: Some(5), ..Default::default() };
        let flags = Settings { seed: Some(2), ..Default::default() };
        let merged = file.overlay(flags);
        assert_eq!(merged.seed, Some(2));
        assert_eq!(merged.steps, Some(5));
    }
}
