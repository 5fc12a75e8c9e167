//! Run configuration: CLI flags, the optional key-value config file
//! (flags win on conflict), and the density-model id grammar.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use ctv_core::linalg::SymMatrix;
use ctv_core::measures::{normalize, CustomW, DensityModel, KappaParam, WSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SuiteId {
    Thm1,
    Thm2,
    Thm3,
    Decomp,
    Lemmas,
    Bl,
    BlQuant,
    Linearize,
    Poincare,
}

pub const ALL_SUITES: [SuiteId; 9] = [
    SuiteId::Thm1,
    SuiteId::Thm2,
    SuiteId::Thm3,
    SuiteId::Decomp,
    SuiteId::Lemmas,
    SuiteId::Bl,
    SuiteId::BlQuant,
    SuiteId::Linearize,
    SuiteId::Poincare,
];

impl SuiteId {
    pub fn parse(s: &str) -> Result<Vec<SuiteId>, String> {
        match s {
            "thm1" => Ok(vec![SuiteId::Thm1]),
            "thm2" => Ok(vec![SuiteId::Thm2]),
            "thm3" => Ok(vec![SuiteId::Thm3]),
            "decomp" => Ok(vec![SuiteId::Decomp]),
            "lemmas" => Ok(vec![SuiteId::Lemmas]),
            "bl" => Ok(vec![SuiteId::Bl]),
            "bl-quant" => Ok(vec![SuiteId::BlQuant]),
            "linearize" => Ok(vec![SuiteId::Linearize]),
            "poincare" => Ok(vec![SuiteId::Poincare]),
            "all" => Ok(ALL_SUITES.to_vec()),
            other => Err(format!(
                "unknown suite '{other}' (expected one of thm1|thm2|thm3|decomp|lemmas|bl|bl-quant|linearize|poincare|all)"
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SuiteId::Thm1 => "thm1",
            SuiteId::Thm2 => "thm2",
            SuiteId::Thm3 => "thm3",
            SuiteId::Decomp => "decomp",
            SuiteId::Lemmas => "lemmas",
            SuiteId::Bl => "bl",
            SuiteId::BlQuant => "bl-quant",
            SuiteId::Linearize => "linearize",
            SuiteId::Poincare => "poincare",
        }
    }

    /// Does the suite draw random samples (and therefore require a seed)?
    pub fn randomized(&self) -> bool {
        matches!(self, SuiteId::Lemmas)
    }

    pub fn default_tolerance(&self) -> f64 {
        match self {
            SuiteId::Thm1 | SuiteId::Thm2 | SuiteId::Thm3 => 1e-6,
            SuiteId::Decomp => 1e-4,
            SuiteId::Lemmas => 1e-12,
            SuiteId::Bl | SuiteId::BlQuant => 1e-9,
            SuiteId::Linearize => 1e-3,
            SuiteId::Poincare => 1e-8,
        }
    }
}

impl fmt::Display for SuiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(format!("unknown format '{other}' (expected json|csv)")),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        }
    }
}

/// Fully resolved run configuration.
#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub suites: Vec<SuiteId>,
    pub suite_arg: String,
    pub models: Vec<String>,
    pub grid: usize,
    pub eps: Vec<f64>,
    pub seed: Option<u64>,
    pub tol_overrides: BTreeMap<String, f64>,
    pub c_kappa: f64,
    pub h_override: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub jobs: usize,
}

impl SuiteConfig {
    pub fn tolerance(&self, suite: SuiteId) -> f64 {
        self.tol_overrides
            .get(suite.name())
            .or_else(|| self.tol_overrides.get("*"))
            .copied()
            .unwrap_or_else(|| suite.default_tolerance())
    }

    /// Validation beyond per-flag parsing: seed presence for randomized
    /// suites and model-id syntax.
    pub fn validate(&self) -> Result<(), String> {
        if self.seed.is_none() && self.suites.iter().any(|s| s.randomized()) {
            return Err(String::from(
                "a --seed is mandatory for randomized suites (lemmas)",
            ));
        }
        for id in &self.models {
            parse_model_id(id)?;
        }
        for key in self.tol_overrides.keys() {
            if key != "*" && SuiteId::parse(key).is_err() {
                return Err(format!("tolerance override names unknown suite '{key}'"));
            }
        }
        Ok(())
    }
}

/// Parses "key=value,key=value" parameter lists.
fn parse_params(s: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for part in s.split(',') {
        if part.is_empty() {
            continue;
        }
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got '{part}'"))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn get_f64(map: &BTreeMap<String, String>, key: &str) -> Result<f64, String> {
    map.get(key)
        .ok_or_else(|| format!("missing parameter '{key}'"))?
        .parse::<f64>()
        .map_err(|e| format!("parameter '{key}': {e}"))
}

fn get_usize(map: &BTreeMap<String, String>, key: &str) -> Result<usize, String> {
    map.get(key)
        .ok_or_else(|| format!("missing parameter '{key}'"))?
        .parse::<usize>()
        .map_err(|e| format!("parameter '{key}': {e}"))
}

/// Builds a normalized density model from its string id:
/// `ball:sigma=1,beta=2,n=1`, `cauchy:beta=2,n=1` or `custom:<file>`.
pub fn parse_model_id(id: &str) -> Result<DensityModel, String> {
    let (kind, rest) = id
        .split_once(':')
        .ok_or_else(|| format!("model id '{id}' must look like kind:params"))?;
    match kind {
        "ball" => {
            let p = parse_params(rest)?;
            let sigma = get_f64(&p, "sigma")?;
            let beta = get_f64(&p, "beta")?;
            let n = get_usize(&p, "n")?;
            let w = WSpec::quadratic_ball(sigma, n).map_err(|e| e.to_string())?;
            let kp = KappaParam::case1(beta).map_err(|e| e.to_string())?;
            normalize(w, kp).map_err(|e| e.to_string())
        }
        "cauchy" => {
            let p = parse_params(rest)?;
            let beta = get_f64(&p, "beta")?;
            let n = get_usize(&p, "n")?;
            let w = WSpec::quadratic_cauchy(n);
            let kp = KappaParam::case2(beta, n).map_err(|e| e.to_string())?;
            normalize(w, kp).map_err(|e| e.to_string())
        }
        "custom" => {
            let text = std::fs::read_to_string(rest)
                .map_err(|e| format!("custom model file '{rest}': {e}"))?;
            parse_custom_model(&text)
        }
        other => Err(format!(
            "unknown model kind '{other}' (expected ball|cauchy|custom)"
        )),
    }
}

/// Custom model file: key=value lines (# comments). Keys: case (1|2),
/// beta, n, halfwidth, coeffs (c0,c1,c2,... giving
/// W(x) = c0 + c1 |x|^2 + c2 |x|^4 + ...).
pub fn parse_custom_model(text: &str) -> Result<DensityModel, String> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("custom model: expected key = value, got '{line}'"))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let case = get_usize(&map, "case")?;
    let beta = get_f64(&map, "beta")?;
    let n = get_usize(&map, "n")?;
    let halfwidth = get_f64(&map, "halfwidth")?;
    let coeffs: Vec<f64> = map
        .get("coeffs")
        .ok_or("custom model: missing 'coeffs'")?
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if coeffs.is_empty() {
        return Err(String::from("custom model: empty coefficient list"));
    }

    // W(x) = sum_k c_k r^{2k} with r = |x|; gradient and Hessian follow the
    // radial chain rule: grad = sum 2k c_k r^{2k-2} x,
    // hess = sum 2k c_k r^{2k-2} I + 2k (2k-2) c_k r^{2k-4} x x^T.
    let c_val = coeffs.clone();
    let value = Arc::new(move |x: &[f64]| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        c_val
            .iter()
            .enumerate()
            .map(|(k, &c)| c * r2.powi(k as i32))
            .sum()
    });
    let c_grad = coeffs.clone();
    let gradient = Arc::new(move |x: &[f64]| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let radial: f64 = c_grad
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| 2.0 * k as f64 * c * r2.powi(k as i32 - 1))
            .sum();
        x.iter().map(|&v| radial * v).collect()
    });
    let c_hess = coeffs.clone();
    let dim = n;
    let hessian = Arc::new(move |x: &[f64]| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let radial: f64 = c_hess
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| 2.0 * k as f64 * c * r2.powi(k as i32 - 1))
            .sum();
        let second: f64 = c_hess
            .iter()
            .enumerate()
            .skip(2)
            .map(|(k, &c)| {
                let kk = k as f64;
                2.0 * kk * (2.0 * kk - 2.0) * c * r2.powi(k as i32 - 2)
            })
            .sum();
        let mut h = SymMatrix::scaled_identity(dim, radial);
        for i in 0..dim {
            for j in i..dim {
                h.set(i, j, h.get(i, j) + second * x[i] * x[j]);
            }
        }
        h
    });
    let custom = CustomW {
        value,
        gradient,
        hessian,
        halfwidth,
    };
    let w = WSpec::custom(custom, n).map_err(|e| e.to_string())?;
    let kp = match case {
        1 => KappaParam::case1(beta),
        2 => KappaParam::case2(beta, n),
        other => return Err(format!("custom model: case must be 1 or 2, got {other}")),
    }
    .map_err(|e| e.to_string())?;
    normalize(w, kp).map_err(|e| e.to_string())
}

/// Key-value config file mirroring the flags; '#' starts a comment.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", lineno + 1))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn parse_eps_list(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        if part.trim().is_empty() {
            continue;
        }
        out.push(
            part.trim()
                .parse::<f64>()
                .map_err(|e| format!("epsilon '{part}': {e}"))?,
        );
    }
    if out.is_empty() {
        return Err(String::from("empty epsilon list"));
    }
    Ok(out)
}

/// "suite=value" or a bare value applying to every selected suite ("*").
pub fn parse_tol_override(s: &str) -> Result<(String, f64), String> {
    if let Some((k, v)) = s.split_once('=') {
        let val = v
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("tolerance '{s}': {e}"))?;
        Ok((k.trim().to_string(), val))
    } else {
        let val = s
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("tolerance '{s}': {e}"))?;
        Ok((String::from("*"), val))
    }
}
