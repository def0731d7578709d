//! Model assembly from a JSON file and inline `family:key=val,...` flags.

use std::path::Path;

use resetsearch::model::ModelSpec;
use serde_json::{Map, Value};

use crate::output::CliError;

/// Parses `family:key=val,...`. A lone value after the colon binds to the
/// family's primary parameter (`constant:2` is `r = 2`).
fn parse_inline(text: &str, kind: &str, resolve: fn(&str) -> Option<(&'static str, &'static str)>) -> Result<Value, CliError> {
    let (fam, rest) = match text.split_once(':') {
        Some((f, r)) => (f.trim(), r.trim()),
        None => (text.trim(), ""),
    };
    let (family, primary) = resolve(fam).ok_or_else(|| CliError::parse(format!("unknown {kind} family '{fam}'")))?;
    let mut obj = Map::new();
    obj.insert("family".into(), Value::from(family));
    for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, val) = match part.split_once('=') {
            Some((k, v)) => (k.trim(), v.trim()),
            None if !primary.is_empty() && obj.len() == 1 => (primary, part),
            None => return Err(CliError::parse(format!("expected key=value in {kind} spec, got '{part}'"))),
        };
        let num: f64 = val
            .parse()
            .map_err(|_| CliError::parse(format!("{kind} parameter {key}: '{val}' is not a number")))?;
        obj.insert(key.into(), Value::from(num));
    }
    Ok(Value::Object(obj))
}

fn rate_family(name: &str) -> Option<(&'static str, &'static str)> {
    Some(match name {
        "constant" | "const" => ("constant", "r"),
        "powlaw" | "power_law" | "power" => ("power_law", ""),
        "quad" | "quad_decay" => ("quad_decay", ""),
        "stretched" | "stretched_exp" => ("stretched_exp", ""),
        _ => return None,
    })
}

fn target_family(name: &str) -> Option<(&'static str, &'static str)> {
    Some(match name {
        "exp2" | "exponential" => ("exp2", "beta"),
        "uniform" => ("uniform", "A"),
        "triangular" => ("triangular", "A"),
        "point" => ("point", "a"),
        _ => return None,
    })
}

pub fn parse_rate(text: &str) -> Result<Value, CliError> {
    parse_inline(text, "rate", rate_family)
}

pub fn parse_target(text: &str) -> Result<Value, CliError> {
    parse_inline(text, "target", target_family)
}

/// `full`, `interval:A=1` or `interval:L1=1,L2=2`.
pub fn parse_support(text: &str) -> Result<Value, CliError> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    match kind.trim() {
        "full" => Ok(serde_json::json!({ "kind": "full" })),
        "interval" => {
            let mut obj = Map::new();
            obj.insert("kind".into(), Value::from("interval"));
            for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let (key, val) = part
                    .split_once('=')
                    .ok_or_else(|| CliError::parse(format!("expected key=value in support spec, got '{part}'")))?;
                let num: f64 = val
                    .trim()
                    .parse()
                    .map_err(|_| CliError::parse(format!("support parameter {key}: '{val}' is not a number")))?;
                match key.trim() {
                    "A" => {
                        obj.insert("L1".into(), Value::from(num));
                        obj.insert("L2".into(), Value::from(num));
                    }
                    k @ ("L1" | "L2") => {
                        obj.insert(k.into(), Value::from(num));
                    }
                    k => return Err(CliError::parse(format!("unknown support parameter '{k}'"))),
                }
            }
            if !(obj.contains_key("L1") && obj.contains_key("L2")) {
                return Err(CliError::parse("interval support needs A or both L1 and L2"));
            }
            Ok(Value::Object(obj))
        }
        other => Err(CliError::parse(format!("unknown support kind '{other}'"))),
    }
}

/// Model flags shared by every subcommand.
#[derive(clap::Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Model JSON file; flags below override its fields.
    #[arg(long, value_name = "FILE")]
    pub model: Option<std::path::PathBuf>,
    /// Diffusion coefficient.
    #[arg(long = "D", value_name = "D", allow_negative_numbers = true)]
    pub d: Option<f64>,
    /// Rate, e.g. `constant:2`, `quad:m=3,gamma=1`, `powlaw:c=1,gamma=1,l=-1`,
    /// `stretched:lambda=1,gamma=1,l=0.5`.
    #[arg(long)]
    pub rate: Option<String>,
    /// Target law, e.g. `exp2:beta=1`, `uniform:A=1`, `triangular:A=1`, `point:a=2`.
    #[arg(long)]
    pub target: Option<String>,
    /// `full` or `interval:A=1` / `interval:L1=1,L2=2`.
    #[arg(long)]
    pub support: Option<String>,
}

impl ModelArgs {
    /// File values first, then flag overrides. A flag `--D` also replaces
    /// the `D` carried by `quad_decay` and `stretched_exp` rates.
    pub fn build(&self) -> Result<ModelSpec, CliError> {
        let mut root = match &self.model {
            Some(path) => read_json(path)?,
            None => Value::Object(Map::new()),
        };
        let obj = root
            .as_object_mut()
            .ok_or_else(|| CliError::parse("model file must hold a JSON object"))?;
        if let Some(d) = self.d {
            obj.insert("D".into(), Value::from(d));
            if let Some(rate) = obj.get_mut("rate").and_then(Value::as_object_mut) {
                if rate.contains_key("D") {
                    rate.insert("D".into(), Value::from(d));
                }
            }
        }
        if let Some(r) = &self.rate {
            obj.insert("rate".into(), parse_rate(r)?);
        }
        if let Some(t) = &self.target {
            obj.insert("target".into(), parse_target(t)?);
        }
        if let Some(s) = &self.support {
            obj.insert("support".into(), parse_support(s)?);
        }
        if !obj.contains_key("D") {
            return Err(CliError::parse("the diffusion coefficient is missing (use --D or a model file)"));
        }
        if !obj.contains_key("rate") {
            return Err(CliError::parse("the rate is missing (use --rate or a model file)"));
        }
        ModelSpec::from_json(&root.to_string()).map_err(CliError::from)
    }
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}
