//! Run configuration: an INI file with `[model]`, `[v_family]` and `[run]` sections.
//!
//! ```text
//! [model]
//! kind = special-case          # or gig1-custom
//! beta1 = 3
//! beta2 = 4
//! beta0 = 1.5
//!
//! # gig1-custom: phases, min_k, and blocks separated by ';', entries row-major.
//! # b is optional; without it level 0 reflects (B(0) = sum_{k <= 0} A(k), B(l) = A(l)).
//! # phases = 1
//! # min_k = -1
//! # a = 0.5; 0.3; 0.2
//!
//! [v_family]                   # gig1-custom only
//! family = polynomial          # or moderately-exponential, logarithmic
//! beta0 = 1.5
//! x0 = 2
//!
//! [run]
//! tolerance = 0.5
//! n_grid = 8, 16, 32
//! n_ref = 4096
//! m = 100                      # fixes m in sweeps; otherwise m* is searched up to m_max
//! m_max = 1e300
//! b_scale = 1
//! ```
//!
//! Every value is validated when the file is parsed. Command-line flags override file values.

use std::path::Path;

use ini::{Ini, Properties};

use crate::blockmatrix::Block;
use crate::error::{Error, Result};
use crate::gig1::{validate_kernel, TabulatedGiG1, VFamily};
use crate::special::{closed_form_params, SpecialCaseParams};

#[derive(Debug, Clone)]
pub enum Model {
    SpecialCase { beta1: f64, beta2: f64, beta0: f64 },
    Gig1Custom { kernel: TabulatedGiG1, v_family: VFamily },
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::SpecialCase { .. } => "special-case",
            Model::Gig1Custom { .. } => "gig1-custom",
        }
    }

    pub fn special_params(&self) -> Result<SpecialCaseParams> {
        match *self {
            Model::SpecialCase { beta1, beta2, beta0 } => closed_form_params(beta1, beta2, beta0),
            Model::Gig1Custom { .. } => Err(Error::Config("this command needs model kind special-case".into())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: Model,
    pub tolerance: Option<f64>,
    pub n_grid: Vec<usize>,
    pub n_ref: usize,
    pub m: Option<f64>,
    pub m_max: f64,
    pub b_scale: f64,
}

/// Values that may come from either the file or the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub beta0: Option<f64>,
    pub tolerance: Option<f64>,
    pub n_grid: Option<Vec<usize>>,
    pub n_ref: Option<usize>,
    pub m: Option<f64>,
    pub m_max: Option<f64>,
    pub b_scale: Option<f64>,
}

pub const DEFAULT_N_REF: usize = 4096;

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Drops `# ...` preceded by whitespace; `;` is left alone because it separates blocks.
fn strip_inline_comments(text: &str) -> String {
    text.lines()
        .map(|line| {
            let cut = line
                .char_indices()
                .find(|&(i, c)| c == '#' && i > 0 && line[..i].ends_with(char::is_whitespace))
                .map_or(line.len(), |(i, _)| i);
            line[..cut].trim_end()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn get_f64(p: Option<&Properties>, key: &str) -> Result<Option<f64>> {
    match p.and_then(|p| p.get(key)) {
        None => Ok(None),
        Some(s) => s
            .trim()
            .parse::<f64>()
            .map(Some)
            .map_err(|_| cfg_err(format!("{key}: not a number: {s:?}"))),
    }
}

fn get_usize(p: Option<&Properties>, key: &str) -> Result<Option<usize>> {
    match p.and_then(|p| p.get(key)) {
        None => Ok(None),
        Some(s) => s
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| cfg_err(format!("{key}: not a nonnegative integer: {s:?}"))),
    }
}

fn check_keys(p: Option<&Properties>, section: &str, allowed: &[&str]) -> Result<()> {
    if let Some(p) = p {
        for (k, _) in p.iter() {
            if !allowed.contains(&k) {
                return Err(cfg_err(format!("unknown key {k:?} in [{section}]")));
            }
        }
    }
    Ok(())
}

/// Parses `8, 16, 32` (commas or whitespace).
pub fn parse_n_grid(s: &str) -> Result<Vec<usize>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            let n: usize = t.parse().map_err(|_| cfg_err(format!("n_grid: bad entry {t:?}")))?;
            if n == 0 {
                return Err(cfg_err("n_grid entries must be at least 1"));
            }
            Ok(n)
        })
        .collect()
}

fn parse_blocks(s: &str, d: usize, key: &str) -> Result<Vec<Block>> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|blk| {
            let xs: Vec<f64> = blk
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|_| cfg_err(format!("{key}: bad number {t:?}"))))
                .collect::<Result<_>>()?;
            if xs.len() != d * d {
                return Err(cfg_err(format!("{key}: block has {} entries, expected {}", xs.len(), d * d)));
            }
            Ok(Block::from_row_slice(d, d, &xs))
        })
        .collect()
}

fn parse_v_family(p: Option<&Properties>) -> Result<VFamily> {
    check_keys(p, "v_family", &["family", "beta0", "x0", "c0", "alpha", "gamma0"])?;
    let family = p.and_then(|p| p.get("family")).ok_or_else(|| cfg_err("[v_family] family is required"))?;
    let need = |key: &str| -> Result<f64> {
        get_f64(p, key)?.ok_or_else(|| cfg_err(format!("[v_family] {key} is required for {family}")))
    };
    let vf = match family.trim() {
        "polynomial" => VFamily::polynomial(need("beta0")?, need("x0")?),
        "moderately-exponential" => VFamily::moderately_exponential(need("c0")?, need("alpha")?, need("x0")?),
        "logarithmic" => VFamily::logarithmic(need("gamma0")?, need("x0")?),
        other => return Err(cfg_err(format!("unknown v_family {other:?}"))),
    };
    vf.map_err(|e| cfg_err(e.to_string()))
}

impl RunConfig {
    /// Defaults: the example with `(beta1, beta2, beta0) = (3, 4, 1.5)`.
    pub fn from_overrides(o: &Overrides) -> Result<Self> {
        Self::build(None, o)
    }

    pub fn from_file(path: &Path, o: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_str_with(&text, o)
    }

    pub fn from_str_with(text: &str, o: &Overrides) -> Result<Self> {
        let ini = Ini::load_from_str(&strip_inline_comments(text)).map_err(|e| cfg_err(e.to_string()))?;
        Self::build(Some(&ini), o)
    }

    fn build(ini: Option<&Ini>, o: &Overrides) -> Result<Self> {
        if let Some(ini) = ini {
            for (sec, props) in ini.iter() {
                match sec {
                    Some("model") | Some("v_family") | Some("run") => {}
                    None if props.is_empty() => {}
                    None => return Err(cfg_err("keys outside a section")),
                    Some(other) => return Err(cfg_err(format!("unknown section [{other}]"))),
                }
            }
        }
        let model_p = ini.and_then(|i| i.section(Some("model")));
        let vf_p = ini.and_then(|i| i.section(Some("v_family")));
        let run_p = ini.and_then(|i| i.section(Some("run")));
        let kind = model_p.and_then(|p| p.get("kind")).map(str::trim).unwrap_or("special-case");
        let model = match kind {
            "special-case" => {
                check_keys(model_p, "model", &["kind", "beta1", "beta2", "beta0"])?;
                if vf_p.is_some() {
                    return Err(cfg_err("[v_family] applies to gig1-custom only; the example fixes V"));
                }
                let beta1 = o.beta1.or(get_f64(model_p, "beta1")?).unwrap_or(3.0);
                let beta2 = o.beta2.or(get_f64(model_p, "beta2")?).unwrap_or(4.0);
                let beta0 = o.beta0.or(get_f64(model_p, "beta0")?).unwrap_or(1.5);
                closed_form_params(beta1, beta2, beta0)?;
                Model::SpecialCase { beta1, beta2, beta0 }
            }
            "gig1-custom" => {
                check_keys(model_p, "model", &["kind", "phases", "min_k", "a", "b"])?;
                if o.beta1.is_some() || o.beta2.is_some() || o.beta0.is_some() {
                    return Err(cfg_err("beta flags apply to the special-case model only"));
                }
                let d = get_usize(model_p, "phases")?.ok_or_else(|| cfg_err("[model] phases is required"))?;
                let min_k = model_p
                    .and_then(|p| p.get("min_k"))
                    .ok_or_else(|| cfg_err("[model] min_k is required"))?
                    .trim()
                    .parse::<i64>()
                    .map_err(|_| cfg_err("[model] min_k must be an integer"))?;
                let a_text = model_p.and_then(|p| p.get("a")).ok_or_else(|| cfg_err("[model] a is required"))?;
                let a = parse_blocks(a_text, d, "a")?;
                let kernel = match model_p.and_then(|p| p.get("b")) {
                    Some(b_text) => TabulatedGiG1::new(min_k, a, parse_blocks(b_text, d, "b")?)?,
                    None => TabulatedGiG1::reflected(min_k, a)?,
                };
                validate_kernel(&kernel)?;
                Model::Gig1Custom { kernel, v_family: parse_v_family(vf_p)? }
            }
            other => return Err(cfg_err(format!("unknown model kind {other:?}"))),
        };
        check_keys(run_p, "run", &["tolerance", "n_grid", "n_ref", "m", "m_max", "b_scale"])?;
        let tolerance = o.tolerance.or(get_f64(run_p, "tolerance")?);
        if let Some(e) = tolerance {
            if !(e > 0.0 && e < 2.0) {
                return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 2), got {e}")));
            }
        }
        let n_grid = match &o.n_grid {
            Some(g) => g.clone(),
            None => match run_p.and_then(|p| p.get("n_grid")) {
                Some(s) => parse_n_grid(s)?,
                None => Vec::new(),
            },
        };
        let n_ref = o.n_ref.or(get_usize(run_p, "n_ref")?).unwrap_or(DEFAULT_N_REF);
        if n_ref == 0 {
            return Err(cfg_err("n_ref must be at least 1"));
        }
        let m = o.m.or(get_f64(run_p, "m")?);
        if let Some(m) = m {
            crate::bounds::check_count("m", m).map_err(|e| cfg_err(e.to_string()))?;
        }
        let m_max = o.m_max.or(get_f64(run_p, "m_max")?).unwrap_or(1e300);
        if !(m_max >= 1.0 && m_max.is_finite()) {
            return Err(cfg_err(format!("m_max must be finite and at least 1, got {m_max}")));
        }
        let b_scale = o.b_scale.or(get_f64(run_p, "b_scale")?).unwrap_or(1.0);
        if !(b_scale > 0.0 && b_scale.is_finite()) {
            return Err(cfg_err(format!("b_scale must be positive, got {b_scale}")));
        }
        Ok(RunConfig { model, tolerance, n_grid, n_ref, m, m_max, b_scale })
    }

    /// `n_ref >= 8 max(n_grid)`.
    pub fn check_reference_margin(&self) -> Result<()> {
        if let Some(&worst) = self.n_grid.iter().max() {
            if self.n_ref < worst.saturating_mul(8) {
                return Err(cfg_err(format!(
                    "n_ref = {} must be at least 8 x max(n_grid) = {}",
                    self.n_ref,
                    worst.saturating_mul(8)
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_example() {
        let c = RunConfig::from_overrides(&Overrides::default()).unwrap();
        assert!(matches!(c.model, Model::SpecialCase { beta1, .. } if beta1 == 3.0));
        assert_eq!(c.n_ref, DEFAULT_N_REF);
        assert!(c.n_grid.is_empty());
    }

    #[test]
    fn inline_comments() {
        let text = "[model]\nkind = special-case   # or gig1-custom\nbeta0 = 1.5#2\n# whole line\n";
        assert_eq!(strip_inline_comments(text), "[model]\nkind = special-case\nbeta0 = 1.5#2\n# whole line");
        let c = RunConfig::from_str_with("[model]\nkind = special-case # note\nbeta1 = 3.5 # note\n", &Overrides::default());
        assert!(matches!(c.unwrap().model, Model::SpecialCase { beta1, .. } if beta1 == 3.5));
    }

    #[test]
    fn flags_override_file() {
        let text = "[model]\nkind = special-case\nbeta1 = 3.5\n[run]\nn_grid = 8, 16\ntolerance = 0.5\n";
        let o = Overrides { tolerance: Some(1.0), ..Default::default() };
        let c = RunConfig::from_str_with(text, &o).unwrap();
        assert_eq!(c.tolerance, Some(1.0));
        assert_eq!(c.n_grid, vec![8, 16]);
        assert!(matches!(c.model, Model::SpecialCase { beta1, .. } if beta1 == 3.5));
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[model]\nbeta0 = 3\n",
            "[run]\ntolerance = 2\n",
            "[run]\nn_grid = 8, x\n",
            "[run]\nbogus = 1\n",
            "[extra]\nx = 1\n",
            "[model]\nkind = gig1-custom\nphases = 1\nmin_k = -1\na = 0.5; 0.6\n[v_family]\nfamily = polynomial\nbeta0 = 1.5\nx0 = 2\n",
        ] {
            assert!(RunConfig::from_str_with(text, &Overrides::default()).is_err(), "{text}");
        }
    }

    #[test]
    fn custom_model_parses() {
        let text = "[model]\nkind = gig1-custom\nphases = 1\nmin_k = -1\na = 0.6; 0.1; 0.3\n\
                    [v_family]\nfamily = polynomial\nbeta0 = 1.5\nx0 = 2\n";
        let c = RunConfig::from_str_with(text, &Overrides::default()).unwrap();
        assert_eq!(c.model.kind(), "gig1-custom");
    }

    #[test]
    fn reference_margin() {
        let o = Overrides { n_grid: Some(vec![8, 64]), n_ref: Some(500), ..Default::default() };
        let c = RunConfig::from_overrides(&o).unwrap();
        assert!(c.check_reference_margin().is_err());
        let o = Overrides { n_grid: Some(vec![8, 64]), n_ref: Some(512), ..Default::default() };
        assert!(RunConfig::from_overrides(&o).unwrap().check_reference_margin().is_ok());
    }
}
