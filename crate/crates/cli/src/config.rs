//! Sectioned key = value system configs.
//!
//! Grammar: `[section]` headers, `key = value` pairs, `#` or `;` comments,
//! blank lines ignored. Polynomial coefficients are whitespace-separated in
//! descending powers of s, the way they are written on paper.
//!
//! Sections: `[plant]` (either `num`/`den` or `frf = <csv path>`, plus
//! `delay` seconds), `[controller]` (`family = reset_pid` with kp/wi/wd/wt
//! and optional kg, or explicit c1_num..cs_den lists), `[reset]`
//! (kind = ci|pci|gfore, wr, wk, dr, gamma, br), `[analysis]` (wmin, wmax,
//! points_per_decade, delay_mode = exact|pade:<k>).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rcstab_core::frf::{DelayMode, FrfData, PlantModel};
use rcstab_core::poly::{Polynomial, RationalTf};
use rcstab_core::reset::{
    build_example_controller, ControllerParams, LoopComponents, ResetElement,
};

use crate::CliError;

#[derive(Debug, Clone, Copy)]
pub struct AnalysisSettings {
    pub wmin: f64,
    pub wmax: f64,
    pub points_per_decade: f64,
    pub delay_mode: DelayMode,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            wmin: 1e-2,
            wmax: 1e6,
            points_per_decade: 400.0,
            delay_mode: DelayMode::Exact,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub lc: LoopComponents,
    pub analysis: AnalysisSettings,
}

struct RawEntry {
    line: usize,
    value: String,
    consumed: std::cell::Cell<bool>,
}

struct Section {
    line: usize,
    entries: BTreeMap<String, RawEntry>,
}

struct RawConfig {
    path: PathBuf,
    sections: BTreeMap<String, Section>,
}

impl RawConfig {
    fn schema_err(&self, line: usize, message: impl Into<String>) -> CliError {
        CliError::Schema {
            path: self.path.display().to_string(),
            line,
            message: message.into(),
        }
    }

    fn section(&self, name: &str) -> Option<&Section> {
        self.sections.get(name)
    }

    fn get(&self, section: &str, key: &str) -> Option<&RawEntry> {
        let e = self.sections.get(section)?.entries.get(key)?;
        e.consumed.set(true);
        Some(e)
    }

    fn f64_opt(&self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<f64>()
                .map(Some)
                .map_err(|err| self.schema_err(e.line, format!("field `{key}`: {err}"))),
        }
    }

    fn f64_req(&self, section: &str, key: &str, section_line: usize) -> Result<f64, CliError> {
        self.f64_opt(section, key)?.ok_or_else(|| {
            self.schema_err(
                section_line,
                format!("missing field `{key}` in [{section}]"),
            )
        })
    }

    /// Whitespace-separated descending coefficients -> ascending polynomial.
    fn poly_opt(&self, section: &str, key: &str) -> Result<Option<Polynomial>, CliError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => {
                let mut desc = Vec::new();
                for tok in e.value.split_whitespace() {
                    desc.push(tok.parse::<f64>().map_err(|err| {
                        self.schema_err(
                            e.line,
                            format!("field `{key}`: bad coefficient `{tok}`: {err}"),
                        )
                    })?);
                }
                if desc.is_empty() {
                    return Err(self.schema_err(e.line, format!("field `{key}` is empty")));
                }
                desc.reverse();
                Ok(Some(Polynomial::new(desc)))
            }
        }
    }

    fn unknown_key_check(&self) -> Result<(), CliError> {
        for (name, section) in &self.sections {
            for (key, entry) in &section.entries {
                if !entry.consumed.get() {
                    return Err(
                        self.schema_err(entry.line, format!("unknown field `{key}` in [{name}]"))
                    );
                }
            }
        }
        Ok(())
    }
}

fn parse_raw(path: &Path, text: &str) -> Result<RawConfig, CliError> {
    let mut raw = RawConfig {
        path: path.to_path_buf(),
        sections: BTreeMap::new(),
    };
    let mut current: Option<String> = None;
    for (idx, line_raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match line_raw.find(['#', ';']) {
            Some(pos) => &line_raw[..pos],
            None => line_raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| raw.schema_err(line_no, "unterminated section header"))?;
            let name = name.trim().to_ascii_lowercase();
            if raw.sections.contains_key(&name) {
                return Err(raw.schema_err(line_no, format!("duplicate section [{name}]")));
            }
            raw.sections.insert(
                name.clone(),
                Section {
                    line: line_no,
                    entries: BTreeMap::new(),
                },
            );
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(raw.schema_err(line_no, "expected `key = value`"));
        };
        let section = current
            .as_ref()
            .ok_or_else(|| raw.schema_err(line_no, "key outside any [section]"))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();
        let entries = &mut raw.sections.get_mut(section).unwrap().entries;
        if entries.contains_key(&key) {
            return Err(raw.schema_err(line_no, format!("duplicate field `{key}`")));
        }
        entries.insert(
            key,
            RawEntry {
                line: line_no,
                value,
                consumed: std::cell::Cell::new(false),
            },
        );
    }
    Ok(raw)
}

pub fn parse_delay_mode(s: &str) -> Result<DelayMode, String> {
    let s = s.trim().to_ascii_lowercase();
    if s == "exact" {
        return Ok(DelayMode::Exact);
    }
    if let Some(k) = s.strip_prefix("pade:") {
        let k: u32 = k
            .parse()
            .map_err(|e| format!("bad pade order `{k}`: {e}"))?;
        if k == 0 {
            return Err("pade order must be >= 1".into());
        }
        return Ok(DelayMode::Pade(k));
    }
    Err(format!(
        "delay mode must be `exact` or `pade:<k>`, got `{s}`"
    ))
}

/// Parse and validate a system config file.
pub fn parse_system_config(path: &Path) -> Result<SystemConfig, CliError> {
    let text = std::fs::read_to_string(path)?;
    let raw = parse_raw(path, &text)?;

    // [plant]
    let plant_section = raw
        .section("plant")
        .ok_or_else(|| raw.schema_err(1, "missing [plant] section"))?;
    let plant_line = plant_section.line;
    let num = raw.poly_opt("plant", "num")?;
    let den = raw.poly_opt("plant", "den")?;
    let frf = raw.get("plant", "frf").map(|e| (e.line, e.value.clone()));
    let delay_t = raw.f64_opt("plant", "delay")?.unwrap_or(0.0);
    if delay_t < 0.0 || !delay_t.is_finite() {
        return Err(raw.schema_err(plant_line, "field `delay` must be finite and >= 0"));
    }
    let plant = match (num, den, frf) {
        (Some(num), Some(den), None) => {
            let tf = RationalTf::new(num, den)
                .map_err(|e| raw.schema_err(plant_line, format!("plant: {e}")))?;
            PlantModel::rational(tf, delay_t)
                .map_err(|e| raw.schema_err(plant_line, format!("plant: {e}")))?
        }
        (None, None, Some((line, rel))) => {
            let frf_path = path.parent().unwrap_or(Path::new(".")).join(&rel);
            let data = FrfData::load(&frf_path)
                .map_err(|e| raw.schema_err(line, format!("frf `{rel}`: {e}")))?;
            PlantModel::measured(data, delay_t)
                .map_err(|e| raw.schema_err(line, format!("plant: {e}")))?
        }
        (Some(_), None, None) | (None, Some(_), None) => {
            return Err(raw.schema_err(plant_line, "rational plant needs both `num` and `den`"))
        }
        (None, None, None) => {
            return Err(raw.schema_err(plant_line, "plant needs `num`/`den` or `frf`"))
        }
        _ => {
            return Err(raw.schema_err(
                plant_line,
                "exactly one plant variant: `num`/`den` or `frf`, not both",
            ))
        }
    };

    // [reset]
    let reset_section = raw
        .section("reset")
        .ok_or_else(|| raw.schema_err(1, "missing [reset] section"))?;
    let reset_line = reset_section.line;
    let kind = raw
        .get("reset", "kind")
        .map(|e| (e.line, e.value.to_ascii_lowercase()))
        .ok_or_else(|| raw.schema_err(reset_line, "missing field `kind` in [reset]"))?;
    let wr = raw.f64_opt("reset", "wr")?.unwrap_or(0.0);
    let wk = raw.f64_req("reset", "wk", reset_line)?;
    let dr = raw.f64_opt("reset", "dr")?.unwrap_or(0.0);
    let gamma = raw.f64_req("reset", "gamma", reset_line)?;
    let br = raw.f64_opt("reset", "br")?.unwrap_or(1.0);
    if !(gamma > -1.0 && gamma < 1.0) {
        return Err(raw.schema_err(reset_line, format!("gamma = {gamma} outside (-1, 1)")));
    }
    if !wk.is_finite() || wk <= 0.0 {
        return Err(raw.schema_err(reset_line, format!("wk = {wk} must be positive")));
    }
    if br == 0.0 {
        return Err(raw.schema_err(reset_line, "br must be nonzero"));
    }
    match kind.1.as_str() {
        "ci" => {
            if wr != 0.0 {
                return Err(raw.schema_err(kind.0, "kind = ci requires wr = 0"));
            }
            if dr != 0.0 {
                return Err(raw.schema_err(kind.0, "kind = ci requires dr = 0 (use pci)"));
            }
        }
        "pci" => {
            if wr != 0.0 {
                return Err(raw.schema_err(kind.0, "kind = pci requires wr = 0"));
            }
            if dr == 0.0 {
                return Err(raw.schema_err(kind.0, "kind = pci requires dr != 0"));
            }
        }
        "gfore" => {
            if !wr.is_finite() || wr <= 0.0 {
                return Err(raw.schema_err(kind.0, "kind = gfore requires wr > 0"));
            }
        }
        other => {
            return Err(raw.schema_err(kind.0, format!("unknown reset kind `{other}`")));
        }
    }
    let reset = ResetElement::from_raw(-wr, br, wk / br, dr, gamma);

    // [controller]
    let ctrl_section = raw
        .section("controller")
        .ok_or_else(|| raw.schema_err(1, "missing [controller] section"))?;
    let ctrl_line = ctrl_section.line;
    let family = raw
        .get("controller", "family")
        .map(|e| (e.line, e.value.clone()));
    let mut lc = match family {
        Some((line, fam)) if fam.eq_ignore_ascii_case("reset_pid") => {
            let params = ControllerParams {
                k_p: raw.f64_req("controller", "kp", ctrl_line)?,
                omega_i: raw.f64_req("controller", "wi", ctrl_line)?,
                omega_d: raw.f64_req("controller", "wd", ctrl_line)?,
                omega_t: raw.f64_req("controller", "wt", ctrl_line)?,
                k_g: raw.f64_opt("controller", "kg")?,
                gamma,
                d_r: dr,
                omega_r: wr,
                omega_k: wk,
            };
            if params.k_g.is_none() && wr == 0.0 {
                return Err(raw.schema_err(line, "kg is required when wr = 0"));
            }
            build_example_controller(&params, plant)
                .map_err(|e| raw.schema_err(line, format!("controller family: {e}")))?
        }
        Some((line, fam)) => {
            return Err(raw.schema_err(line, format!("unknown controller family `{fam}`")));
        }
        None => {
            let tf_pair = |nk: &str, dk: &str, default: Option<RationalTf>| match (
                raw.poly_opt("controller", nk)?,
                raw.poly_opt("controller", dk)?,
            ) {
                (Some(n), Some(d)) => RationalTf::new(n, d)
                    .map_err(|e| raw.schema_err(ctrl_line, format!("{nk}/{dk}: {e}"))),
                (None, None) => default
                    .ok_or_else(|| raw.schema_err(ctrl_line, format!("missing `{nk}`/`{dk}`"))),
                _ => Err(raw.schema_err(
                    ctrl_line,
                    format!("`{nk}` and `{dk}` must be given together"),
                )),
            };
            let c1 = tf_pair("c1_num", "c1_den", Some(RationalTf::one()))?;
            let c2 = tf_pair("c2_num", "c2_den", None)?;
            let c3 = tf_pair("c3_num", "c3_den", Some(RationalTf::zero()))?;
            let cs = tf_pair("cs_num", "cs_den", Some(RationalTf::one()))?;
            LoopComponents {
                c1,
                c2,
                c3,
                cs,
                plant,
                reset,
            }
        }
    };
    lc.reset = reset;

    // [analysis]
    let mut analysis = AnalysisSettings::default();
    if raw.section("analysis").is_some() {
        if let Some(v) = raw.f64_opt("analysis", "wmin")? {
            analysis.wmin = v;
        }
        if let Some(v) = raw.f64_opt("analysis", "wmax")? {
            analysis.wmax = v;
        }
        if let Some(v) = raw.f64_opt("analysis", "points_per_decade")? {
            analysis.points_per_decade = v;
        }
        if let Some(e) = raw.get("analysis", "delay_mode") {
            analysis.delay_mode =
                parse_delay_mode(&e.value).map_err(|msg| raw.schema_err(e.line, msg))?;
        }
    }
    if !(analysis.wmin > 0.0 && analysis.wmax > analysis.wmin) {
        return Err(raw.schema_err(1, "analysis band needs 0 < wmin < wmax"));
    }

    raw.unknown_key_check()?;
    lc.validate_components()
        .map_err(|e| raw.schema_err(1, format!("loop validation: {e}")))?;
    Ok(SystemConfig { lc, analysis })
}
