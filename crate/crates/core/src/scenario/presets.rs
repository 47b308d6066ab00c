use super::config::{Mode, Scenario};
use crate::error::{Error, Result};

const FIGURE4: &str = include_str!("../../presets/figure4.json");
const FIGURE5: &str = include_str!("../../presets/figure5.json");
const FIGURE6: &str = include_str!("../../presets/figure6.json");

pub const PRESET_NAMES: [&str; 3] = ["figure4", "figure5", "figure6"];

/// Raw JSON of a committed preset.
pub fn preset_text(mode: Mode) -> Option<&'static str> {
    match mode {
        Mode::Figure4 => Some(FIGURE4),
        Mode::Figure5 => Some(FIGURE5),
        Mode::Figure6 => Some(FIGURE6),
        _ => None,
    }
}

pub fn preset(mode: Mode) -> Result<Scenario> {
    let text = preset_text(mode).ok_or_else(|| Error::invalid(format!("mode `{}` has no preset", mode.name())))?;
    Scenario::from_json(text)
}

pub fn preset_by_name(name: &str) -> Result<Scenario> {
    let mode = match name {
        "figure4" => Mode::Figure4,
        "figure5" => Mode::Figure5,
        "figure6" => Mode::Figure6,
        other => {
            return Err(Error::invalid(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    preset(mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_carry_their_mode() {
        for name in PRESET_NAMES {
            let s = preset_by_name(name).unwrap();
            assert_eq!(s.mode.name(), name);
            assert_eq!(s.system.bath.len(), 8);
            assert_eq!(s.system.field_mt, [0.0, 0.0, 10.0]);
        }
        assert!(preset_by_name("figure7").is_err());
    }

    #[test]
    fn figure_presets_share_one_geometry() {
        let a = preset(Mode::Figure4).unwrap();
        for m in [Mode::Figure5, Mode::Figure6] {
            assert_eq!(preset(m).unwrap().system, a.system);
        }
    }
}
