//! Operation identifiers, stages and the descriptor registry.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::OpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Stage {
    Lighting = 1,
    Color = 2,
    ColorSpecific = 3,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Lighting, Stage::Color, Stage::ColorSpecific];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Option<Stage> {
        match n {
            1 => Some(Stage::Lighting),
            2 => Some(Stage::Color),
            3 => Some(Stage::ColorSpecific),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Stage::Lighting => "lighting",
            Stage::Color => "global color",
            Stage::ColorSpecific => "color-specific",
        }
    }
}

impl TryFrom<u8> for Stage {
    type Error = String;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        Stage::from_number(n).ok_or_else(|| format!("stage must be 1, 2 or 3, got {n}"))
    }
}

impl From<Stage> for u8 {
    fn from(s: Stage) -> u8 {
        s.number()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.number(), self.label())
    }
}

/// The eight hue bands targeted by color-specific operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    Red,
    Orange,
    Yellow,
    Green,
    Aqua,
    Blue,
    Purple,
    Magenta,
}

impl Band {
    pub const ALL: [Band; 8] = [
        Band::Red,
        Band::Orange,
        Band::Yellow,
        Band::Green,
        Band::Aqua,
        Band::Blue,
        Band::Purple,
        Band::Magenta,
    ];

    /// Band centers in degrees, in [`Band::ALL`] order.
    pub const CENTERS: [f64; 8] = [0.0, 30.0, 60.0, 120.0, 180.0, 240.0, 280.0, 320.0];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn center(self) -> f64 {
        Self::CENTERS[self.index()]
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::Red => "red",
            Band::Orange => "orange",
            Band::Yellow => "yellow",
            Band::Green => "green",
            Band::Aqua => "aqua",
            Band::Blue => "blue",
            Band::Purple => "purple",
            Band::Magenta => "magenta",
        }
    }

    fn from_word(word: &str) -> Option<Band> {
        let w = word.strip_suffix('s').unwrap_or(word);
        Band::ALL
            .into_iter()
            .find(|b| b.name() == w || (w == "cyan" && *b == Band::Aqua))
    }
}

/// What a color-specific operation changes inside its band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BandChannel {
    Hue,
    Luminance,
    Saturation,
}

impl BandChannel {
    pub const ALL: [BandChannel; 3] = [BandChannel::Hue, BandChannel::Luminance, BandChannel::Saturation];

    pub fn name(self) -> &'static str {
        match self {
            BandChannel::Hue => "hue",
            BandChannel::Luminance => "luminance",
            BandChannel::Saturation => "saturation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpId {
    Blacks,
    Contrast,
    Exposure,
    Highlights,
    Whites,
    Shadows,
    Saturation,
    Temperature,
    Tint,
    Band(BandChannel, Band),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Invertibility {
    /// Negating the value undoes the op up to float rounding, off the clip rails.
    Exact,
    /// Negating the value undoes the op only approximately.
    Approximate,
}

/// Lighting ops follow the usual editor processing order.
const GLOBAL_OPS: [OpId; 9] = [
    OpId::Exposure,
    OpId::Contrast,
    OpId::Highlights,
    OpId::Shadows,
    OpId::Whites,
    OpId::Blacks,
    OpId::Saturation,
    OpId::Temperature,
    OpId::Tint,
];

pub const OP_COUNT: usize = 33;

impl OpId {
    /// Every operation in registry order.
    pub fn all() -> &'static [OpId; OP_COUNT] {
        static ALL: std::sync::OnceLock<[OpId; OP_COUNT]> = std::sync::OnceLock::new();
        ALL.get_or_init(|| {
            let mut out = [OpId::Blacks; OP_COUNT];
            let mut i = 0;
            for op in GLOBAL_OPS {
                out[i] = op;
                i += 1;
            }
            for channel in BandChannel::ALL {
                for band in Band::ALL {
                    out[i] = OpId::Band(channel, band);
                    i += 1;
                }
            }
            out
        })
    }

    pub fn registry_index(self) -> usize {
        match self {
            OpId::Band(channel, band) => 9 + channel as usize * 8 + band.index(),
            other => GLOBAL_OPS.iter().position(|&o| o == other).unwrap(),
        }
    }

    pub fn stage(self) -> Stage {
        match self {
            OpId::Blacks
            | OpId::Contrast
            | OpId::Exposure
            | OpId::Highlights
            | OpId::Whites
            | OpId::Shadows => Stage::Lighting,
            OpId::Saturation | OpId::Temperature | OpId::Tint => Stage::Color,
            OpId::Band(..) => Stage::ColorSpecific,
        }
    }

    pub fn name(self) -> String {
        match self {
            OpId::Blacks => "blacks".into(),
            OpId::Contrast => "contrast".into(),
            OpId::Exposure => "exposure".into(),
            OpId::Highlights => "highlights".into(),
            OpId::Whites => "whites".into(),
            OpId::Shadows => "shadows".into(),
            OpId::Saturation => "saturation".into(),
            OpId::Temperature => "temperature".into(),
            OpId::Tint => "tint".into(),
            OpId::Band(channel, band) => format!("{}_{}", channel.name(), band.name()),
        }
    }

    pub fn invertibility(self) -> Invertibility {
        Invertibility::Exact
    }

    pub fn descriptor(self) -> OpDescriptor {
        OpDescriptor {
            op: self,
            stage: self.stage(),
            invertibility: self.invertibility(),
            doc: doc_string(self),
        }
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for OpId {
    type Err = OpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        OpId::all()
            .iter()
            .copied()
            .find(|op| op.name() == lower)
            .ok_or_else(|| OpError::UnknownOp(s.to_string()))
    }
}

impl Serialize for OpId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for OpId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpDescriptor {
    pub op: OpId,
    pub stage: Stage,
    pub invertibility: Invertibility,
    pub doc: String,
}

/// Descriptors in registry order, optionally restricted to one stage.
pub fn list_ops(stage: Option<Stage>) -> Vec<OpDescriptor> {
    OpId::all()
        .iter()
        .filter(|op| stage.is_none_or(|s| op.stage() == s))
        .map(|op| op.descriptor())
        .collect()
}

/// Plain-text library legend: one line per operation with its identifier,
/// stage and semantics.
pub fn render_op_docs(descriptors: &[OpDescriptor]) -> String {
    let mut out = String::new();
    for d in descriptors {
        out.push_str(&format!(
            "- {} (stage {}, {}; value -100..100, 0 = no change): {}\n",
            d.op,
            d.stage.number(),
            d.stage.label(),
            d.doc
        ));
    }
    out
}

fn doc_string(op: OpId) -> String {
    let body = match op {
        OpId::Blacks => "Moves the deepest tones. Positive lifts the black point and opens up crushed shadows; negative deepens blacks. Weighted by (1-Y)^4 of gamma luminance Y.",
        OpId::Contrast => "Scales encoded values around mid-gray by 2^(v/100). Positive adds punch; negative flattens the tonal range.",
        OpId::Exposure => "Multiplies linear light by 2^(v/50): +50 is one stop brighter, -50 one stop darker.",
        OpId::Highlights => "Moves bright tones. Positive brightens highlights; negative recovers detail in bright areas. Weighted by Y^2.",
        OpId::Whites => "Moves the brightest tones. Positive pushes the white point up; negative pulls clipped whites back. Weighted by Y^4.",
        OpId::Shadows => "Moves dark tones. Positive lifts shadow detail; negative darkens shadows. Weighted by (1-Y)^2.",
        OpId::Saturation => "Scales chroma around linear luminance for all colors. -100 produces grayscale; positive values make every color more vivid.",
        OpId::Temperature => "White balance along blue-yellow. Positive warms (more red, less blue); negative cools.",
        OpId::Tint => "White balance along green-magenta. Positive shifts toward magenta (less green); negative toward green.",
        OpId::Band(BandChannel::Hue, _) => "Rotates the hue of pixels in this color band by up to 30 degrees at +/-100. Neutral pixels and other bands are untouched.",
        OpId::Band(BandChannel::Saturation, _) => "Scales the saturation of pixels in this color band. Negative mutes the band; positive intensifies it. Neutral pixels are untouched.",
        OpId::Band(BandChannel::Luminance, _) => "Brightens (positive) or darkens (negative) pixels in this color band, scaled by their saturation so neutrals are untouched.",
    };
    match op {
        OpId::Band(_, band) => format!(
            "{body} Band: {} (centered at {} degrees hue).",
            band.name(),
            band.center()
        ),
        _ => body.to_string(),
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
        .collect()
}

fn channel_word(word: &str) -> Option<BandChannel> {
    match word {
        "hue" | "hues" => Some(BandChannel::Hue),
        "luminance" | "lightness" => Some(BandChannel::Luminance),
        "saturation" => Some(BandChannel::Saturation),
        _ => None,
    }
}

fn global_word(word: &str) -> Option<OpId> {
    match word {
        "blacks" => Some(OpId::Blacks),
        "contrast" => Some(OpId::Contrast),
        "exposure" => Some(OpId::Exposure),
        "highlights" | "highlight" => Some(OpId::Highlights),
        "whites" => Some(OpId::Whites),
        "shadows" | "shadow" => Some(OpId::Shadows),
        "saturation" => Some(OpId::Saturation),
        "temperature" => Some(OpId::Temperature),
        "tint" => Some(OpId::Tint),
        _ => None,
    }
}

/// Every operation named in free text, in order of first mention.
///
/// Recognises canonical identifiers (`hue_red`), band phrases (`red hue`,
/// `saturation of the blues`) and the global operation names. A channel word
/// consumed by a band phrase does not also count as the global operation.
pub fn ops_in_text(text: &str) -> Vec<OpId> {
    let words = tokens(text);
    let mut used = vec![false; words.len()];
    let mut found: Vec<(usize, OpId)> = Vec::new();

    for (i, w) in words.iter().enumerate() {
        if let Ok(op) = w.parse::<OpId>() {
            if matches!(op, OpId::Band(..)) {
                used[i] = true;
                found.push((i, op));
            }
        }
    }
    for i in 0..words.len() {
        if used[i] {
            continue;
        }
        let Some(channel) = channel_word(&words[i]) else {
            continue;
        };
        // "<band> <channel>"
        if i > 0 && !used[i - 1] {
            if let Some(band) = Band::from_word(&words[i - 1]) {
                used[i - 1] = true;
                used[i] = true;
                found.push((i - 1, OpId::Band(channel, band)));
                continue;
            }
        }
        // "<channel> of [the] <band>"
        let mut j = i + 1;
        if words.get(j).map(String::as_str) == Some("of") {
            j += 1;
            if words.get(j).map(String::as_str) == Some("the") {
                j += 1;
            }
            if let Some(band) = words.get(j).and_then(|w| Band::from_word(w)) {
                for u in &mut used[i..=j] {
                    *u = true;
                }
                found.push((i, OpId::Band(channel, band)));
            }
        }
    }
    for (i, w) in words.iter().enumerate() {
        if !used[i] {
            if let Some(op) = global_word(w) {
                found.push((i, op));
            }
        }
    }
    found.sort_by_key(|&(i, _)| i);
    let mut out = Vec::new();
    for (_, op) in found {
        if !out.contains(&op) {
            out.push(op);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_partition() {
        assert_eq!(OpId::all().len(), 33);
        assert_eq!(list_ops(Some(Stage::Lighting)).len(), 6);
        assert_eq!(list_ops(Some(Stage::Color)).len(), 3);
        assert_eq!(list_ops(Some(Stage::ColorSpecific)).len(), 24);
        assert_eq!(list_ops(None).len(), 33);
    }

    #[test]
    fn registry_index_matches_position() {
        for (i, op) in OpId::all().iter().enumerate() {
            assert_eq!(op.registry_index(), i);
            assert_eq!(op.name().parse::<OpId>().unwrap(), *op);
            assert!(!op.descriptor().doc.is_empty());
        }
        let names: std::collections::HashSet<_> = OpId::all().iter().map(|o| o.name()).collect();
        assert_eq!(names.len(), 33);
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(matches!("vignette".parse::<OpId>(), Err(OpError::UnknownOp(_))));
        assert_eq!("Hue_Red".parse::<OpId>().unwrap(), OpId::Band(BandChannel::Hue, Band::Red));
    }

    #[test]
    fn text_matching() {
        use BandChannel::*;
        assert_eq!(ops_in_text("Slightly increase exposure"), vec![OpId::Exposure]);
        assert_eq!(
            ops_in_text("Boost the red saturation a little"),
            vec![OpId::Band(Saturation, Band::Red)]
        );
        assert_eq!(
            ops_in_text("lower saturation of the blues, then saturation overall"),
            vec![OpId::Band(Saturation, Band::Blue), OpId::Saturation]
        );
        assert_eq!(
            ops_in_text("hue_aqua moderate increase; contrast too"),
            vec![OpId::Band(Hue, Band::Aqua), OpId::Contrast]
        );
        assert!(ops_in_text("the sky looks washed out").is_empty());
        assert_eq!(ops_in_text("cyan hue"), vec![OpId::Band(Hue, Band::Aqua)]);
    }
}
