//! Typed link anchors.
//!
//! Every linkable artifact (a commented source element, a whole sketch, or a
//! rectangular marker on a sketch) is named by an [`AnchorId`]: a single
//! decimal kind digit followed by a canonical, lowercase, hyphenated UUID.
//!
//! ```text
//! 2123e4567-e89b-12d3-a456-426614174000
//! ^ kind    ^ uuid (36 chars)
//! ```
//!
//! The 37-character text form is what appears in comments, SVG `id`
//! attributes, `links.json` and every protocol message.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;
use uuid::Uuid;

/// Length of the textual anchor form.
pub const ANCHOR_TEXT_LEN: usize = 37;

const UUID_DASHES: [usize; 4] = [8, 13, 18, 23];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnchorError {
    #[error("malformed anchor `{text}`: {reason}")]
    Malformed { text: String, reason: &'static str },
    #[error("unknown anchor kind digit `{0}`")]
    UnknownKind(char),
}

/// What an anchor names. The discriminant is the kind digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum AnchorKind {
    SourceCode = 0,
    Sketch = 1,
    Marker = 2,
}

impl AnchorKind {
    pub const ALL: [AnchorKind; 3] = [AnchorKind::SourceCode, AnchorKind::Sketch, AnchorKind::Marker];

    pub fn digit(self) -> char {
        (b'0' + self as u8) as char
    }

    pub fn from_digit(c: char) -> Result<Self, AnchorError> {
        match c {
            '0' => Ok(AnchorKind::SourceCode),
            '1' => Ok(AnchorKind::Sketch),
            '2' => Ok(AnchorKind::Marker),
            other => Err(AnchorError::UnknownKind(other)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AnchorKind::SourceCode => "source_code",
            AnchorKind::Sketch => "sketch",
            AnchorKind::Marker => "marker",
        }
    }
}

impl fmt::Display for AnchorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A typed universal link anchor.
///
/// Ordering and equality follow the textual form, so sorted collections of
/// anchors list in the same order as their serialized text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AnchorId {
    kind: AnchorKind,
    uuid: Uuid,
}

impl AnchorId {
    pub fn new(kind: AnchorKind, uuid: Uuid) -> Self {
        AnchorId { kind, uuid }
    }

    /// Fresh random (version 4) anchor of the given kind.
    pub fn generate<R: RngCore + ?Sized>(kind: AnchorKind, rng: &mut R) -> Self {
        let mut bytes = [0u8; 16];
        rng.fill_bytes(&mut bytes);
        let uuid = uuid::Builder::from_random_bytes(bytes).into_uuid();
        AnchorId { kind, uuid }
    }

    /// Fresh anchor drawn from the thread-local OS-seeded generator.
    pub fn random(kind: AnchorKind) -> Self {
        Self::generate(kind, &mut rand::thread_rng())
    }

    pub fn kind(&self) -> AnchorKind {
        self.kind
    }

    pub fn uuid(&self) -> Uuid {
        self.uuid
    }

    pub fn is(&self, kind: AnchorKind) -> bool {
        self.kind == kind
    }

    /// Parse the 37-character form. Uppercase hex is accepted.
    pub fn parse(text: &str) -> Result<Self, AnchorError> {
        let malformed = |reason| AnchorError::Malformed {
            text: text.to_string(),
            reason,
        };
        if text.len() != ANCHOR_TEXT_LEN {
            return Err(malformed("expected 37 characters"));
        }
        let bytes = text.as_bytes();
        if !bytes.is_ascii() {
            return Err(malformed("non-ASCII character"));
        }
        let digit = bytes[0] as char;
        if !digit.is_ascii_digit() {
            return Err(malformed("missing kind digit"));
        }
        let uuid_text = &bytes[1..];
        for (i, &b) in uuid_text.iter().enumerate() {
            if UUID_DASHES.contains(&i) {
                if b != b'-' {
                    return Err(malformed("dash expected"));
                }
            } else if !b.is_ascii_hexdigit() {
                return Err(malformed("bad hex digit"));
            }
        }
        let kind = AnchorKind::from_digit(digit)?;
        let uuid = Uuid::parse_str(&text[1..]).map_err(|_| malformed("bad uuid"))?;
        Ok(AnchorId { kind, uuid })
    }
}

impl fmt::Display for AnchorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.digit(), self.uuid.hyphenated())
    }
}

impl FromStr for AnchorId {
    type Err = AnchorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AnchorId::parse(s)
    }
}

impl Serialize for AnchorId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AnchorId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        AnchorId::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Free-function forms of the anchor operations.
pub fn new_anchor_id<R: RngCore + ?Sized>(kind: AnchorKind, rng: &mut R) -> AnchorId {
    AnchorId::generate(kind, rng)
}

pub fn format_anchor_id(id: &AnchorId) -> String {
    id.to_string()
}

pub fn parse_anchor_id(text: &str) -> Result<AnchorId, AnchorError> {
    AnchorId::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    const SAMPLE_UUID: &str = "123e4567-e89b-12d3-a456-426614174000";

    #[test]
    fn kind_digits_are_stable() {
        assert_eq!(AnchorKind::SourceCode.digit(), '0');
        assert_eq!(AnchorKind::Sketch.digit(), '1');
        assert_eq!(AnchorKind::Marker.digit(), '2');
    }

    #[test]
    fn generated_ids_carry_their_kind() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let id = new_anchor_id(AnchorKind::SourceCode, &mut rng);
        assert_eq!(id.kind(), AnchorKind::SourceCode);
        assert!(id.to_string().starts_with('0'));
        assert_eq!(id.uuid().get_version_num(), 4);

        let id = new_anchor_id(AnchorKind::Sketch, &mut rng);
        assert!(id.to_string().starts_with('1'));
    }

    #[test]
    fn formats_marker_sample() {
        let id = AnchorId::new(AnchorKind::Marker, Uuid::parse_str(SAMPLE_UUID).unwrap());
        assert_eq!(format_anchor_id(&id), "2123e4567-e89b-12d3-a456-426614174000");
    }

    #[test]
    fn formats_nil_uuid() {
        let id = AnchorId::new(AnchorKind::SourceCode, Uuid::nil());
        let text = id.to_string();
        assert_eq!(text, format!("0{}", "00000000-0000-0000-0000-000000000000"));
        assert_eq!(text.len(), ANCHOR_TEXT_LEN);
    }

    #[test]
    fn parses_sketch_sample() {
        let id = parse_anchor_id("1123e4567-e89b-12d3-a456-426614174000").unwrap();
        assert_eq!(id.kind(), AnchorKind::Sketch);
        assert_eq!(id.uuid().to_string(), SAMPLE_UUID);
    }

    #[test]
    fn rejects_unknown_kind_digit() {
        assert_eq!(
            parse_anchor_id("9123e4567-e89b-12d3-a456-426614174000"),
            Err(AnchorError::UnknownKind('9'))
        );
    }

    #[test]
    fn rejects_short_text() {
        assert!(matches!(
            parse_anchor_id("0123e4567"),
            Err(AnchorError::Malformed { .. })
        ));
    }

    #[test]
    fn uppercase_input_normalizes() {
        let id = parse_anchor_id("0123E4567-E89B-12D3-A456-426614174000").unwrap();
        assert_eq!(id.to_string(), "0123e4567-e89b-12d3-a456-426614174000");
    }

    #[test]
    fn rejects_misplaced_dashes_and_braces() {
        for bad in [
            "0123e4567e-89b-12d3-a456-426614174000",
            "0{23e4567-e89b-12d3-a456-42661417400}",
            "0123e4567-e89b-12d3-a456-42661417400g",
            "x123e4567-e89b-12d3-a456-426614174000",
            "0123e4567-e89b-12d3-a456-4266141740é",
        ] {
            assert!(parse_anchor_id(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn serde_uses_text_form() {
        let id = parse_anchor_id("2123e4567-e89b-12d3-a456-426614174000").unwrap();
        let json = serde_json::to_string(&id).unwrap();
        assert_eq!(json, "\"2123e4567-e89b-12d3-a456-426614174000\"");
        let back: AnchorId = serde_json::from_str(&json).unwrap();
        assert_eq!(back, id);
        assert!(serde_json::from_str::<AnchorId>("\"3123e4567-e89b-12d3-a456-426614174000\"").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_anchor() -> impl Strategy<Value = AnchorId> {
            (0u8..3, any::<u128>()).prop_map(|(k, bits)| {
                let kind = AnchorKind::from_digit((b'0' + k) as char).unwrap();
                AnchorId::new(kind, Uuid::from_u128(bits))
            })
        }

        proptest! {
            #[test]
            fn round_trips(id in any_anchor()) {
                let text = id.to_string();
                prop_assert_eq!(text.len(), ANCHOR_TEXT_LEN);
                prop_assert_eq!(AnchorId::parse(&text).unwrap(), id);
            }

            #[test]
            fn format_parse_is_identity_on_valid_text(
                digit in "[012]",
                hex in "[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}",
            ) {
                let text = format!("{digit}{hex}");
                prop_assert_eq!(AnchorId::parse(&text).unwrap().to_string(), text);
            }

            #[test]
            fn arbitrary_strings_never_panic(s in "\\PC{0,45}") {
                let _ = AnchorId::parse(&s);
            }
        }
    }
}
