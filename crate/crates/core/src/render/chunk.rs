use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scene::validate_clip_id;

pub const CHUNK_FRAMES: usize = 121;

/// Target weather / time-of-day condition of a generated video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    GoldenHour,
    Morning,
    Night,
    Rainy,
    Snowy,
    Sunny,
    Foggy,
}

impl Weather {
    pub const ALL: [Weather; 7] = [
        Weather::GoldenHour,
        Weather::Morning,
        Weather::Night,
        Weather::Rainy,
        Weather::Snowy,
        Weather::Sunny,
        Weather::Foggy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Weather::GoldenHour => "golden_hour",
            Weather::Morning => "morning",
            Weather::Night => "night",
            Weather::Rainy => "rainy",
            Weather::Snowy => "snowy",
            Weather::Sunny => "sunny",
            Weather::Foggy => "foggy",
        }
    }

    /// Human-readable phrase for prompts.
    pub fn description(self) -> &'static str {
        match self {
            Weather::GoldenHour => "golden hour",
            Weather::Morning => "early morning",
            Weather::Night => "night",
            Weather::Rainy => "rainy weather",
            Weather::Snowy => "snowy weather",
            Weather::Sunny => "sunny weather",
            Weather::Foggy => "foggy weather",
        }
    }
}

impl fmt::Display for Weather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Weather {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Weather::ALL
            .into_iter()
            .find(|w| w.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown weather tag {s:?}")))
    }
}

/// `{clip_id}_{chunk_id}_{weather}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChunkName {
    clip_id: String,
    chunk_id: u32,
    weather: Weather,
}

impl ChunkName {
    pub fn new(clip_id: impl Into<String>, chunk_id: u32, weather: Weather) -> Result<Self> {
        let clip_id = clip_id.into();
        validate_clip_id(&clip_id)?;
        Ok(Self {
            clip_id,
            chunk_id,
            weather,
        })
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn chunk_id(&self) -> u32 {
        self.chunk_id
    }

    pub fn weather(&self) -> Weather {
        self.weather
    }
}

impl fmt::Display for ChunkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}_{}", self.clip_id, self.chunk_id, self.weather)
    }
}

impl FromStr for ChunkName {
    type Err = Error;

    /// Clip ids contain no '_', so the first two underscores delimit the
    /// fields; the weather tag itself may contain '_'.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidInput(format!("bad chunk name {s:?}: {why}"));
        let mut parts = s.splitn(3, '_');
        let (Some(clip), Some(id), Some(weather)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected {clip_id}_{chunk_id}_{weather}"));
        };
        let canonical = !id.is_empty()
            && id.bytes().all(|b| b.is_ascii_digit())
            && (id == "0" || !id.starts_with('0'));
        if !canonical {
            return Err(bad("chunk id must be a decimal integer without leading zeros"));
        }
        let chunk_id = id.parse().map_err(|_| bad("chunk id out of range"))?;
        let weather = weather.parse().map_err(|_| bad("weather tag outside the closed set"))?;
        ChunkName::new(clip, chunk_id, weather).map_err(|e| bad(&e.to_string()))
    }
}

impl Serialize for ChunkName {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChunkName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A named 121-frame slice. `first_frame` and `last_frame` are 1-based and
/// inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoChunk<'a, T> {
    pub name: ChunkName,
    pub first_frame: usize,
    pub last_frame: usize,
    pub frames: &'a [T],
}

/// Splits frames into consecutive full chunks; a trailing partial chunk is
/// dropped.
pub fn chunk_video<'a, T>(
    frames: &'a [T],
    clip_id: &str,
    weather: Weather,
) -> Result<Vec<VideoChunk<'a, T>>> {
    validate_clip_id(clip_id)?;
    frames
        .chunks_exact(CHUNK_FRAMES)
        .enumerate()
        .map(|(k, f)| {
            Ok(VideoChunk {
                name: ChunkName::new(clip_id, k as u32, weather)?,
                first_frame: k * CHUNK_FRAMES + 1,
                last_frame: (k + 1) * CHUNK_FRAMES,
                frames: f,
            })
        })
        .collect()
}

/// Number of full chunks in a clip of `frame_count` frames.
pub fn chunk_count(frame_count: usize) -> usize {
    frame_count / CHUNK_FRAMES
}
