use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::raster::Rgb;
use crate::error::{Error, Result};
use crate::scene::{MapClass, ObjectCategory};

/// Class to color table. Keys are the snake_case class names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub background: Rgb,
    pub map: BTreeMap<String, Rgb>,
    pub objects: BTreeMap<String, Rgb>,
}

const MAP_COLORS: [(MapClass, Rgb); 9] = [
    (MapClass::LaneLine, [98, 183, 249]),
    (MapClass::Lane, [40, 70, 120]),
    (MapClass::RoadBoundary, [200, 18, 255]),
    (MapClass::Pole, [66, 40, 144]),
    (MapClass::WaitLine, [185, 63, 177]),
    (MapClass::Crosswalk, [206, 131, 63]),
    (MapClass::RoadMarking, [126, 204, 205]),
    (MapClass::TrafficLight, [252, 157, 155]),
    (MapClass::TrafficSign, [131, 206, 137]),
];

const OBJECT_COLORS: [(ObjectCategory, Rgb); 12] = [
    (ObjectCategory::Automobile, [255, 0, 0]),
    (ObjectCategory::HeavyTruck, [0, 0, 255]),
    (ObjectCategory::Bus, [255, 128, 0]),
    (ObjectCategory::TrainOrTram, [128, 64, 0]),
    (ObjectCategory::TrolleyBus, [255, 192, 64]),
    (ObjectCategory::OtherVehicle, [255, 255, 0]),
    (ObjectCategory::Trailer, [128, 128, 255]),
    (ObjectCategory::Person, [0, 255, 0]),
    (ObjectCategory::Stroller, [0, 160, 96]),
    (ObjectCategory::Rider, [0, 255, 255]),
    (ObjectCategory::Animal, [160, 255, 96]),
    (ObjectCategory::ProtrudingObject, [192, 192, 192]),
];

impl Default for Palette {
    fn default() -> Self {
        Palette {
            background: [0, 0, 0],
            map: MAP_COLORS.iter().map(|(c, rgb)| (c.as_str().to_string(), *rgb)).collect(),
            objects: OBJECT_COLORS
                .iter()
                .map(|(c, rgb)| (c.as_str().to_string(), *rgb))
                .collect(),
        }
    }
}

impl Palette {
    pub fn validate(&self) -> Result<()> {
        for c in MapClass::ALL {
            if !self.map.contains_key(c.as_str()) {
                return Err(Error::Config(format!("palette has no color for {}", c.as_str())));
            }
        }
        for c in ObjectCategory::ALL {
            if !self.objects.contains_key(c.as_str()) {
                return Err(Error::Config(format!("palette has no color for {}", c.as_str())));
            }
        }
        if let Some(k) = self.map.keys().find(|k| MapClass::parse(k).is_none()) {
            return Err(Error::Config(format!("palette names unknown map class {k}")));
        }
        if let Some(k) = self.objects.keys().find(|k| ObjectCategory::parse(k).is_none()) {
            return Err(Error::Config(format!("palette names unknown object category {k}")));
        }
        Ok(())
    }

    /// Panics if the palette has not been validated.
    pub fn map_color(&self, c: MapClass) -> Rgb {
        self.map[c.as_str()]
    }

    pub fn object_color(&self, c: ObjectCategory) -> Rgb {
        self.objects[c.as_str()]
    }
}

const DEPTH_STOPS: [(f64, Rgb); 5] = [
    (0.0, [255, 32, 32]),
    (0.25, [255, 200, 0]),
    (0.5, [0, 255, 64]),
    (0.75, [0, 160, 255]),
    (1.0, [96, 0, 255]),
];

/// Near-to-far colormap; `s` is depth divided by the far limit, clamped to
/// `[0, 1]`. Never returns black.
pub fn depth_color(s: f64) -> Rgb {
    let s = if s.is_nan() { 1.0 } else { s.clamp(0.0, 1.0) };
    for w in DEPTH_STOPS.windows(2) {
        let ((s0, c0), (s1, c1)) = (w[0], w[1]);
        if s <= s1 {
            let f = (s - s0) / (s1 - s0);
            let mut out = [0u8; 3];
            for k in 0..3 {
                out[k] = (c0[k] as f64 + f * (c1[k] as f64 - c0[k] as f64)).round() as u8;
            }
            return out;
        }
    }
    DEPTH_STOPS[4].1
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn default_is_complete_and_injective() {
        let p = Palette::default();
        p.validate().unwrap();
        let all: BTreeSet<Rgb> = p.map.values().chain(p.objects.values()).copied().collect();
        assert_eq!(all.len(), 21);
        assert!(!all.contains(&p.background));
    }

    #[test]
    fn missing_entry_rejected() {
        let mut p = Palette::default();
        p.objects.remove("bus");
        assert!(p.validate().is_err());
    }

    #[test]
    fn depth_colors_never_black() {
        for i in 0..=1000 {
            assert_ne!(depth_color(i as f64 / 1000.0), [0, 0, 0]);
        }
        assert_eq!(depth_color(-5.0), DEPTH_STOPS[0].1);
        assert_eq!(depth_color(7.0), DEPTH_STOPS[4].1);
    }
}
